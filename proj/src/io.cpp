/*
 * Copyright 2026 The detxplain Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "detxplain/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "detxplain/error.hpp"
#include "json.hpp"

namespace detxplain {
namespace {

void PutU32(std::vector<std::uint8_t>* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t GetU32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void PngWriteCallback(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void PngFlushCallback(png_structp) {}

void PngErrorCallback(png_structp, png_const_charp msg) {
  throw Error(ErrorCode::kData, std::string("png: ") + msg);
}

void PngWarningCallback(png_structp, png_const_charp) {}

std::vector<std::uint8_t> EncodePng(int height, int width, int color_type,
                                    int channels,
                                    std::span<const std::uint8_t> pixels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                            PngErrorCallback, PngWarningCallback);
  if (png == nullptr) Fail(ErrorCode::kIo, "png: cannot allocate writer");
  png_infop info = png_create_info_struct(png);
  try {
    png_set_write_fn(png, &out, PngWriteCallback, PngFlushCallback);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < height; ++y) {
      png_write_row(png, const_cast<png_bytep>(
                             &pixels[static_cast<std::size_t>(y) * width * channels]));
    }
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

struct PngReadState {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void PngReadCallback(png_structp png, png_bytep data, png_size_t length) {
  auto* st = static_cast<PngReadState*>(png_get_io_ptr(png));
  if (st->pos + length > st->bytes.size()) {
    png_error(png, "truncated stream");
  }
  std::memcpy(data, st->bytes.data() + st->pos, length);
  st->pos += length;
}

}  // namespace

std::vector<std::uint8_t> EncodeSal1(int height, int width,
                                     std::span<const double> values) {
  if (values.size() != static_cast<std::size_t>(height) * width) {
    Fail(ErrorCode::kInvalidArgument, "SAL1: value count mismatch");
  }
  std::vector<std::uint8_t> out = {'S', 'A', 'L', '1'};
  out.reserve(12 + values.size() * 4);
  PutU32(&out, static_cast<std::uint32_t>(height));
  PutU32(&out, static_cast<std::uint32_t>(width));
  for (double v : values) {
    PutU32(&out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

RawGrid DecodeSal1(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "SAL1", 4) != 0) {
    Fail(ErrorCode::kData, "SAL1: bad magic");
  }
  RawGrid g;
  g.height = static_cast<int>(GetU32(bytes.data() + 4));
  g.width = static_cast<int>(GetU32(bytes.data() + 8));
  const std::size_t n = static_cast<std::size_t>(g.height) * g.width;
  if (bytes.size() != 12 + 4 * n) Fail(ErrorCode::kData, "SAL1: bad length");
  g.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    g.values[i] = std::bit_cast<float>(GetU32(bytes.data() + 12 + 4 * i));
  }
  return g;
}

void WriteSal1(const std::filesystem::path& path, int height, int width,
               std::span<const double> values) {
  WriteFileBytes(path, EncodeSal1(height, width, values));
}

RawGrid ReadSal1(const std::filesystem::path& path) {
  return DecodeSal1(ReadFileBytes(path));
}

std::vector<std::uint8_t> EncodePngGray(const Image& image) {
  std::vector<std::uint8_t> px(image.values().size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = static_cast<std::uint8_t>(std::lround(image.values()[i] * 255.0));
  }
  return EncodePng(image.height(), image.width(), PNG_COLOR_TYPE_GRAY, 1, px);
}

std::vector<std::uint8_t> EncodePngRgb(const RgbImage& image) {
  return EncodePng(image.height, image.width, PNG_COLOR_TYPE_RGB, 3,
                   image.pixels);
}

Image DecodePngGray(std::span<const std::uint8_t> bytes) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                           PngErrorCallback, PngWarningCallback);
  if (png == nullptr) Fail(ErrorCode::kIo, "png: cannot allocate reader");
  png_infop info = png_create_info_struct(png);
  PngReadState state{bytes, 0};
  std::vector<double> data;
  int width = 0;
  int height = 0;
  try {
    png_set_read_fn(png, &state, PngReadCallback);
    png_read_info(png, info);
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const int color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
      png_set_expand_gray_1_2_4_to_8(png);
    }
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA ||
        color == PNG_COLOR_TYPE_PALETTE) {
      png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    data.resize(static_cast<std::size_t>(width) * height);
    for (int y = 0; y < height; ++y) {
      png_read_row(png, row.data(), nullptr);
      for (int x = 0; x < width; ++x) {
        data[static_cast<std::size_t>(y) * width + x] = row[x] / 255.0;
      }
    }
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
  png_destroy_read_struct(&png, &info, nullptr);
  return Image(height, width, std::move(data));
}

void WritePngGray(const std::filesystem::path& path, const Image& image) {
  WriteFileBytes(path, EncodePngGray(image));
}

void WritePngRgb(const std::filesystem::path& path, const RgbImage& image) {
  WriteFileBytes(path, EncodePngRgb(image));
}

Image ReadPngGray(const std::filesystem::path& path) {
  try {
    return DecodePngGray(ReadFileBytes(path));
  } catch (const Error& e) {
    Fail(ErrorCode::kData, path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorCode::kData, "cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) Fail(ErrorCode::kIo, "write failed for " + path.string());
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  WriteFileBytes(path, std::span<const std::uint8_t>(
                           reinterpret_cast<const std::uint8_t*>(text.data()),
                           text.size()));
}

std::vector<std::pair<std::string, std::string>> ParseKeyValueText(
    const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorCode::kConfig,
           "config line " + std::to_string(line_no) + ": expected key = value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

const DatasetEntry& Dataset::Find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return e;
  }
  Fail(ErrorCode::kData, "image id not in dataset: " + id);
}

Image Dataset::LoadImage(const DatasetEntry& entry) const {
  Image img = ReadPngGray(root / entry.file);
  if (img.height() != entry.height || img.width() != entry.width) {
    Fail(ErrorCode::kData, entry.file + ": size differs from annotations");
  }
  return img;
}

Dataset LoadDataset(const std::filesystem::path& root) {
  const auto path = root / "annotations.json";
  const auto bytes = ReadFileBytes(path);
  Dataset ds;
  ds.root = root;
  try {
    const auto doc = nlohmann::json::parse(bytes.begin(), bytes.end());
    for (const auto& item : doc.at("images")) {
      DatasetEntry e;
      e.id = item.at("id").get<std::string>();
      e.file = item.at("file").get<std::string>();
      e.width = item.at("width").get<int>();
      e.height = item.at("height").get<int>();
      for (const auto& b : item.at("boxes")) {
        BBox box{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(),
                 b.at(3).get<int>()};
        if (!IsValidBox(box, e.height, e.width)) {
          Fail(ErrorCode::kData, "invalid box in annotations for " + e.id);
        }
        e.boxes.push_back(box);
      }
      ds.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& ex) {
    Fail(ErrorCode::kData, path.string() + ": " + ex.what());
  }
  return ds;
}

std::string AnnotationsToJson(const std::vector<DatasetEntry>& entries) {
  nlohmann::ordered_json images = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json boxes = nlohmann::ordered_json::array();
    for (const auto& b : e.boxes) boxes.push_back({b.x1, b.y1, b.x2, b.y2});
    images.push_back({{"id", e.id},
                      {"file", e.file},
                      {"width", e.width},
                      {"height", e.height},
                      {"boxes", boxes}});
  }
  nlohmann::ordered_json doc;
  doc["images"] = images;
  return doc.dump(2) + "\n";
}

}  // namespace detxplain
