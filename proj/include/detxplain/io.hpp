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

#ifndef DETXPLAIN_IO_HPP_
#define DETXPLAIN_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "detxplain/imaging.hpp"

namespace detxplain {

// SAL1 raw grid: "SAL1", u32 height, u32 width (little-endian), then
// height*width little-endian IEEE-754 float32 values, row-major.
struct RawGrid {
  int height = 0;
  int width = 0;
  std::vector<float> values;
};

std::vector<std::uint8_t> EncodeSal1(int height, int width,
                                     std::span<const double> values);
RawGrid DecodeSal1(std::span<const std::uint8_t> bytes);
void WriteSal1(const std::filesystem::path& path, int height, int width,
               std::span<const double> values);
RawGrid ReadSal1(const std::filesystem::path& path);

// PNG (8-bit). Gray images are quantized with round(v * 255).
std::vector<std::uint8_t> EncodePngGray(const Image& image);
std::vector<std::uint8_t> EncodePngRgb(const RgbImage& image);
Image DecodePngGray(std::span<const std::uint8_t> bytes);
void WritePngGray(const std::filesystem::path& path, const Image& image);
void WritePngRgb(const std::filesystem::path& path, const RgbImage& image);
Image ReadPngGray(const std::filesystem::path& path);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    std::span<const std::uint8_t> bytes);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

// `key = value` lines; blank lines and '#' comments ignored. Throws kConfig
// for a line without '='.
std::vector<std::pair<std::string, std::string>> ParseKeyValueText(
    const std::string& text);

// Dataset layout: images/{id}.png plus annotations.json.
struct DatasetEntry {
  std::string id;
  std::string file;  // relative to the dataset root
  int width = 0;
  int height = 0;
  std::vector<BBox> boxes;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;

  const DatasetEntry& Find(const std::string& id) const;
  Image LoadImage(const DatasetEntry& entry) const;
};

// Throws kData on malformed annotations or boxes outside the image.
Dataset LoadDataset(const std::filesystem::path& root);
std::string AnnotationsToJson(const std::vector<DatasetEntry>& entries);

}  // namespace detxplain

#endif  // DETXPLAIN_IO_HPP_
