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

#include "detxplain/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "detxplain/error.hpp"

namespace detxplain {

bool IsValidBox(const BBox& box, int height, int width) {
  return box.x1 >= 0 && box.y1 >= 0 && box.x1 < box.x2 && box.y1 < box.y2 &&
         box.x2 <= width && box.y2 <= height;
}

Image::Image(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (height <= 0 || width <= 0) {
    Fail(ErrorCode::kInvalidArgument, "image dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    Fail(ErrorCode::kInvalidArgument,
         "image data length " + std::to_string(data_.size()) +
             " does not match " + std::to_string(height) + "x" +
             std::to_string(width));
  }
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      Fail(ErrorCode::kInvalidArgument, "image value outside [0,1]");
    }
  }
}

Image Image::Filled(int height, int width, double value) {
  return Image(height, width,
               std::vector<double>(static_cast<std::size_t>(height) * width,
                                   value));
}

double Image::Mean() const {
  double sum = 0.0;
  for (double v : data_) sum += v;
  return data_.empty() ? 0.0 : sum / static_cast<double>(data_.size());
}

void ValidateSaliency(const SaliencyMap& map) {
  if (map.values.size() != static_cast<std::size_t>(map.height) * map.width) {
    Fail(ErrorCode::kInvalidArgument, "saliency size mismatch");
  }
  for (double v : map.values) {
    if (!std::isfinite(v) || v < 0.0) {
      Fail(ErrorCode::kInvalidArgument,
           "saliency values must be finite and non-negative");
    }
  }
}

double Iou(const BBox& a, const BBox& b) {
  const long iw = std::max(0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const long ih = std::max(0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const long inter = iw * ih;
  const long uni = a.area() + b.area() - inter;
  if (uni <= 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

// Sample coordinate along one axis, clamped to the grid.
inline void AxisSample(int i, int out, int n, double offset, int* lo,
                       double* frac) {
  double g = offset;
  if (out > 1) g += static_cast<double>(i) * (n - 1) / (out - 1);
  g = std::clamp(g, 0.0, static_cast<double>(n - 1));
  int l = static_cast<int>(std::floor(g));
  if (l >= n - 1) l = n - 2;
  *lo = l;
  *frac = g - l;
}

}  // namespace

Matrix BilinearUpsample(const Matrix& grid, int out_h, int out_w,
                        GridOffset offset) {
  if (out_h <= 0 || out_w <= 0) {
    Fail(ErrorCode::kInvalidArgument, "upsample output size must be positive");
  }
  if (grid.rows < 2 || grid.cols < 2) {
    Fail(ErrorCode::kInvalidArgument, "upsample grid must be at least 2x2");
  }
  std::vector<int> x0(out_w);
  std::vector<double> fx(out_w);
  for (int x = 0; x < out_w; ++x) {
    AxisSample(x, out_w, grid.cols, offset.dx, &x0[x], &fx[x]);
  }
  Matrix out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    int y0;
    double fy;
    AxisSample(y, out_h, grid.rows, offset.dy, &y0, &fy);
    const double* top = &grid.data[static_cast<std::size_t>(y0) * grid.cols];
    const double* bot = top + grid.cols;
    double* row = &out.data[static_cast<std::size_t>(y) * out_w];
    for (int x = 0; x < out_w; ++x) {
      const int c = x0[x];
      const double t = top[c] + fx[x] * (top[c + 1] - top[c]);
      const double b = bot[c] + fx[x] * (bot[c + 1] - bot[c]);
      // Convex combination; keep the result inside the corner range exactly.
      double v = t + fy * (b - t);
      const double lo = std::min({top[c], top[c + 1], bot[c], bot[c + 1]});
      const double hi = std::max({top[c], top[c + 1], bot[c], bot[c + 1]});
      row[x] = std::clamp(v, lo, hi);
    }
  }
  return out;
}

int OtsuBin(double normalized) {
  if (normalized <= 0.0) return 0;
  const int bin = static_cast<int>(std::ceil(normalized * 256.0)) - 1;
  return std::clamp(bin, 0, 255);
}

double OtsuThreshold(std::span<const double> values) {
  if (values.empty()) {
    Fail(ErrorCode::kDegenerateInput, "otsu: empty input");
  }
  const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
  const double mn = *mn_it;
  const double range = *mx_it - mn;
  if (!(range > 0.0)) {
    Fail(ErrorCode::kDegenerateInput, "otsu: input has no variance");
  }
  std::array<long, 256> hist{};
  for (double v : values) ++hist[OtsuBin((v - mn) / range)];

  long total = 0;
  double total_sum = 0.0;
  for (int b = 0; b < 256; ++b) {
    total += hist[b];
    total_sum += static_cast<double>(b) * hist[b];
  }
  long n0 = 0;
  double s0 = 0.0;
  double best = -1.0;
  int best_t = 0;
  for (int t = 0; t < 255; ++t) {
    n0 += hist[t];
    s0 += static_cast<double>(t) * hist[t];
    const long n1 = total - n0;
    if (n0 == 0 || n1 == 0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (total_sum - s0) / n1;
    const double w0 = static_cast<double>(n0) / total;
    const double w1 = static_cast<double>(n1) / total;
    const double between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return mn + range * (static_cast<double>(best_t + 1) / 256.0);
}

SaliencyMap NormalizeMap(const SaliencyMap& map) {
  SaliencyMap out = map;
  if (map.values.empty()) return out;
  const auto [mn_it, mx_it] =
      std::minmax_element(map.values.begin(), map.values.end());
  const double mn = *mn_it;
  const double range = *mx_it - mn;
  if (!(range > 0.0)) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (double& v : out.values) v = (v - mn) / range;
  return out;
}

RgbImage RenderHeatmapOverlay(const Image& image, const SaliencyMap& map,
                              std::span<const BBox> boxes) {
  if (image.height() != map.height || image.width() != map.width) {
    Fail(ErrorCode::kInvalidArgument,
         "overlay: saliency dimensions do not match the image");
  }
  const SaliencyMap norm = NormalizeMap(map);
  const auto& lut = HeatmapColormap();
  RgbImage out;
  out.height = image.height();
  out.width = image.width();
  out.pixels.resize(static_cast<std::size_t>(out.height) * out.width * 3);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const int gray = static_cast<int>(std::lround(image.at(y, x) * 255.0));
      const int idx = std::clamp(
          static_cast<int>(std::lround(norm.at(y, x) * 255.0)), 0, 255);
      std::uint8_t* px =
          &out.pixels[(static_cast<std::size_t>(y) * out.width + x) * 3];
      for (int ch = 0; ch < 3; ++ch) {
        px[ch] = static_cast<std::uint8_t>((gray + lut[idx][ch] + 1) / 2);
      }
    }
  }
  auto paint = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= out.width || y >= out.height) return;
    std::uint8_t* px =
        &out.pixels[(static_cast<std::size_t>(y) * out.width + x) * 3];
    px[0] = 0;
    px[1] = 255;
    px[2] = 0;
  };
  for (const BBox& b : boxes) {
    for (int x = b.x1; x < b.x2; ++x) {
      paint(x, b.y1);
      paint(x, b.y2 - 1);
    }
    for (int y = b.y1; y < b.y2; ++y) {
      paint(b.x1, y);
      paint(b.x2 - 1, y);
    }
  }
  return out;
}

}  // namespace detxplain
