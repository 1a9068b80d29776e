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

#ifndef DETXPLAIN_IMAGING_HPP_
#define DETXPLAIN_IMAGING_HPP_

// Shared numeric and raster primitives: images, boxes, saliency maps,
// interpolation, Otsu binarization and heatmap rendering.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace detxplain {

// Axis-aligned box in pixel coordinates, half-open: [x1, x2) x [y1, y2).
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long area() const { return static_cast<long>(width()) * height(); }
  double center_x() const { return 0.5 * (x1 + x2); }
  double center_y() const { return 0.5 * (y1 + y2); }
  bool contains(int x, int y) const {
    return x >= x1 && x < x2 && y >= y1 && y < y2;
  }
  bool operator==(const BBox&) const = default;
};

// True when the box has positive area and lies inside a height x width raster.
bool IsValidBox(const BBox& box, int height, int width);

// Single-channel intensity image. Every value is finite and in [0, 1].
class Image {
 public:
  Image() = default;
  // Throws kInvalidArgument when the size does not match or a value is out of
  // range.
  Image(int height, int width, std::vector<double> data);

  static Image Filled(int height, int width, double value);

  int height() const { return height_; }
  int width() const { return width_; }
  double at(int y, int x) const { return data_[index(y, x)]; }
  std::span<const double> values() const { return data_; }
  double Mean() const;

 private:
  std::size_t index(int y, int x) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

// Dense row-major real matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}

  double& operator()(int r, int c) {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return data[static_cast<std::size_t>(r) * cols + c];
  }
};

// Attribution map aligned to an Image. Values are finite and non-negative.
struct SaliencyMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;
  std::string method;
  // Set only by per-box explainers (D-RISE).
  std::optional<BBox> target_box;

  SaliencyMap() = default;
  SaliencyMap(int h, int w, std::string method_name = {})
      : height(h),
        width(w),
        values(static_cast<std::size_t>(h) * w, 0.0),
        method(std::move(method_name)) {}

  double& at(int y, int x) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  double at(int y, int x) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

// Throws kInvalidArgument if a value is negative or not finite.
void ValidateSaliency(const SaliencyMap& map);

// A RISE-style random mask: the binary grid and its upsampled version.
struct Mask {
  Matrix grid;       // entries in {0, 1}
  Matrix upsampled;  // entries in [0, 1]
};

// Sub-cell shift applied before bilinear sampling, in grid-cell units.
struct GridOffset {
  double dy = 0.0;
  double dx = 0.0;
};

double Iou(const BBox& a, const BBox& b);

// Bilinear upsampling of a grid onto an out_h x out_w raster. With zero offset
// the first and last grid nodes land on the first and last output pixels
// (align-corners). A non-zero offset shifts every sample position by that many
// cells; positions beyond the last node clamp to the border.
Matrix BilinearUpsample(const Matrix& grid, int out_h, int out_w,
                        GridOffset offset = {});

// Otsu threshold on a 256-bin histogram of the min-max normalized values.
// The returned threshold is in the units of the input; binarize with
// value > threshold. Throws kDegenerateInput when all values are equal.
double OtsuThreshold(std::span<const double> values);

// Histogram bin of a value already normalized to [0, 1]. Bin t holds values in
// ((t)/256, (t+1)/256], with 0 in bin 0.
int OtsuBin(double normalized);

// Min-max scaling to [0, 1]. A constant map becomes all zeros.
SaliencyMap NormalizeMap(const SaliencyMap& map);

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples
};

// 256-entry blue -> cyan -> green -> yellow -> red lookup table.
const std::array<std::array<std::uint8_t, 3>, 256>& HeatmapColormap();

// Blends the colormapped normalized saliency over the grayscale image with
// alpha 0.5 and draws one-pixel box outlines in green.
RgbImage RenderHeatmapOverlay(const Image& image, const SaliencyMap& map,
                              std::span<const BBox> boxes);

}  // namespace detxplain

#endif  // DETXPLAIN_IMAGING_HPP_
