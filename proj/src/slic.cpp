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

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "detxplain/error.hpp"
#include "detxplain/perturbation.hpp"

namespace detxplain {

namespace {

constexpr double kIntensityScale = 100.0;

struct Center {
  double y = 0.0;  // pixel-centre coordinates
  double x = 0.0;
  double v = 0.0;
};

double GradientAt(const Image& image, int y, int x) {
  const int h = image.height();
  const int w = image.width();
  const double gx = image.at(y, std::min(x + 1, w - 1)) -
                    image.at(y, std::max(x - 1, 0));
  const double gy = image.at(std::min(y + 1, h - 1), x) -
                    image.at(std::max(y - 1, 0), x);
  return gx * gx + gy * gy;
}

// Relabels 4-connected components; components smaller than min_size join the
// segment of the already visited pixel left of or above their first pixel.
std::vector<int> EnforceConnectivity(const std::vector<int>& labels, int h,
                                     int w, long min_size, int* count) {
  std::vector<int> out(labels.size(), -1);
  std::vector<int> stack;
  std::vector<int> component;
  int next = 0;
  for (int start = 0; start < h * w; ++start) {
    if (out[start] >= 0) continue;
    const int old = labels[start];
    component.clear();
    stack.assign(1, start);
    out[start] = next;
    while (!stack.empty()) {
      const int p = stack.back();
      stack.pop_back();
      component.push_back(p);
      const int y = p / w;
      const int x = p % w;
      const int nbrs[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[0] >= h || n[1] < 0 || n[1] >= w) continue;
        const int q = n[0] * w + n[1];
        if (out[q] < 0 && labels[q] == old) {
          out[q] = next;
          stack.push_back(q);
        }
      }
    }
    int adjacent = -1;
    if (start % w > 0) {
      adjacent = out[start - 1];
    } else if (start >= w) {
      adjacent = out[start - w];
    }
    if (static_cast<long>(component.size()) < min_size && adjacent >= 0) {
      for (int p : component) out[p] = adjacent;
    } else {
      ++next;
    }
  }
  *count = next;
  return out;
}

}  // namespace

SlicGrid ChooseSlicGrid(int height, int width, int k) {
  SlicGrid best;
  double best_aspect = std::numeric_limits<double>::infinity();
  int best_gap = std::numeric_limits<int>::max();
  for (int rows = 1; rows <= k; ++rows) {
    for (int cols : {k / rows, k / rows + 1}) {
      if (cols < 1 || rows > height || cols > width) continue;
      const int gap = std::abs(rows * cols - k);
      const double aspect = std::abs(
          std::log((static_cast<double>(width) / cols) /
                   (static_cast<double>(height) / rows)));
      if (gap < best_gap || (gap == best_gap && aspect < best_aspect - 1e-12)) {
        best = {rows, cols};
        best_gap = gap;
        best_aspect = aspect;
      }
    }
  }
  return best;
}

Superpixels Slic(const Image& image, int k, double compactness, int iters) {
  const int h = image.height();
  const int w = image.width();
  if (k < 2 || static_cast<long>(k) * 16 > static_cast<long>(h) * w) {
    Fail(ErrorCode::kInvalidArgument,
         "SLIC segment count must lie in [2, H*W/16]");
  }
  if (compactness <= 0.0 || iters < 1) {
    Fail(ErrorCode::kInvalidArgument,
         "SLIC needs positive compactness and at least one iteration");
  }
  const SlicGrid grid = ChooseSlicGrid(h, w, k);
  const double step_y = static_cast<double>(h) / grid.rows;
  const double step_x = static_cast<double>(w) / grid.cols;
  const double s = std::sqrt(static_cast<double>(h) * w / k);

  std::vector<Center> centers;
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      Center ctr{(r + 0.5) * step_y, (c + 0.5) * step_x, 0.0};
      const int py = std::min(static_cast<int>(ctr.y), h - 1);
      const int px = std::min(static_cast<int>(ctr.x), w - 1);
      double best = GradientAt(image, py, px);
      int by = py;
      int bx = px;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int y = py + dy;
          const int x = px + dx;
          if (y < 0 || y >= h || x < 0 || x >= w) continue;
          const double g = GradientAt(image, y, x);
          if (g < best) {
            best = g;
            by = y;
            bx = x;
          }
        }
      }
      if (by != py || bx != px) {
        ctr.y = by + 0.5;
        ctr.x = bx + 0.5;
      }
      ctr.v = kIntensityScale * image.at(by, bx);
      centers.push_back(ctr);
    }
  }

  const double spatial = (compactness / s) * (compactness / s);
  const int reach = static_cast<int>(std::ceil(2.0 * std::max({s, step_y, step_x})));
  std::vector<int> labels(static_cast<std::size_t>(h) * w, -1);
  std::vector<double> dist(labels.size());
  for (int it = 0; it < iters; ++it) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (int ci = 0; ci < static_cast<int>(centers.size()); ++ci) {
      const Center& ctr = centers[ci];
      const int y0 = std::max(0, static_cast<int>(ctr.y) - reach);
      const int y1 = std::min(h, static_cast<int>(ctr.y) + reach + 1);
      const int x0 = std::max(0, static_cast<int>(ctr.x) - reach);
      const int x1 = std::min(w, static_cast<int>(ctr.x) + reach + 1);
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const double dv = kIntensityScale * image.at(y, x) - ctr.v;
          const double dy = y + 0.5 - ctr.y;
          const double dx = x + 0.5 - ctr.x;
          const double d = dv * dv + spatial * (dy * dy + dx * dx);
          const std::size_t p = static_cast<std::size_t>(y) * w + x;
          if (d < dist[p]) {
            dist[p] = d;
            labels[p] = ci;
          }
        }
      }
    }
    std::vector<Center> sums(centers.size());
    std::vector<long> counts(centers.size(), 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int l = labels[static_cast<std::size_t>(y) * w + x];
        if (l < 0) continue;
        sums[l].y += y + 0.5;
        sums[l].x += x + 0.5;
        sums[l].v += kIntensityScale * image.at(y, x);
        ++counts[l];
      }
    }
    for (std::size_t i = 0; i < centers.size(); ++i) {
      if (counts[i] == 0) continue;
      centers[i] = {sums[i].y / counts[i], sums[i].x / counts[i],
                    sums[i].v / counts[i]};
    }
  }
  // Pixels no window reached go to the spatially nearest centre.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int& l = labels[static_cast<std::size_t>(y) * w + x];
      if (l >= 0) continue;
      double best = std::numeric_limits<double>::infinity();
      for (int ci = 0; ci < static_cast<int>(centers.size()); ++ci) {
        const double dy = y + 0.5 - centers[ci].y;
        const double dx = x + 0.5 - centers[ci].x;
        if (dy * dy + dx * dx < best) {
          best = dy * dy + dx * dx;
          l = ci;
        }
      }
    }
  }

  Superpixels out;
  out.height = h;
  out.width = w;
  out.compactness = compactness;
  const long min_size = static_cast<long>(h) * w / k / 4;
  out.labels = EnforceConnectivity(labels, h, w, min_size, &out.k);
  return out;
}

}  // namespace detxplain
