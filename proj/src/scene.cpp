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

#include "detxplain/scene.hpp"

#include <algorithm>
#include <cmath>

#include "detxplain/error.hpp"
#include "detxplain/random.hpp"

namespace detxplain {

std::uint64_t SplitSeed(std::uint64_t master, std::string_view stage,
                        std::uint64_t index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = master ^ h ^ (index * 0x9e3779b97f4a7c15ULL);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

constexpr double kBackground = 0.30;
constexpr double kNoduleLevel = 0.78;
constexpr double kHaloDepth = 0.12;
constexpr double kSpeckleAmplitude = 0.8;
constexpr int kPlacementRetries = 500;
constexpr int kMinGap = 6;

bool Separated(const BBox& a, const BBox& b) {
  return a.x2 + kMinGap <= b.x1 || b.x2 + kMinGap <= a.x1 ||
         a.y2 + kMinGap <= b.y1 || b.y2 + kMinGap <= a.y1;
}

}  // namespace

SyntheticScene GenerateScene(int height, int width, int n_nodules,
                             std::uint64_t seed) {
  if (height < 64 || width < 64) {
    Fail(ErrorCode::kInvalidArgument, "scene must be at least 64x64");
  }
  if (n_nodules < 0 || n_nodules > 3) {
    Fail(ErrorCode::kInvalidArgument, "n_nodules must be in [0, 3]");
  }
  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(height) * width;

  // Multiplicative speckle, box-filtered with edge replication.
  std::vector<double> raw(n);
  for (double& v : raw) v = 1.0 + kSpeckleAmplitude * (rng.Uniform() - 0.5);
  std::vector<double> speckle(n);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double s = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int yy = std::clamp(y + dy, 0, height - 1);
          const int xx = std::clamp(x + dx, 0, width - 1);
          s += raw[static_cast<std::size_t>(yy) * width + xx];
        }
      }
      speckle[static_cast<std::size_t>(y) * width + x] = s / 9.0;
    }
  }

  std::vector<double> tissue(n, kBackground);
  SyntheticScene scene;
  scene.seed = seed;
  int attempts = 0;
  while (static_cast<int>(scene.ground_truth.size()) < n_nodules) {
    if (++attempts > kPlacementRetries) {
      Fail(ErrorCode::kData, "scene generation: could not place nodules");
    }
    const double ax = rng.Uniform(9.0, 16.0);
    const double ay = ax * rng.Uniform(0.6, 1.0);
    const double cx = rng.Uniform(ax + 4.0, width - ax - 4.0);
    const double cy = rng.Uniform(ay + 4.0, height - ay - 4.0);
    const BBox box{static_cast<int>(std::floor(cx - ax)),
                   static_cast<int>(std::floor(cy - ay)),
                   static_cast<int>(std::ceil(cx + ax)),
                   static_cast<int>(std::ceil(cy + ay))};
    const bool clear = std::all_of(
        scene.ground_truth.begin(), scene.ground_truth.end(),
        [&](const BBox& other) { return Separated(box, other); });
    if (!clear) continue;
    scene.ground_truth.push_back(box);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double u = (x + 0.5 - cx) / ax;
        const double v = (y + 0.5 - cy) / ay;
        const double t = std::sqrt(u * u + v * v);
        if (t > 1.5) continue;
        const double core = std::clamp((1.1 - t) / 0.25, 0.0, 1.0);
        const double halo =
            std::clamp(1.0 - std::abs(t - 1.2) / 0.2, 0.0, 1.0);
        double& px = tissue[static_cast<std::size_t>(y) * width + x];
        px += core * (kNoduleLevel - px) - halo * kHaloDepth * (1.0 - core);
      }
    }
  }

  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    data[i] = std::clamp(tissue[i] * speckle[i], 0.0, 1.0);
  }
  scene.image = Image(height, width, std::move(data));
  return scene;
}

}  // namespace detxplain
