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

#include "detxplain/error.hpp"
#include "detxplain/logging.hpp"
#include "detxplain/parallel.hpp"
#include "detxplain/perturbation.hpp"
#include "detxplain/random.hpp"

namespace detxplain {

namespace {

void ValidateLimeConfig(const LimeConfig& cfg) {
  if (cfg.k_features < 1) {
    Fail(ErrorCode::kInvalidArgument, "k_features must be at least 1");
  }
  if (cfg.n_samples < 10 * cfg.k_features) {
    Fail(ErrorCode::kInvalidArgument,
         "n_samples must be at least 10 * k_features");
  }
  if (!(cfg.kernel_width > 0.0)) {
    Fail(ErrorCode::kInvalidArgument, "kernel_width must be positive");
  }
}

Image Occlude(const Image& image, const Superpixels& segments,
              const double* keep, double fill) {
  std::vector<double> out(image.values().begin(), image.values().end());
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (keep[segments.labels[p]] == 0.0) out[p] = fill;
  }
  return Image(image.height(), image.width(), std::move(out));
}

}  // namespace

LimeResult LimeWithSegments(const Image& image, const Detector& detector,
                            Superpixels segments, const LimeConfig& cfg) {
  ValidateLimeConfig(cfg);
  if (segments.height != image.height() || segments.width != image.width()) {
    Fail(ErrorCode::kInvalidArgument, "segments do not match the image");
  }
  const int k = segments.k;
  const int n = cfg.n_samples;

  LassoProblem problem;
  problem.x = Matrix(n, k, 1.0);
  problem.y.assign(n, 0.0);
  problem.sample_weights.assign(n, 0.0);
  Rng rng(SplitSeed(cfg.seed, "lime-samples"));
  for (int i = 1; i < n; ++i) {
    for (int j = 0; j < k; ++j) problem.x(i, j) = rng.Bernoulli(0.5) ? 1.0 : 0.0;
  }
  for (int i = 0; i < n; ++i) {
    int on = 0;
    for (int j = 0; j < k; ++j) on += problem.x(i, j) != 0.0;
    // Cosine distance to the all-ones vector; an empty sample is orthogonal.
    const double d = on == 0 ? 1.0 : 1.0 - std::sqrt(static_cast<double>(on) / k);
    problem.sample_weights[i] =
        std::exp(-d * d / (cfg.kernel_width * cfg.kernel_width));
  }
  const double fill = image.Mean();
  ParallelFor(n, cfg.workers, [&](int i) {
    problem.y[i] = detector.ImageScore(
        Occlude(image, segments, &problem.x.data[static_cast<std::size_t>(i) * k],
                fill));
  });

  LimeResult result;
  const auto [lo, hi] = std::minmax_element(problem.y.begin(), problem.y.end());
  if (*hi - *lo <= 1e-12) {
    Log().warn("lime: all {} labels equal {:.6f}; surrogate is zero", n, *lo);
    result.degenerate = true;
    result.model.weights.assign(k, 0.0);
    result.model.intercept = *lo;
  } else {
    result.model = FitLassoMaxFeatures(problem, cfg.k_features);
  }

  result.map = SaliencyMap(image.height(), image.width(), "lime");
  for (std::size_t p = 0; p < result.map.values.size(); ++p) {
    const double w = result.model.weights[segments.labels[p]];
    result.map.values[p] = std::max(0.0, w);
  }
  result.segments = std::move(segments);
  return result;
}

LimeResult Lime(const Image& image, const Detector& detector,
                const LimeConfig& cfg) {
  ValidateLimeConfig(cfg);
  Superpixels segments =
      Slic(image, cfg.n_segments, cfg.compactness, cfg.slic_iters);
  return LimeWithSegments(image, detector, std::move(segments), cfg);
}

}  // namespace detxplain
