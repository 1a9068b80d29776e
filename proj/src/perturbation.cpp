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

#include "detxplain/perturbation.hpp"

#include <algorithm>

#include "detxplain/error.hpp"
#include "detxplain/parallel.hpp"
#include "detxplain/random.hpp"

namespace detxplain {

void ValidateRiseConfig(const RiseConfig& cfg) {
  if (cfg.n_masks < 1) {
    Fail(ErrorCode::kInvalidArgument, "n_masks must be at least 1");
  }
  if (cfg.grid_size < 2) {
    Fail(ErrorCode::kInvalidArgument, "grid_size must be at least 2");
  }
  if (!(cfg.keep_prob > 0.0 && cfg.keep_prob < 1.0)) {
    Fail(ErrorCode::kInvalidArgument, "keep_prob must lie in (0, 1)");
  }
}

std::vector<MaskSpec> GenerateMaskSpecs(const RiseConfig& cfg) {
  ValidateRiseConfig(cfg);
  Rng rng(SplitSeed(cfg.seed, "rise-masks"));
  std::vector<MaskSpec> specs(cfg.n_masks);
  for (auto& spec : specs) {
    spec.grid = Matrix(cfg.grid_size, cfg.grid_size);
    for (double& bit : spec.grid.data) {
      bit = rng.Bernoulli(cfg.keep_prob) ? 1.0 : 0.0;
    }
    spec.offset.dy = rng.Uniform();
    spec.offset.dx = rng.Uniform();
  }
  return specs;
}

Matrix UpsampleMask(const MaskSpec& spec, int height, int width) {
  return BilinearUpsample(spec.grid, height, width, spec.offset);
}

std::vector<Mask> GenerateMasks(const RiseConfig& cfg, int height, int width) {
  std::vector<Mask> masks;
  for (auto& spec : GenerateMaskSpecs(cfg)) {
    Matrix up = UpsampleMask(spec, height, width);
    masks.push_back({std::move(spec.grid), std::move(up)});
  }
  return masks;
}

Image ApplyMask(const Image& image, const Matrix& mask) {
  if (mask.rows != image.height() || mask.cols != image.width()) {
    Fail(ErrorCode::kInvalidArgument, "mask size does not match the image");
  }
  std::vector<double> out(image.values().begin(), image.values().end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = std::clamp(out[i] * mask.data[i], 0.0, 1.0);
  }
  return Image(image.height(), image.width(), std::move(out));
}

SaliencyMap WeightedMaskSum(std::span<const MaskSpec> masks,
                            std::span<const double> weights, int height,
                            int width, double normalizer) {
  if (masks.size() != weights.size()) {
    Fail(ErrorCode::kInvalidArgument, "one weight per mask is required");
  }
  SaliencyMap map(height, width);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (weights[i] == 0.0) continue;
    const Matrix up = UpsampleMask(masks[i], height, width);
    for (std::size_t p = 0; p < map.values.size(); ++p) {
      map.values[p] += weights[i] * up.data[p];
    }
  }
  for (double& v : map.values) v /= normalizer;
  return map;
}

namespace {

template <typename WeightFn>
std::vector<double> MaskWeights(const Image& image,
                                std::span<const MaskSpec> masks, int workers,
                                WeightFn&& weight) {
  std::vector<double> weights(masks.size(), 0.0);
  ParallelFor(static_cast<int>(masks.size()), workers, [&](int i) {
    const Matrix up = UpsampleMask(masks[i], image.height(), image.width());
    weights[i] = weight(ApplyMask(image, up));
  });
  return weights;
}

}  // namespace

SaliencyMap RiseWithMasks(const Image& image, const Detector& detector,
                          std::span<const MaskSpec> masks,
                          const RiseConfig& cfg) {
  ValidateRiseConfig(cfg);
  const auto weights =
      MaskWeights(image, masks, cfg.workers, [&](const Image& masked) {
        const auto dets = detector.Detect(masked);
        return dets.empty() ? 0.0 : dets.front().score;
      });
  SaliencyMap map =
      WeightedMaskSum(masks, weights, image.height(), image.width(),
                      static_cast<double>(masks.size()) * cfg.keep_prob);
  map.method = "rise";
  return map;
}

SaliencyMap Rise(const Image& image, const Detector& detector,
                 const RiseConfig& cfg) {
  const auto masks = GenerateMaskSpecs(cfg);
  return RiseWithMasks(image, detector, masks, cfg);
}

double IouTimesScore(const Detection& target, const Detection& candidate) {
  return Iou(target.box, candidate.box) * candidate.score;
}

SaliencyMap DRiseWithMasks(const Image& image, const Detector& detector,
                           const Detection& target,
                           std::span<const MaskSpec> masks,
                           const RiseConfig& cfg,
                           const DetectionSimilarity& similarity) {
  ValidateRiseConfig(cfg);
  if (!IsValidBox(target.box, image.height(), image.width())) {
    Fail(ErrorCode::kInvalidArgument, "D-RISE target box is outside the image");
  }
  const auto weights =
      MaskWeights(image, masks, cfg.workers, [&](const Image& masked) {
        double best = 0.0;
        for (const auto& d : detector.Detect(masked)) {
          best = std::max(best, similarity(target, d));
        }
        return best;
      });
  SaliencyMap map =
      WeightedMaskSum(masks, weights, image.height(), image.width(),
                      static_cast<double>(masks.size()) * cfg.keep_prob);
  map.method = "drise";
  map.target_box = target.box;
  return map;
}

SaliencyMap DRise(const Image& image, const Detector& detector,
                  const Detection& target, const RiseConfig& cfg,
                  const DetectionSimilarity& similarity) {
  const auto masks = GenerateMaskSpecs(cfg);
  return DRiseWithMasks(image, detector, target, masks, cfg, similarity);
}

}  // namespace detxplain
