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

#ifndef DETXPLAIN_PERTURBATION_HPP_
#define DETXPLAIN_PERTURBATION_HPP_

// Black-box explainers: RISE, D-RISE and LIME (with SLIC superpixels and a
// LASSO surrogate).

#include <cstdint>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "detxplain/detectors.hpp"
#include "detxplain/imaging.hpp"

namespace detxplain {

struct RiseConfig {
  int n_masks = 500;
  int grid_size = 8;
  double keep_prob = 0.5;
  std::uint64_t seed = 0;
  int workers = 1;  // detector evaluations only; output is worker-independent
};

void ValidateRiseConfig(const RiseConfig& cfg);

// Binary grid plus the sub-cell shift used when upsampling it.
struct MaskSpec {
  Matrix grid;
  GridOffset offset;
};

// Draws grids row-major then the (dy, dx) offset, mask by mask, from one
// seeded stream.
std::vector<MaskSpec> GenerateMaskSpecs(const RiseConfig& cfg);
Matrix UpsampleMask(const MaskSpec& spec, int height, int width);
std::vector<Mask> GenerateMasks(const RiseConfig& cfg, int height, int width);

// image * mask, pixelwise.
Image ApplyMask(const Image& image, const Matrix& mask);

// sum_i weights[i] * mask_i / normalizer, accumulated in mask order.
SaliencyMap WeightedMaskSum(std::span<const MaskSpec> masks,
                            std::span<const double> weights, int height,
                            int width, double normalizer);

// Weight of a masked input = max final-detection score (0 without detections).
SaliencyMap Rise(const Image& image, const Detector& detector,
                 const RiseConfig& cfg);
SaliencyMap RiseWithMasks(const Image& image, const Detector& detector,
                          std::span<const MaskSpec> masks, const RiseConfig& cfg);

// Similarity between the explained detection and a detection on a masked
// input.
using DetectionSimilarity =
    std::function<double(const Detection& target, const Detection& candidate)>;
// iou(target, candidate) * candidate.score
double IouTimesScore(const Detection& target, const Detection& candidate);

SaliencyMap DRise(const Image& image, const Detector& detector,
                  const Detection& target, const RiseConfig& cfg,
                  const DetectionSimilarity& similarity = IouTimesScore);
SaliencyMap DRiseWithMasks(const Image& image, const Detector& detector,
                           const Detection& target,
                           std::span<const MaskSpec> masks,
                           const RiseConfig& cfg,
                           const DetectionSimilarity& similarity = IouTimesScore);

// SLIC superpixels. Labels are 0..k-1 and every segment is 4-connected.
struct Superpixels {
  int height = 0;
  int width = 0;
  std::vector<int> labels;
  int k = 0;
  double compactness = 0.0;

  int at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
};

// Initial centre lattice (rows x cols) used for a requested segment count.
struct SlicGrid {
  int rows = 0;
  int cols = 0;
};
SlicGrid ChooseSlicGrid(int height, int width, int k);

// SLIC in (intensity * 100, x, y) space: gradient-adjusted lattice centres,
// `iters` assignment/update rounds in a 2S window, then connectivity
// enforcement that merges fragments smaller than a quarter of the nominal
// segment area into a neighbour. Requires 2 <= k <= H*W/16.
Superpixels Slic(const Image& image, int k, double compactness, int iters);

struct SurrogateModel {
  std::vector<double> weights;  // one per segment
  double intercept = 0.0;
  std::set<int> selected;
  double lambda = 0.0;
};

// Weighted LASSO:
//   minimize 1/2 sum_i s_i (y_i - b - x_i.w)^2 + lambda * |w|_1
// solved by cyclic coordinate descent on the centred, sqrt(s)-scaled problem.
struct LassoProblem {
  Matrix x;                      // samples x features
  std::vector<double> y;
  std::vector<double> sample_weights;
};
SurrogateModel FitLasso(const LassoProblem& problem, double lambda);
// Smallest lambda (by bisection) whose solution has at most max_features
// non-zero weights.
SurrogateModel FitLassoMaxFeatures(const LassoProblem& problem, int max_features);
// Centred and scaled design used for the optimality conditions.
void LassoDesign(const LassoProblem& problem, Matrix* xs, std::vector<double>* ys);

struct LimeConfig {
  int n_segments = 40;
  double compactness = 10.0;
  int slic_iters = 10;
  int n_samples = 1000;
  int k_features = 5;
  double kernel_width = 0.25;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct LimeResult {
  SurrogateModel model;
  SaliencyMap map;
  Superpixels segments;
  bool degenerate = false;  // all labels equal; zero surrogate
};

// Occluded segments are filled with the image mean; labels are the
// detector's image score; samples are weighted by exp(-d^2 / width^2) with d
// the cosine distance to the all-ones vector (sample 0 is all ones).
LimeResult Lime(const Image& image, const Detector& detector,
                const LimeConfig& cfg);
LimeResult LimeWithSegments(const Image& image, const Detector& detector,
                            Superpixels segments, const LimeConfig& cfg);

}  // namespace detxplain

#endif  // DETXPLAIN_PERTURBATION_HPP_
