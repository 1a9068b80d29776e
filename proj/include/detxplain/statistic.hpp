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

#ifndef DETXPLAIN_STATISTIC_HPP_
#define DETXPLAIN_STATISTIC_HPP_

// Stage-1 explainers: a Gaussian KDE over proposal centres graded by PCKDE,
// and the proposal-count density map.

#include <optional>
#include <span>
#include <vector>

#include "detxplain/detectors.hpp"
#include "detxplain/imaging.hpp"

namespace detxplain {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct KdeModel {
  std::vector<Point> centers;
  double bandwidth = 1.0;  // pixels
};

// Smallest bandwidth the automatic rule will return.
inline constexpr double kMinBandwidth = 0.5;

// 1.06 * mean(sd_x, sd_y) * n^(-1/5), floored at kMinBandwidth. Sample
// standard deviations use n - 1 (0 for a single centre).
double SilvermanBandwidth(std::span<const Point> centers);

// Centres are box midpoints. Without a bandwidth the automatic rule is used.
// Throws kInvalidArgument for no proposals or a non-positive bandwidth.
KdeModel FitKde(const ProposalSet& proposals,
                std::optional<double> bandwidth = std::nullopt);

// p(b) = 1 / (n h^2) * sum_i K2((B_i - b) / h), K2 the standard bivariate
// Gaussian, by direct summation.
double KdeAt(const KdeModel& model, Point b);
// log p(b), computed with a log-sum-exp so it never underflows.
double KdeLogAt(const KdeModel& model, Point b);

struct DensityEstimate {
  Matrix grid;        // rows = image height; evaluated at pixel centres
  int argmax_x = 0;   // pixel holding the first maximum in row-major order
  int argmax_y = 0;
  double argmax_value = 0.0;

  Point argmax_point() const { return {argmax_x + 0.5, argmax_y + 0.5}; }
};

DensityEstimate KdeDensity(const KdeModel& model, int height, int width);

struct PckdeResult {
  double score = 0.0;
  bool consistent = false;  // score > 0.5
  Point detected_center;    // centre of the final box
  Point argmax;             // pixel centre of the density maximum
};

inline constexpr double kPckdeThreshold = 0.5;
// A detection is consistent when its score strictly exceeds the threshold.
inline bool PckdeConsistent(double score) { return score > kPckdeThreshold; }

// Density at the centre of the pixel containing the detected centre divided
// by the grid maximum. The ratio is formed from log densities, so a far-off
// detection yields a tiny positive score rather than 0/0; the result lies in
// (0, 1]. With log_space the score is log p(argmax) / log p(detected), which
// requires both densities below 1. Throws kDegenerateInput when the maximum
// density is zero.
PckdeResult Pckde(const KdeModel& model, const DensityEstimate& estimate,
                  const Detection& final_detection, bool log_space = false);

struct DensityMapResult {
  int height = 0;
  int width = 0;
  std::vector<long> counts;  // row-major
  long max_count = 0;

  long at(int y, int x) const {
    return counts[static_cast<std::size_t>(y) * width + x];
  }
};

// Number of proposal boxes containing each pixel. Throws kInvalidArgument for
// a box outside the image.
DensityMapResult DensityMap(std::span<const BBox> boxes, int height, int width);
DensityMapResult DensityMap(const ProposalSet& proposals, int height, int width);

SaliencyMap KdeSaliency(const DensityEstimate& estimate);
SaliencyMap DensityMapSaliency(const DensityMapResult& dm);

struct BandMass {
  double border = 0.0;    // fraction of the mass within the border band
  double interior = 0.0;  // the rest; both 0 for a map without mass
};

// Mass split between pixels closer than `band` to an image edge and the rest.
BandMass BorderBandMass(const SaliencyMap& map, int band);

inline constexpr int kDefaultBorderBand = 16;

struct NegativeCaseReport {
  bool no_detection = false;
  int proposal_count = 0;
  SaliencyMap kde;
  SaliencyMap dm;
  BandMass kde_mass;
  BandMass dm_mass;
  int band = kDefaultBorderBand;
};

NegativeCaseReport NegativeCase(const ProposalSet& proposals,
                                std::span<const Detection> detections,
                                const DensityEstimate& estimate,
                                const DensityMapResult& dm,
                                int band = kDefaultBorderBand);

}  // namespace detxplain

#endif  // DETXPLAIN_STATISTIC_HPP_
