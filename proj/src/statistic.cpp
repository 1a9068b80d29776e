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

#include "detxplain/statistic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "detxplain/error.hpp"

namespace detxplain {

namespace {

double SampleSd(std::span<const Point> pts, double Point::*axis) {
  if (pts.size() < 2) return 0.0;
  double mean = 0.0;
  for (const auto& p : pts) mean += p.*axis;
  mean /= static_cast<double>(pts.size());
  double ss = 0.0;
  for (const auto& p : pts) ss += (p.*axis - mean) * (p.*axis - mean);
  return std::sqrt(ss / static_cast<double>(pts.size() - 1));
}

void CheckModel(const KdeModel& model) {
  if (model.centers.empty()) {
    Fail(ErrorCode::kInvalidArgument, "KDE model has no centres");
  }
  if (!(model.bandwidth > 0.0) || !std::isfinite(model.bandwidth)) {
    Fail(ErrorCode::kInvalidArgument, "KDE bandwidth must be positive");
  }
}

}  // namespace

double SilvermanBandwidth(std::span<const Point> centers) {
  if (centers.empty()) {
    Fail(ErrorCode::kInvalidArgument, "bandwidth needs at least one centre");
  }
  const double sd = 0.5 * (SampleSd(centers, &Point::x) + SampleSd(centers, &Point::y));
  const double h =
      1.06 * sd * std::pow(static_cast<double>(centers.size()), -0.2);
  return std::max(h, kMinBandwidth);
}

KdeModel FitKde(const ProposalSet& proposals, std::optional<double> bandwidth) {
  if (proposals.proposals.empty()) {
    Fail(ErrorCode::kInvalidArgument, "KDE needs at least one proposal");
  }
  KdeModel model;
  for (const auto& p : proposals.proposals) {
    model.centers.push_back({p.box.center_x(), p.box.center_y()});
  }
  model.bandwidth = bandwidth ? *bandwidth : SilvermanBandwidth(model.centers);
  CheckModel(model);
  return model;
}

double KdeAt(const KdeModel& model, Point b) {
  CheckModel(model);
  const double h = model.bandwidth;
  double sum = 0.0;
  for (const auto& c : model.centers) {
    const double dx = (c.x - b.x) / h;
    const double dy = (c.y - b.y) / h;
    sum += std::exp(-0.5 * (dx * dx + dy * dy));
  }
  const double n = static_cast<double>(model.centers.size());
  return sum / (2.0 * std::numbers::pi * n * h * h);
}

double KdeLogAt(const KdeModel& model, Point b) {
  CheckModel(model);
  const double h = model.bandwidth;
  std::vector<double> e;
  e.reserve(model.centers.size());
  double top = -std::numeric_limits<double>::infinity();
  for (const auto& c : model.centers) {
    const double dx = (c.x - b.x) / h;
    const double dy = (c.y - b.y) / h;
    e.push_back(-0.5 * (dx * dx + dy * dy));
    top = std::max(top, e.back());
  }
  double sum = 0.0;
  for (double v : e) sum += std::exp(v - top);
  const double n = static_cast<double>(model.centers.size());
  return top + std::log(sum) - std::log(2.0 * std::numbers::pi * n * h * h);
}

DensityEstimate KdeDensity(const KdeModel& model, int height, int width) {
  CheckModel(model);
  if (height <= 0 || width <= 0) {
    Fail(ErrorCode::kInvalidArgument, "KDE grid size must be positive");
  }
  const double h = model.bandwidth;
  const std::size_t n = model.centers.size();
  // The bivariate kernel factorizes, so the grid is a sum of outer products.
  Matrix ex(static_cast<int>(n), width);
  Matrix ey(static_cast<int>(n), height);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = model.centers[i];
    for (int x = 0; x < width; ++x) {
      const double d = (x + 0.5 - c.x) / h;
      ex(static_cast<int>(i), x) = std::exp(-0.5 * d * d);
    }
    for (int y = 0; y < height; ++y) {
      const double d = (y + 0.5 - c.y) / h;
      ey(static_cast<int>(i), y) = std::exp(-0.5 * d * d);
    }
  }
  const double norm = 1.0 / (2.0 * std::numbers::pi * static_cast<double>(n) * h * h);
  DensityEstimate est;
  est.grid = Matrix(height, width);
  for (int y = 0; y < height; ++y) {
    double* row = &est.grid.data[static_cast<std::size_t>(y) * width];
    for (std::size_t i = 0; i < n; ++i) {
      const double a = ey(static_cast<int>(i), y);
      if (a == 0.0) continue;
      const double* e = &ex.data[i * width];
      for (int x = 0; x < width; ++x) row[x] += a * e[x];
    }
    for (int x = 0; x < width; ++x) row[x] *= norm;
  }
  const auto it = std::max_element(est.grid.data.begin(), est.grid.data.end());
  const auto idx = static_cast<int>(it - est.grid.data.begin());
  est.argmax_y = idx / width;
  est.argmax_x = idx % width;
  est.argmax_value = *it;
  return est;
}

PckdeResult Pckde(const KdeModel& model, const DensityEstimate& estimate,
                  const Detection& final_detection, bool log_space) {
  if (!(estimate.argmax_value > 0.0)) {
    Fail(ErrorCode::kDegenerateInput,
         "PCKDE: the density maximum is zero; cannot grade");
  }
  PckdeResult r;
  r.detected_center = {final_detection.box.center_x(),
                       final_detection.box.center_y()};
  r.argmax = estimate.argmax_point();
  const int px = std::clamp(static_cast<int>(std::floor(r.detected_center.x)), 0,
                            estimate.grid.cols - 1);
  const int py = std::clamp(static_cast<int>(std::floor(r.detected_center.y)), 0,
                            estimate.grid.rows - 1);
  if (px == estimate.argmax_x && py == estimate.argmax_y) {
    r.score = 1.0;
  } else {
    const double log_det = KdeLogAt(model, {px + 0.5, py + 0.5});
    const double log_max = KdeLogAt(model, r.argmax);
    if (log_space) {
      if (!(log_det < 0.0 && log_max < 0.0)) {
        Fail(ErrorCode::kDegenerateInput,
             "PCKDE log-space score needs densities below 1");
      }
      r.score = log_max / log_det;
    } else {
      r.score = std::exp(log_det - log_max);
    }
    r.score = std::clamp(r.score, std::numeric_limits<double>::denorm_min(), 1.0);
  }
  r.consistent = PckdeConsistent(r.score);
  return r;
}

DensityMapResult DensityMap(std::span<const BBox> boxes, int height, int width) {
  if (height <= 0 || width <= 0) {
    Fail(ErrorCode::kInvalidArgument, "density map size must be positive");
  }
  // 2D difference array: +1 at the top-left corner, -1 past each edge.
  std::vector<long> diff(static_cast<std::size_t>(height + 1) * (width + 1), 0);
  auto d = [&](int y, int x) -> long& {
    return diff[static_cast<std::size_t>(y) * (width + 1) + x];
  };
  for (const auto& b : boxes) {
    if (!IsValidBox(b, height, width)) {
      Fail(ErrorCode::kInvalidArgument, "density map: box outside the image");
    }
    ++d(b.y1, b.x1);
    --d(b.y1, b.x2);
    --d(b.y2, b.x1);
    ++d(b.y2, b.x2);
  }
  DensityMapResult dm;
  dm.height = height;
  dm.width = width;
  dm.counts.assign(static_cast<std::size_t>(height) * width, 0);
  std::vector<long> col(width + 1, 0);
  for (int y = 0; y < height; ++y) {
    long run = 0;
    for (int x = 0; x < width; ++x) {
      col[x] += d(y, x);
      run += col[x];
      dm.counts[static_cast<std::size_t>(y) * width + x] = run;
      dm.max_count = std::max(dm.max_count, run);
    }
  }
  return dm;
}

DensityMapResult DensityMap(const ProposalSet& proposals, int height, int width) {
  std::vector<BBox> boxes;
  boxes.reserve(proposals.proposals.size());
  for (const auto& p : proposals.proposals) boxes.push_back(p.box);
  return DensityMap(boxes, height, width);
}

SaliencyMap KdeSaliency(const DensityEstimate& estimate) {
  SaliencyMap map(estimate.grid.rows, estimate.grid.cols, "kde");
  map.values = estimate.grid.data;
  return map;
}

SaliencyMap DensityMapSaliency(const DensityMapResult& dm) {
  SaliencyMap map(dm.height, dm.width, "dm");
  std::transform(dm.counts.begin(), dm.counts.end(), map.values.begin(),
                 [](long c) { return static_cast<double>(c); });
  return map;
}

BandMass BorderBandMass(const SaliencyMap& map, int band) {
  if (band < 0) {
    Fail(ErrorCode::kInvalidArgument, "border band must be non-negative");
  }
  double border = 0.0;
  double total = 0.0;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const double v = std::abs(map.at(y, x));
      total += v;
      const int edge = std::min({y, x, map.height - 1 - y, map.width - 1 - x});
      if (edge < band) border += v;
    }
  }
  BandMass m;
  if (total > 0.0) {
    m.border = border / total;
    m.interior = 1.0 - m.border;
  }
  return m;
}

NegativeCaseReport NegativeCase(const ProposalSet& proposals,
                                std::span<const Detection> detections,
                                const DensityEstimate& estimate,
                                const DensityMapResult& dm, int band) {
  NegativeCaseReport r;
  r.no_detection = detections.empty();
  r.proposal_count = proposals.count();
  r.kde = KdeSaliency(estimate);
  r.dm = DensityMapSaliency(dm);
  r.kde_mass = BorderBandMass(r.kde, band);
  r.dm_mass = BorderBandMass(r.dm, band);
  r.band = band;
  return r;
}

}  // namespace detxplain
