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

#ifndef DETXPLAIN_METRICS_HPP_
#define DETXPLAIN_METRICS_HPP_

// Plausibility (EBPG, IoU, Bbox) and faithfulness (Drop, Increase) metrics
// and the dataset benchmark.

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detxplain/explain.hpp"
#include "detxplain/io.hpp"

namespace detxplain {

// Metrics read |s| rescaled to [0, 1]; signed relevance maps enter by
// magnitude.
SaliencyMap MetricInput(const SaliencyMap& map);

// Energy inside the union of the GT boxes over the total energy; 0 without
// energy. Absent (nullopt) without GT boxes.
std::optional<double> Ebpg(const SaliencyMap& map, std::span<const BBox> gt);

// Tight box around the pixels above the Otsu threshold of the map.
std::optional<BBox> ExplanationBox(const SaliencyMap& map);
// Mean IoU of the explanation box with each GT box; 0 (with a warning) for a
// constant map.
std::optional<double> IouMetric(const SaliencyMap& map, std::span<const BBox> gt);
// Share of the N most salient pixels inside the GT union, N = |GT union|.
// Ties go to the lower row-major index.
std::optional<double> BboxMetric(const SaliencyMap& map, std::span<const BBox> gt);

struct DropIncrease {
  double original = 0.0;   // y
  double explained = 0.0;  // o
  double drop = 0.0;       // max(0, y - o) / y * 100
  bool increased = false;  // o > y
};

// Scores image * normalize(s) against the image. Absent when y = 0.
std::optional<DropIncrease> DropIncreaseMetric(const Detector& detector,
                                               const Image& image,
                                               const SaliencyMap& map);

// Per-box confidence: max over detections of IoU(detection, target) * score.
double BoxConfidence(const std::vector<Detection>& detections, const BBox& target);

// Drop and Increase on the per-box confidence of `target` instead of the
// image score. Absent when the original confidence is 0.
std::optional<DropIncrease> DropIncreaseMetric(const Detector& detector,
                                               const Image& image,
                                               const SaliencyMap& map,
                                               const BBox& target);

inline const std::vector<std::string>& AllMetrics() {
  static const std::vector<std::string> metrics = {"ebpg", "iou", "bbox", "drop",
                                                   "increase"};
  return metrics;
}

struct MetricRow {
  std::string image_id;
  std::string method;
  std::string status;
  std::optional<double> ebpg;
  std::optional<double> iou;
  std::optional<double> bbox;
  std::optional<double> drop;
  std::optional<bool> increase;
  std::optional<double> seconds;
};

struct MetricReport {
  std::vector<MetricRow> rows;  // dataset order, then method order
  // method -> metric -> mean over rows where present; increase and drop in %.
  std::map<std::string, std::map<std::string, double>> aggregates;
};

struct BenchmarkOptions {
  std::vector<std::string> methods;
  std::vector<std::string> metrics = AllMetrics();
  MethodParams params;
  int workers = 1;  // images evaluated concurrently
  bool drop_per_box = false;  // D-RISE maps use their target box confidence
  // When set, one SAL1 file per (image, method) is written here.
  std::optional<std::filesystem::path> maps_dir;
};

MetricReport RunBenchmark(const Dataset& dataset, const Detector& detector,
                          const BenchmarkOptions& options);

// Header image_id,method,ebpg,iou,bbox,drop,increase,seconds; absent values
// are empty cells.
std::string ReportCsv(const MetricReport& report);
std::string ReportJson(const MetricReport& report);
// Plain-text table of the aggregates.
std::string ReportTable(const MetricReport& report);

}  // namespace detxplain

#endif  // DETXPLAIN_METRICS_HPP_
