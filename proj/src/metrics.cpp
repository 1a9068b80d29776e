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

#include "detxplain/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include <spdlog/fmt/fmt.h>

#include "detxplain/error.hpp"
#include "detxplain/logging.hpp"
#include "detxplain/parallel.hpp"

namespace detxplain {

namespace {

std::vector<char> GtMask(std::span<const BBox> gt, int height, int width) {
  std::vector<char> inside(static_cast<std::size_t>(height) * width, 0);
  for (const auto& b : gt) {
    if (!IsValidBox(b, height, width)) {
      Fail(ErrorCode::kInvalidArgument, "ground-truth box outside the map");
    }
    for (int y = b.y1; y < b.y2; ++y) {
      std::fill_n(&inside[static_cast<std::size_t>(y) * width + b.x1], b.width(), 1);
    }
  }
  return inside;
}

}  // namespace

SaliencyMap MetricInput(const SaliencyMap& map) {
  SaliencyMap mag = map;
  for (double& v : mag.values) v = std::abs(v);
  ValidateSaliency(mag);
  return NormalizeMap(mag);
}

std::optional<double> Ebpg(const SaliencyMap& map, std::span<const BBox> gt) {
  if (gt.empty()) return std::nullopt;
  const SaliencyMap s = MetricInput(map);
  const auto inside = GtMask(gt, s.height, s.width);
  double in = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    total += s.values[i];
    if (inside[i]) in += s.values[i];
  }
  return total > 0.0 ? in / total : 0.0;
}

std::optional<BBox> ExplanationBox(const SaliencyMap& map) {
  const SaliencyMap s = MetricInput(map);
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  if (!(*hi > *lo)) return std::nullopt;
  const double t = OtsuThreshold(s.values);
  BBox box{s.width, s.height, 0, 0};
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      if (s.at(y, x) > t) {
        box.x1 = std::min(box.x1, x);
        box.y1 = std::min(box.y1, y);
        box.x2 = std::max(box.x2, x + 1);
        box.y2 = std::max(box.y2, y + 1);
      }
    }
  }
  if (box.x2 <= box.x1) return std::nullopt;
  return box;
}

std::optional<double> IouMetric(const SaliencyMap& map, std::span<const BBox> gt) {
  if (gt.empty()) return std::nullopt;
  GtMask(gt, map.height, map.width);
  const auto box = ExplanationBox(map);
  if (!box) {
    Log().warn("iou metric: saliency map is constant; scoring 0");
    return 0.0;
  }
  double sum = 0.0;
  for (const auto& g : gt) sum += Iou(*box, g);
  return sum / static_cast<double>(gt.size());
}

std::optional<double> BboxMetric(const SaliencyMap& map, std::span<const BBox> gt) {
  if (gt.empty()) return std::nullopt;
  const SaliencyMap s = MetricInput(map);
  const auto inside = GtMask(gt, s.height, s.width);
  const long n = std::count(inside.begin(), inside.end(), 1);
  std::vector<int> order(s.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return s.values[a] > s.values[b];
  });
  long hits = 0;
  for (long i = 0; i < n; ++i) hits += inside[order[i]];
  return static_cast<double>(hits) / static_cast<double>(n);
}

std::optional<DropIncrease> DropIncreaseMetric(const Detector& detector,
                                               const Image& image,
                                               const SaliencyMap& map) {
  if (map.height != image.height() || map.width != image.width()) {
    Fail(ErrorCode::kInvalidArgument, "saliency size does not match the image");
  }
  DropIncrease r;
  r.original = detector.ImageScore(image);
  if (!(r.original > 0.0)) return std::nullopt;
  const SaliencyMap s = MetricInput(map);
  std::vector<double> px(image.values().begin(), image.values().end());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] *= s.values[i];
  r.explained = detector.ImageScore(Image(image.height(), image.width(), std::move(px)));
  r.drop = std::max(0.0, r.original - r.explained) / r.original * 100.0;
  r.increased = r.explained > r.original;
  return r;
}

double BoxConfidence(const std::vector<Detection>& detections, const BBox& target) {
  double best = 0.0;
  for (const Detection& d : detections) best = std::max(best, Iou(d.box, target) * d.score);
  return best;
}

std::optional<DropIncrease> DropIncreaseMetric(const Detector& detector,
                                               const Image& image,
                                               const SaliencyMap& map,
                                               const BBox& target) {
  if (map.height != image.height() || map.width != image.width()) {
    Fail(ErrorCode::kInvalidArgument, "saliency size does not match the image");
  }
  DropIncrease r;
  r.original = BoxConfidence(detector.Detect(image), target);
  if (!(r.original > 0.0)) return std::nullopt;
  const SaliencyMap s = MetricInput(map);
  std::vector<double> px(image.values().begin(), image.values().end());
  for (std::size_t i = 0; i < px.size(); ++i) px[i] *= s.values[i];
  r.explained = BoxConfidence(
      detector.Detect(Image(image.height(), image.width(), std::move(px))), target);
  r.drop = std::max(0.0, r.original - r.explained) / r.original * 100.0;
  r.increased = r.explained > r.original;
  return r;
}

namespace {

bool Wants(const std::vector<std::string>& list, const std::string& name) {
  return std::find(list.begin(), list.end(), name) != list.end();
}

std::vector<MetricRow> EvaluateImage(const Dataset& dataset,
                                     const DatasetEntry& entry,
                                     const Detector& detector,
                                     const BenchmarkOptions& options) {
  const Image image = dataset.LoadImage(entry);
  const std::vector<Detection> detections = detector.Detect(image);
  MethodParams params = options.params;
  params.workers = 1;
  std::vector<MetricRow> rows;
  for (const auto& method : options.methods) {
    const MethodOutput out =
        RunMethod(method, image, detector, detections, params, false);
    MetricRow row;
    row.image_id = entry.id;
    row.method = method;
    row.status = StatusName(out.status);
    if (!out.maps.empty()) {
      const SaliencyMap& map = out.maps.front();
      row.seconds = out.seconds;
      if (Wants(options.metrics, "ebpg")) row.ebpg = Ebpg(map, entry.boxes);
      if (Wants(options.metrics, "iou")) row.iou = IouMetric(map, entry.boxes);
      if (Wants(options.metrics, "bbox")) row.bbox = BboxMetric(map, entry.boxes);
      if (Wants(options.metrics, "drop") || Wants(options.metrics, "increase")) {
        const auto di = options.drop_per_box && map.target_box
                            ? DropIncreaseMetric(detector, image, map, *map.target_box)
                            : DropIncreaseMetric(detector, image, map);
        if (di) {
          if (Wants(options.metrics, "drop")) row.drop = di->drop;
          if (Wants(options.metrics, "increase")) row.increase = di->increased;
        }
      }
      if (options.maps_dir) {
        WriteSal1(*options.maps_dir / (entry.id + "_" + method + ".sal"),
                  map.height, map.width, map.values);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

template <typename T>
void Accumulate(std::map<std::string, std::pair<double, int>>* acc,
                const std::string& key, const std::optional<T>& v, double scale) {
  if (!v) return;
  auto& [sum, n] = (*acc)[key];
  sum += static_cast<double>(*v) * scale;
  ++n;
}

std::string Cell(const std::optional<double>& v) {
  return v ? fmt::format("{:.9g}", *v) : std::string();
}

}  // namespace

MetricReport RunBenchmark(const Dataset& dataset, const Detector& detector,
                          const BenchmarkOptions& options) {
  for (const auto& m : options.methods) FindMethod(m);
  CheckMethodsSupported(options.methods, detector);
  for (const auto& m : options.metrics) {
    if (!Wants(AllMetrics(), m)) Fail(ErrorCode::kConfig, "unknown metric '" + m + "'");
  }
  const int n = static_cast<int>(dataset.entries.size());
  std::vector<std::vector<MetricRow>> per_image(n);
  ParallelFor(n, options.workers, [&](int i) {
    per_image[i] = EvaluateImage(dataset, dataset.entries[i], detector, options);
  });

  MetricReport report;
  std::map<std::string, std::map<std::string, std::pair<double, int>>> acc;
  for (auto& rows : per_image) {
    for (auto& row : rows) {
      auto& a = acc[row.method];
      Accumulate(&a, "ebpg", row.ebpg, 1.0);
      Accumulate(&a, "iou", row.iou, 1.0);
      Accumulate(&a, "bbox", row.bbox, 1.0);
      Accumulate(&a, "drop", row.drop, 1.0);
      Accumulate(&a, "increase", row.increase, 100.0);
      Accumulate(&a, "seconds", row.seconds, 1.0);
      report.rows.push_back(std::move(row));
    }
  }
  for (const auto& method : options.methods) {
    auto& out = report.aggregates[method];
    for (const auto& [metric, sum_n] : acc[method]) {
      out[metric] = sum_n.first / sum_n.second;
    }
  }
  return report;
}

std::string ReportCsv(const MetricReport& report) {
  std::string csv = "image_id,method,ebpg,iou,bbox,drop,increase,seconds\n";
  for (const auto& r : report.rows) {
    csv += fmt::format("{},{},{},{},{},{},{},{}\n", r.image_id, r.method,
                       Cell(r.ebpg), Cell(r.iou), Cell(r.bbox), Cell(r.drop),
                       r.increase ? (*r.increase ? "1" : "0") : "",
                       r.seconds ? fmt::format("{:.6f}", *r.seconds) : "");
  }
  return csv;
}

std::string ReportJson(const MetricReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [method, metrics] : report.aggregates) {
    auto& m = j[method];
    m = nlohmann::ordered_json::object();
    for (const auto& [metric, value] : metrics) m[metric] = value;
  }
  return j.dump(2) + "\n";
}

std::string ReportTable(const MetricReport& report) {
  std::string out = fmt::format("{:<10}", "metric");
  for (const auto& [method, _] : report.aggregates) out += fmt::format("{:>11}", method);
  out += "\n";
  for (const std::string metric :
       {"ebpg", "iou", "bbox", "drop", "increase", "seconds"}) {
    out += fmt::format("{:<10}", metric);
    for (const auto& [method, metrics] : report.aggregates) {
      const auto it = metrics.find(metric);
      out += it == metrics.end() ? fmt::format("{:>11}", "-")
                                 : fmt::format("{:>11.4f}", it->second);
    }
    out += "\n";
  }
  return out;
}

}  // namespace detxplain
