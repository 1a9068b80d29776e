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

#include "detxplain/harness.hpp"

#include <unistd.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <map>

#include "json.hpp"
#include <spdlog/fmt/fmt.h>

#include "detxplain/io.hpp"
#include "detxplain/logging.hpp"
#include "detxplain/random.hpp"
#include "detxplain/scene.hpp"

namespace detxplain {

namespace fs = std::filesystem;

namespace {

std::string Trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

template <typename T>
T ParseNumber(const std::string& key, const std::string& value) {
  T out{};
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = static_cast<T>(std::stod(value, &used));
      if (used == value.size() && std::isfinite(out)) return out;
    } catch (const std::exception&) {
    }
  } else {
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec == std::errc() && ptr == value.data() + value.size()) return out;
  }
  Fail(ErrorCode::kConfig, "bad value '" + value + "' for " + key);
}

bool ParseBool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  Fail(ErrorCode::kConfig, "bad boolean '" + value + "' for " + key);
}

void ApplyRiseKey(RiseConfig* r, const std::string& field, const std::string& key,
                  const std::string& value) {
  if (field == "n_masks") {
    r->n_masks = ParseNumber<int>(key, value);
  } else if (field == "grid_size") {
    r->grid_size = ParseNumber<int>(key, value);
  } else if (field == "keep_prob") {
    r->keep_prob = ParseNumber<double>(key, value);
  } else {
    Fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
  }
}

// Builds the output in a sibling staging directory and moves the files into
// place only when everything succeeded.
class Staging {
 public:
  explicit Staging(fs::path target) : target_(std::move(target)) {
    if (target_.empty()) Fail(ErrorCode::kConfig, "no output directory given");
    dir_ = target_;
    dir_ += fmt::format(".partial-{}", static_cast<long>(::getpid()));
    std::error_code ec;
    fs::remove_all(dir_, ec);
    fs::create_directories(dir_, ec);
    if (ec) {
      Fail(ErrorCode::kIo, "cannot create " + dir_.string() + ": " + ec.message());
    }
  }
  ~Staging() {
    if (!committed_) {
      std::error_code ec;
      fs::remove_all(dir_, ec);
    }
  }
  Staging(const Staging&) = delete;
  Staging& operator=(const Staging&) = delete;

  const fs::path& dir() const { return dir_; }

  void Commit() {
    std::error_code ec;
    fs::create_directories(target_, ec);
    if (ec) {
      Fail(ErrorCode::kIo, "cannot create " + target_.string() + ": " + ec.message());
    }
    for (const auto& item : fs::recursive_directory_iterator(dir_)) {
      const fs::path rel = fs::relative(item.path(), dir_);
      if (item.is_directory()) {
        fs::create_directories(target_ / rel);
      } else {
        fs::rename(item.path(), target_ / rel, ec);
        if (ec) {
          Fail(ErrorCode::kIo, "cannot move output to " + (target_ / rel).string());
        }
      }
    }
    fs::remove_all(dir_, ec);
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path dir_;
  bool committed_ = false;
};

nlohmann::ordered_json BoxJson(const BBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

nlohmann::ordered_json MassJson(const BandMass& m) {
  return {{"border", m.border}, {"interior", m.interior}};
}

}  // namespace

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string item =
        Trim(text.substr(start, comma == std::string::npos ? std::string::npos
                                                           : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void ApplyConfigText(RunConfig* cfg, const std::string& text) {
  MethodParams& p = cfg->params;
  for (const auto& [key, value] : ParseKeyValueText(text)) {
    if (key == "dataset") {
      cfg->dataset = value;
    } else if (key == "detector") {
      cfg->detector = value;
    } else if (key == "detector_config") {
      cfg->detector_config = fs::path(value);
    } else if (key == "methods") {
      cfg->methods = SplitList(value);
    } else if (key == "metrics") {
      cfg->metrics = SplitList(value);
    } else if (key == "out") {
      cfg->out = value;
    } else if (key == "seed") {
      cfg->seed = ParseNumber<std::uint64_t>(key, value);
    } else if (key == "drop.per_box") {
      cfg->drop_per_box = ParseBool(key, value);
    } else if (key == "workers") {
      cfg->workers = ParseNumber<int>(key, value);
    } else if (key.starts_with("rise.")) {
      ApplyRiseKey(&p.rise, key.substr(5), key, value);
    } else if (key == "drise.similarity") {
      p.drise_similarity = value;
    } else if (key.starts_with("drise.")) {
      ApplyRiseKey(&p.drise, key.substr(6), key, value);
    } else if (key == "lime.segments") {
      p.lime.n_segments = ParseNumber<int>(key, value);
    } else if (key == "lime.compactness") {
      p.lime.compactness = ParseNumber<double>(key, value);
    } else if (key == "lime.iters") {
      p.lime.slic_iters = ParseNumber<int>(key, value);
    } else if (key == "lime.samples") {
      p.lime.n_samples = ParseNumber<int>(key, value);
    } else if (key == "lime.features") {
      p.lime.k_features = ParseNumber<int>(key, value);
    } else if (key == "lime.kernel_width") {
      p.lime.kernel_width = ParseNumber<double>(key, value);
    } else if (key == "lrp.epsilon") {
      p.lrp_epsilon = ParseNumber<double>(key, value);
    } else if (key == "adasise.layers") {
      p.adasise.layers = SplitList(value);
    } else if (key == "adasise.otsu_gate") {
      p.adasise.otsu_gate = ParseBool(key, value);
    } else if (key == "kde.bandwidth") {
      if (value == "auto") {
        p.kde_bandwidth.reset();
      } else {
        p.kde_bandwidth = ParseNumber<double>(key, value);
      }
    } else if (key == "pckde.log_space") {
      p.pckde_log_space = ParseBool(key, value);
    } else if (key == "negative.border_band") {
      p.border_band = ParseNumber<int>(key, value);
    } else {
      Fail(ErrorCode::kConfig, "unknown config key '" + key + "'");
    }
  }
}

RunConfig LoadRunConfig(const fs::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kConfig, "cannot read config " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  RunConfig cfg;
  ApplyConfigText(&cfg, text);
  return cfg;
}

std::unique_ptr<Detector> BuildDetector(const RunConfig& cfg) {
  DetectorConfig dc;
  if (cfg.detector_config) dc = LoadDetectorConfig(*cfg.detector_config);
  return MakeDetector(cfg.detector, dc);
}

void ValidateMethodParams(const MethodParams& p) {
  try {
    ValidateRiseConfig(p.rise);
    ValidateRiseConfig(p.drise);
  } catch (const Error& e) {
    Fail(ErrorCode::kConfig, e.what());
  }
  if (p.drise_similarity != "iou_score" && p.drise_similarity != "iou") {
    Fail(ErrorCode::kConfig, "drise.similarity must be iou_score or iou");
  }
  if (p.lime.k_features < 1 || p.lime.n_samples < 10 * p.lime.k_features ||
      !(p.lime.kernel_width > 0.0) || p.lime.n_segments < 2 ||
      !(p.lime.compactness > 0.0) || p.lime.slic_iters < 1) {
    Fail(ErrorCode::kConfig, "invalid LIME parameters");
  }
  if (!(p.lrp_epsilon >= 0.0)) Fail(ErrorCode::kConfig, "lrp.epsilon must be >= 0");
  if (p.kde_bandwidth && !(*p.kde_bandwidth > 0.0)) {
    Fail(ErrorCode::kConfig, "kde.bandwidth must be positive");
  }
  if (p.border_band < 0) Fail(ErrorCode::kConfig, "negative.border_band must be >= 0");
  if (p.adasise.layers.empty()) Fail(ErrorCode::kConfig, "adasise.layers is empty");
  for (const auto& l : p.adasise.layers) {
    static const char* kLayers[] = {"input", "conv1", "relu1", "pool1",
                                    "conv2", "relu2", "pool2"};
    if (std::find(std::begin(kLayers), std::end(kLayers), l) == std::end(kLayers)) {
      Fail(ErrorCode::kConfig, "unknown Ada-SISE layer '" + l + "'");
    }
  }
}

void ValidateRunConfig(const RunConfig& cfg) {
  if (cfg.workers < 1) Fail(ErrorCode::kConfig, "workers must be at least 1");
  if (cfg.methods.empty()) Fail(ErrorCode::kConfig, "no methods requested");
  for (const auto& m : cfg.methods) FindMethod(m);
  for (const auto& m : cfg.metrics) {
    if (std::find(AllMetrics().begin(), AllMetrics().end(), m) == AllMetrics().end()) {
      Fail(ErrorCode::kConfig, "unknown metric '" + m + "'");
    }
  }
  ValidateMethodParams(cfg.params);
  const auto detector = BuildDetector(cfg);
  CheckMethodsSupported(cfg.methods, *detector);
}

void CmdGenData(const GenDataOptions& options) {
  if (options.count < 1) Fail(ErrorCode::kConfig, "count must be at least 1");
  if (options.height < 64 || options.width < 64) {
    Fail(ErrorCode::kConfig, "image size must be at least 64x64");
  }
  Staging staging(options.out);
  fs::create_directories(staging.dir() / "images");
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < options.count; ++i) {
    Rng count_rng(SplitSeed(options.seed, "nodule-count", i));
    const int nodules = static_cast<int>(count_rng.Below(3));
    const SyntheticScene scene =
        GenerateScene(options.height, options.width, nodules,
                      SplitSeed(options.seed, "scene", i));
    DatasetEntry e;
    e.id = fmt::format("img_{:04d}", i);
    e.file = "images/" + e.id + ".png";
    e.width = options.width;
    e.height = options.height;
    e.boxes = scene.ground_truth;
    WritePngGray(staging.dir() / e.file, scene.image);
    entries.push_back(std::move(e));
  }
  WriteTextFile(staging.dir() / "annotations.json", AnnotationsToJson(entries));
  staging.Commit();
}

std::string CmdExplain(const RunConfig& cfg, const std::string& image_id) {
  ValidateRunConfig(cfg);
  const Dataset dataset = LoadDataset(cfg.dataset);
  const DatasetEntry& entry = dataset.Find(image_id);
  const Image image = dataset.LoadImage(entry);
  const auto detector = BuildDetector(cfg);
  MethodParams params = WithSeed(cfg.params, cfg.seed);
  params.workers = cfg.workers;

  Staging staging(cfg.out);
  const std::vector<Detection> detections = detector->Detect(image);
  nlohmann::ordered_json doc;
  doc["image_id"] = image_id;
  doc["detector"] = detector->name();
  doc["detections"] = nlohmann::ordered_json::array();
  std::vector<BBox> det_boxes;
  for (const auto& d : detections) {
    doc["detections"].push_back({{"box", BoxJson(d.box)}, {"score", d.score}});
    det_boxes.push_back(d.box);
  }
  doc["methods"] = nlohmann::ordered_json::array();
  for (const auto& method : cfg.methods) {
    const MethodOutput out =
        RunMethod(method, image, *detector, detections, params, true);
    nlohmann::ordered_json m;
    m["method"] = method;
    m["status"] = StatusName(out.status);
    m["seconds"] = out.seconds;
    m["files"] = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < out.maps.size(); ++i) {
      std::string stem = image_id + "_" + method;
      if (method == "drise") stem += fmt::format("_{}", i);
      const SaliencyMap& map = out.maps[i];
      WriteSal1(staging.dir() / (stem + ".sal"), map.height, map.width, map.values);
      std::vector<BBox> boxes = det_boxes;
      if (map.target_box) boxes = {*map.target_box};
      WritePngRgb(staging.dir() / (stem + ".png"),
                  RenderHeatmapOverlay(image, MetricInput(map), boxes));
      m["files"].push_back(stem + ".sal");
      if (map.target_box) m["target_boxes"].push_back(BoxJson(*map.target_box));
    }
    if (out.pckde) {
      const auto& r = *out.pckde;
      m["pckde"] = {{"score", r.score},
                    {"consistent", r.consistent},
                    {"detected_center", {r.detected_center.x, r.detected_center.y}},
                    {"argmax", {r.argmax.x, r.argmax.y}}};
    }
    if (out.negative) {
      const auto& n = *out.negative;
      m["negative_case"] = {{"no_detection", n.no_detection},
                            {"border_band", n.band},
                            {"kde_mass", MassJson(n.kde_mass)},
                            {"dm_mass", MassJson(n.dm_mass)}};
    }
    if (out.status != MethodStatus::kOk) {
      Log().info("{} {}: {}", image_id, method, StatusName(out.status));
    }
    doc["methods"].push_back(std::move(m));
  }
  const std::string text = doc.dump(2) + "\n";
  WriteTextFile(staging.dir() / (image_id + ".json"), text);
  staging.Commit();
  return text;
}

std::string CmdBenchmark(const RunConfig& cfg) {
  ValidateRunConfig(cfg);
  const Dataset dataset = LoadDataset(cfg.dataset);
  const auto detector = BuildDetector(cfg);
  Staging staging(cfg.out);
  fs::create_directories(staging.dir() / "maps");
  BenchmarkOptions options;
  options.methods = cfg.methods;
  options.metrics = cfg.metrics;
  options.params = WithSeed(cfg.params, cfg.seed);
  options.workers = cfg.workers;
  options.drop_per_box = cfg.drop_per_box;
  options.maps_dir = staging.dir() / "maps";
  const MetricReport report = RunBenchmark(dataset, *detector, options);
  WriteTextFile(staging.dir() / "report.csv", ReportCsv(report));
  WriteTextFile(staging.dir() / "report.json", ReportJson(report));
  staging.Commit();
  return ReportTable(report);
}

void CmdRender(const fs::path& dataset_root, const std::string& image_id,
               const fs::path& sal, const fs::path& png) {
  const Dataset dataset = LoadDataset(dataset_root);
  const DatasetEntry& entry = dataset.Find(image_id);
  const Image image = dataset.LoadImage(entry);
  const RawGrid grid = ReadSal1(sal);
  if (grid.height != image.height() || grid.width != image.width()) {
    Fail(ErrorCode::kData, sal.string() + ": map size does not match the image");
  }
  SaliencyMap map(grid.height, grid.width);
  std::copy(grid.values.begin(), grid.values.end(), map.values.begin());
  WritePngRgb(png, RenderHeatmapOverlay(image, MetricInput(map), entry.boxes));
}

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
      return 2;
    case ErrorCode::kData:
    case ErrorCode::kIo:
      return 3;
    case ErrorCode::kNumeric:
    case ErrorCode::kDegenerateInput:
      return 4;
  }
  return 4;
}

}  // namespace detxplain
