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

#ifndef DETXPLAIN_HARNESS_HPP_
#define DETXPLAIN_HARNESS_HPP_

// Command implementations behind the detxplain tool: dataset generation,
// explanation runs, benchmarks and rendering.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "detxplain/error.hpp"
#include "detxplain/explain.hpp"
#include "detxplain/metrics.hpp"

namespace detxplain {

struct RunConfig {
  std::filesystem::path dataset;
  std::string detector = "minicnn";  // synthetic | minicnn
  std::optional<std::filesystem::path> detector_config;
  std::vector<std::string> methods;
  std::vector<std::string> metrics = AllMetrics();
  std::filesystem::path out;
  std::uint64_t seed = 0;
  int workers = 1;
  bool drop_per_box = false;
  MethodParams params;
};

// Applies `key = value` settings. Keys: dataset, detector, detector_config,
// methods, metrics (comma lists), out, seed, workers, rise.n_masks,
// rise.grid_size, rise.keep_prob, drise.n_masks, drise.grid_size,
// drise.keep_prob, drise.similarity, lime.segments, lime.compactness,
// lime.iters, lime.samples, lime.features, lime.kernel_width, lrp.epsilon,
// adasise.layers, adasise.otsu_gate, kde.bandwidth, pckde.log_space,
// negative.border_band. Throws kConfig for unknown keys or bad values.
void ApplyConfigText(RunConfig* cfg, const std::string& text);
RunConfig LoadRunConfig(const std::filesystem::path& path);
std::vector<std::string> SplitList(const std::string& text);

// Range checks on method parameters; throws kConfig.
void ValidateMethodParams(const MethodParams& params);
// Checks names, parameters and method/detector compatibility; throws kConfig.
void ValidateRunConfig(const RunConfig& cfg);
std::unique_ptr<Detector> BuildDetector(const RunConfig& cfg);

struct GenDataOptions {
  int count = 50;
  int height = 128;
  int width = 128;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

// Writes images/<id>.png and annotations.json. Nodule counts are drawn from
// {0, 1, 2} per scene.
void CmdGenData(const GenDataOptions& options);

// Writes, per method, <id>_<method>.sal and .png (D-RISE: one pair per final
// detection, suffixed _<index>) plus <id>.json. Returns the JSON document.
std::string CmdExplain(const RunConfig& cfg, const std::string& image_id);

// Writes report.csv, report.json and maps/<id>_<method>.sal. Returns the
// aggregate table.
std::string CmdBenchmark(const RunConfig& cfg);

// Overlays a SAL1 map on a dataset image with its ground-truth boxes.
void CmdRender(const std::filesystem::path& dataset, const std::string& image_id,
               const std::filesystem::path& sal, const std::filesystem::path& png);

// Process exit code for an error category: 2 configuration, 3 data,
// 4 numeric or internal.
int ExitCodeFor(ErrorCode code);

}  // namespace detxplain

#endif  // DETXPLAIN_HARNESS_HPP_
