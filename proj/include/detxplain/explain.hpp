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

#ifndef DETXPLAIN_EXPLAIN_HPP_
#define DETXPLAIN_EXPLAIN_HPP_

// Uniform front end over every explainer, shared by the benchmark and the
// command-line harness.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "detxplain/detectors.hpp"
#include "detxplain/gradient.hpp"
#include "detxplain/perturbation.hpp"
#include "detxplain/statistic.hpp"

namespace detxplain {

enum class MethodStage { kProposal, kSecond };

struct MethodInfo {
  std::string name;
  MethodStage stage;
  bool needs_white_box;
};

// kde, dm, lime, gradcam, gradcampp, lrp, rise, adasise, drise.
const std::vector<MethodInfo>& AllMethods();
const MethodInfo& FindMethod(const std::string& name);  // throws kConfig
// Throws kConfig naming every method the detector cannot serve.
void CheckMethodsSupported(const std::vector<std::string>& methods,
                           const Detector& detector);

struct MethodParams {
  std::uint64_t seed = 0;
  RiseConfig rise;
  RiseConfig drise;
  std::string drise_similarity = "iou_score";  // or "iou"
  LimeConfig lime;
  double lrp_epsilon = 0.01;
  AdaSiseConfig adasise;
  std::optional<double> kde_bandwidth;  // automatic when unset
  bool pckde_log_space = false;
  int border_band = kDefaultBorderBand;
  int workers = 1;  // inner parallelism for RISE, D-RISE and LIME
};

// Copies the master seed into the per-method configurations.
MethodParams WithSeed(MethodParams params, std::uint64_t seed);

enum class MethodStatus { kOk, kNoDetection, kDegenerate };
const char* StatusName(MethodStatus status);

struct MethodOutput {
  std::string method;
  MethodStatus status = MethodStatus::kOk;
  // One map, or one per final detection for D-RISE when explaining every box.
  std::vector<SaliencyMap> maps;
  std::vector<Detection> targets;  // D-RISE boxes, parallel to maps
  std::optional<PckdeResult> pckde;
  std::optional<NegativeCaseReport> negative;
  double seconds = 0.0;  // explanation generation only
};

// Runs one method. `detections` are the detector's final detections on the
// image; second-stage methods report kNoDetection when they are empty.
// D-RISE explains every detection when all_boxes is set, else the top one.
MethodOutput RunMethod(const std::string& method, const Image& image,
                       const Detector& detector,
                       const std::vector<Detection>& detections,
                       const MethodParams& params, bool all_boxes);

}  // namespace detxplain

#endif  // DETXPLAIN_EXPLAIN_HPP_
