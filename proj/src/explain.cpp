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

#include "detxplain/explain.hpp"

#include <chrono>

#include "detxplain/error.hpp"
#include "detxplain/random.hpp"

namespace detxplain {

const std::vector<MethodInfo>& AllMethods() {
  static const std::vector<MethodInfo> methods = {
      {"kde", MethodStage::kProposal, false},
      {"dm", MethodStage::kProposal, false},
      {"lime", MethodStage::kSecond, false},
      {"gradcam", MethodStage::kSecond, true},
      {"gradcampp", MethodStage::kSecond, true},
      {"lrp", MethodStage::kSecond, true},
      {"rise", MethodStage::kSecond, false},
      {"adasise", MethodStage::kSecond, true},
      {"drise", MethodStage::kSecond, false},
  };
  return methods;
}

const MethodInfo& FindMethod(const std::string& name) {
  for (const auto& m : AllMethods()) {
    if (m.name == name) return m;
  }
  Fail(ErrorCode::kConfig, "unknown method '" + name + "'");
}

void CheckMethodsSupported(const std::vector<std::string>& methods,
                           const Detector& detector) {
  std::string bad;
  for (const auto& name : methods) {
    if (FindMethod(name).needs_white_box && detector.white_box() == nullptr) {
      bad += (bad.empty() ? "" : ", ") + name;
    }
  }
  if (!bad.empty()) {
    Fail(ErrorCode::kConfig, "methods " + bad + " need gradients, which the '" +
                                 detector.name() + "' detector does not expose");
  }
}

MethodParams WithSeed(MethodParams params, std::uint64_t seed) {
  params.seed = seed;
  params.rise.seed = SplitSeed(seed, "rise");
  params.drise.seed = SplitSeed(seed, "drise");
  params.lime.seed = SplitSeed(seed, "lime");
  return params;
}

const char* StatusName(MethodStatus status) {
  switch (status) {
    case MethodStatus::kOk:
      return "ok";
    case MethodStatus::kNoDetection:
      return "no detection";
    case MethodStatus::kDegenerate:
      return "degenerate";
  }
  return "unknown";
}

MethodOutput RunMethod(const std::string& method, const Image& image,
                       const Detector& detector,
                       const std::vector<Detection>& detections,
                       const MethodParams& params, bool all_boxes) {
  const MethodInfo& info = FindMethod(method);
  CheckMethodsSupported({method}, detector);
  MethodOutput out;
  out.method = method;
  if (info.stage == MethodStage::kSecond && detections.empty()) {
    out.status = MethodStatus::kNoDetection;
    return out;
  }
  const auto start = std::chrono::steady_clock::now();
  if (method == "kde" || method == "dm") {
    const ProposalSet proposals = detector.Propose(image);
    if (method == "kde") {
      const KdeModel model = FitKde(proposals, params.kde_bandwidth);
      const DensityEstimate est = KdeDensity(model, image.height(), image.width());
      out.maps.push_back(KdeSaliency(est));
      if (!detections.empty()) {
        out.pckde = Pckde(model, est, detections.front(), params.pckde_log_space);
      } else {
        const DensityMapResult dm = DensityMap(proposals, image.height(), image.width());
        out.negative = NegativeCase(proposals, detections, est, dm, params.border_band);
      }
    } else {
      const DensityMapResult dm = DensityMap(proposals, image.height(), image.width());
      out.maps.push_back(DensityMapSaliency(dm));
      if (detections.empty()) {
        const KdeModel model = FitKde(proposals, params.kde_bandwidth);
        const DensityEstimate est = KdeDensity(model, image.height(), image.width());
        out.negative = NegativeCase(proposals, detections, est, dm, params.border_band);
      }
    }
  } else if (method == "lime") {
    LimeConfig cfg = params.lime;
    cfg.workers = params.workers;
    LimeResult r = Lime(image, detector, cfg);
    if (r.degenerate) out.status = MethodStatus::kDegenerate;
    out.maps.push_back(std::move(r.map));
  } else if (method == "gradcam") {
    out.maps.push_back(GradCam(*detector.white_box(), image));
  } else if (method == "gradcampp") {
    out.maps.push_back(GradCamPlusPlus(*detector.white_box(), image));
  } else if (method == "lrp") {
    out.maps.push_back(RelevanceMap(LrpEpsilon(
        *detector.white_box(), image, TargetSelector::MaxScore(), params.lrp_epsilon)));
  } else if (method == "adasise") {
    AdaSiseResult r = AdaSise(*detector.white_box(), image,
                              TargetSelector::MaxScore(), params.adasise);
    if (r.degenerate) out.status = MethodStatus::kDegenerate;
    out.maps.push_back(std::move(r.map));
  } else if (method == "rise") {
    RiseConfig cfg = params.rise;
    cfg.workers = params.workers;
    out.maps.push_back(Rise(image, detector, cfg));
  } else if (method == "drise") {
    RiseConfig cfg = params.drise;
    cfg.workers = params.workers;
    DetectionSimilarity sim = IouTimesScore;
    if (params.drise_similarity == "iou") {
      sim = [](const Detection& t, const Detection& d) { return Iou(t.box, d.box); };
    } else if (params.drise_similarity != "iou_score") {
      Fail(ErrorCode::kConfig,
           "unknown D-RISE similarity '" + params.drise_similarity + "'");
    }
    const auto masks = GenerateMaskSpecs(cfg);
    const std::size_t count = all_boxes ? detections.size() : 1;
    for (std::size_t i = 0; i < count; ++i) {
      out.maps.push_back(
          DRiseWithMasks(image, detector, detections[i], masks, cfg, sim));
      out.targets.push_back(detections[i]);
    }
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              start)
                    .count();
  return out;
}

}  // namespace detxplain
