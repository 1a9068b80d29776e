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

#include "detxplain/detxplain.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <utility>

#include "detxplain/error.hpp"
#include "detxplain/harness.hpp"
#include "detxplain/io.hpp"
#include "detxplain/scene.hpp"

struct dx_image {
  detxplain::Image image;
};
struct dx_detector {
  std::unique_ptr<detxplain::Detector> detector;
};
struct dx_saliency {
  detxplain::SaliencyMap map;
};
struct dx_run_config {
  detxplain::RunConfig cfg;
};

namespace {

thread_local std::string g_last_error;

dx_status ToStatus(detxplain::ErrorCode code) {
  switch (code) {
    case detxplain::ErrorCode::kInvalidArgument:
      return DX_ERR_INVALID_ARGUMENT;
    case detxplain::ErrorCode::kConfig:
      return DX_ERR_CONFIG;
    case detxplain::ErrorCode::kData:
      return DX_ERR_DATA;
    case detxplain::ErrorCode::kNumeric:
      return DX_ERR_NUMERIC;
    case detxplain::ErrorCode::kDegenerateInput:
      return DX_ERR_DEGENERATE;
    case detxplain::ErrorCode::kIo:
      return DX_ERR_IO;
  }
  return DX_ERR_INTERNAL;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
dx_status Guard(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return DX_OK;
  } catch (const detxplain::Error& e) {
    g_last_error = e.what();
    return ToStatus(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return DX_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return DX_ERR_INTERNAL;
  }
}

void Require(bool ok, const char* what) {
  if (!ok) detxplain::Fail(detxplain::ErrorCode::kInvalidArgument, what);
}

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dx_box ToBox(const detxplain::BBox& b) { return {b.x1, b.y1, b.x2, b.y2}; }

}  // namespace

extern "C" {

const char* dx_version(void) { return "0.1.0"; }

const char* dx_last_error(void) { return g_last_error.c_str(); }

int dx_exit_code(dx_status status) {
  switch (status) {
    case DX_OK:
      return 0;
    case DX_ERR_INVALID_ARGUMENT:
      return detxplain::ExitCodeFor(detxplain::ErrorCode::kInvalidArgument);
    case DX_ERR_CONFIG:
      return detxplain::ExitCodeFor(detxplain::ErrorCode::kConfig);
    case DX_ERR_DATA:
      return detxplain::ExitCodeFor(detxplain::ErrorCode::kData);
    case DX_ERR_IO:
      return detxplain::ExitCodeFor(detxplain::ErrorCode::kIo);
    case DX_ERR_NUMERIC:
    case DX_ERR_DEGENERATE:
    case DX_ERR_INTERNAL:
      return 4;
  }
  return 4;
}

void dx_string_free(char* text) { std::free(text); }

dx_status dx_image_create(int height, int width, const double* values,
                          dx_image** out) {
  return Guard([&] {
    Require(out != nullptr && values != nullptr, "null argument");
    Require(height > 0 && width > 0, "image size must be positive");
    std::vector<double> data(values, values + static_cast<std::size_t>(height) * width);
    *out = new dx_image{detxplain::Image(height, width, std::move(data))};
  });
}

dx_status dx_image_load_png(const char* path, dx_image** out) {
  return Guard([&] {
    Require(out != nullptr && path != nullptr, "null argument");
    *out = new dx_image{detxplain::ReadPngGray(path)};
  });
}

dx_status dx_image_generate(int height, int width, int nodules, uint64_t seed,
                            dx_image** out, dx_box* boxes, size_t capacity,
                            size_t* box_count) {
  return Guard([&] {
    Require(out != nullptr, "null argument");
    Require(capacity == 0 || boxes != nullptr, "null box buffer");
    auto scene = detxplain::GenerateScene(height, width, nodules, seed);
    for (std::size_t i = 0; i < scene.ground_truth.size() && i < capacity; ++i) {
      boxes[i] = ToBox(scene.ground_truth[i]);
    }
    if (box_count != nullptr) *box_count = scene.ground_truth.size();
    *out = new dx_image{std::move(scene.image)};
  });
}

int dx_image_height(const dx_image* image) {
  return image != nullptr ? image->image.height() : 0;
}

int dx_image_width(const dx_image* image) {
  return image != nullptr ? image->image.width() : 0;
}

const double* dx_image_values(const dx_image* image) {
  return image != nullptr ? image->image.values().data() : nullptr;
}

void dx_image_destroy(dx_image* image) { delete image; }

dx_status dx_detector_create(const char* kind, const char* config_path,
                             dx_detector** out) {
  return Guard([&] {
    Require(out != nullptr && kind != nullptr, "null argument");
    detxplain::DetectorConfig dc;
    if (config_path != nullptr) dc = detxplain::LoadDetectorConfig(config_path);
    *out = new dx_detector{detxplain::MakeDetector(kind, dc)};
  });
}

void dx_detector_destroy(dx_detector* detector) { delete detector; }

dx_status dx_detect(const dx_detector* detector, const dx_image* image,
                    dx_detection* out, size_t capacity, size_t* count) {
  return Guard([&] {
    Require(detector != nullptr && image != nullptr && count != nullptr,
            "null argument");
    Require(capacity == 0 || out != nullptr, "null detection buffer");
    const auto dets = detector->detector->Detect(image->image);
    for (std::size_t i = 0; i < dets.size() && i < capacity; ++i) {
      out[i] = {ToBox(dets[i].box), dets[i].score};
    }
    *count = dets.size();
  });
}

dx_status dx_image_score(const dx_detector* detector, const dx_image* image,
                         double* score) {
  return Guard([&] {
    Require(detector != nullptr && image != nullptr && score != nullptr,
            "null argument");
    *score = detector->detector->ImageScore(image->image);
  });
}

dx_status dx_run_config_create(dx_run_config** out) {
  return Guard([&] {
    Require(out != nullptr, "null argument");
    *out = new dx_run_config{};
  });
}

dx_status dx_run_config_load(const char* path, dx_run_config** out) {
  return Guard([&] {
    Require(out != nullptr && path != nullptr, "null argument");
    *out = new dx_run_config{detxplain::LoadRunConfig(path)};
  });
}

dx_status dx_run_config_set(dx_run_config* cfg, const char* key,
                            const char* value) {
  return Guard([&] {
    Require(cfg != nullptr && key != nullptr && value != nullptr, "null argument");
    // Applied to a copy so a rejected value leaves the config unchanged.
    detxplain::RunConfig next = cfg->cfg;
    detxplain::ApplyConfigText(&next, std::string(key) + " = " + value);
    cfg->cfg = std::move(next);
  });
}

void dx_run_config_destroy(dx_run_config* cfg) { delete cfg; }

dx_status dx_explain(const dx_detector* detector, const dx_image* image,
                     const char* method, const dx_run_config* cfg,
                     dx_saliency** out, dx_method_status* method_status) {
  return Guard([&] {
    Require(detector != nullptr && image != nullptr && method != nullptr &&
                out != nullptr && method_status != nullptr,
            "null argument");
    *out = nullptr;
    const detxplain::RunConfig defaults;
    const detxplain::RunConfig& rc = cfg != nullptr ? cfg->cfg : defaults;
    detxplain::ValidateMethodParams(rc.params);
    detxplain::MethodParams params = detxplain::WithSeed(rc.params, rc.seed);
    params.workers = rc.workers;
    const auto dets = detector->detector->Detect(image->image);
    auto result = detxplain::RunMethod(method, image->image, *detector->detector,
                                       dets, params, false);
    switch (result.status) {
      case detxplain::MethodStatus::kOk:
        *method_status = DX_METHOD_OK;
        break;
      case detxplain::MethodStatus::kNoDetection:
        *method_status = DX_METHOD_NO_DETECTION;
        break;
      case detxplain::MethodStatus::kDegenerate:
        *method_status = DX_METHOD_DEGENERATE;
        break;
    }
    if (!result.maps.empty()) {
      *out = new dx_saliency{std::move(result.maps.front())};
    }
  });
}

int dx_saliency_height(const dx_saliency* map) {
  return map != nullptr ? map->map.height : 0;
}

int dx_saliency_width(const dx_saliency* map) {
  return map != nullptr ? map->map.width : 0;
}

const double* dx_saliency_values(const dx_saliency* map) {
  return map != nullptr ? map->map.values.data() : nullptr;
}

dx_status dx_saliency_write_sal1(const dx_saliency* map, const char* path) {
  return Guard([&] {
    Require(map != nullptr && path != nullptr, "null argument");
    detxplain::WriteSal1(path, map->map.height, map->map.width, map->map.values);
  });
}

void dx_saliency_destroy(dx_saliency* map) { delete map; }

dx_status dx_metric(const dx_saliency* map, const dx_box* gt, size_t gt_count,
                    const char* metric, double* value, int* present) {
  return Guard([&] {
    Require(map != nullptr && metric != nullptr && value != nullptr &&
                present != nullptr,
            "null argument");
    Require(gt_count == 0 || gt != nullptr, "null box buffer");
    std::vector<detxplain::BBox> boxes;
    for (std::size_t i = 0; i < gt_count; ++i) {
      boxes.push_back({gt[i].x1, gt[i].y1, gt[i].x2, gt[i].y2});
    }
    const std::string name = metric;
    std::optional<double> v;
    if (name == "ebpg") {
      v = detxplain::Ebpg(map->map, boxes);
    } else if (name == "iou") {
      v = detxplain::IouMetric(map->map, boxes);
    } else if (name == "bbox") {
      v = detxplain::BboxMetric(map->map, boxes);
    } else {
      detxplain::Fail(detxplain::ErrorCode::kInvalidArgument,
                      "unknown metric '" + name + "'");
    }
    *present = v.has_value() ? 1 : 0;
    *value = v.value_or(0.0);
  });
}

dx_status dx_cmd_gen_data(int count, int height, int width, uint64_t seed,
                          const char* out_dir) {
  return Guard([&] {
    Require(out_dir != nullptr, "null argument");
    detxplain::GenDataOptions options;
    options.count = count;
    options.height = height;
    options.width = width;
    options.seed = seed;
    options.out = out_dir;
    detxplain::CmdGenData(options);
  });
}

dx_status dx_cmd_explain(const dx_run_config* cfg, const char* image_id,
                         char** json) {
  return Guard([&] {
    Require(cfg != nullptr && image_id != nullptr, "null argument");
    const std::string text = detxplain::CmdExplain(cfg->cfg, image_id);
    if (json != nullptr) *json = CopyString(text);
  });
}

dx_status dx_cmd_benchmark(const dx_run_config* cfg, char** table) {
  return Guard([&] {
    Require(cfg != nullptr, "null argument");
    const std::string text = detxplain::CmdBenchmark(cfg->cfg);
    if (table != nullptr) *table = CopyString(text);
  });
}

dx_status dx_cmd_render(const char* dataset, const char* image_id,
                        const char* sal_path, const char* png_path) {
  return Guard([&] {
    Require(dataset != nullptr && image_id != nullptr && sal_path != nullptr &&
                png_path != nullptr,
            "null argument");
    detxplain::CmdRender(dataset, image_id, sal_path, png_path);
  });
}

}  // extern "C"
