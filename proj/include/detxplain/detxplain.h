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

#ifndef DETXPLAIN_DETXPLAIN_H_
#define DETXPLAIN_DETXPLAIN_H_

/* C interface to the detxplain library. Objects are opaque handles owned by
 * the caller and released with the matching *_destroy function. Every call
 * that can fail returns a dx_status; the message of the last failure on the
 * calling thread is available from dx_last_error(). */

#include <stddef.h>
#include <stdint.h>

#if defined(DETXPLAIN_BUILDING_LIBRARY)
#define DX_API __attribute__((visibility("default")))
#else
#define DX_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dx_status {
  DX_OK = 0,
  DX_ERR_INVALID_ARGUMENT = 1,
  DX_ERR_CONFIG = 2,
  DX_ERR_DATA = 3,
  DX_ERR_NUMERIC = 4,
  DX_ERR_DEGENERATE = 5,
  DX_ERR_IO = 6,
  DX_ERR_INTERNAL = 7
} dx_status;

/* Outcome of one explanation, independent of the call status. */
typedef enum dx_method_status {
  DX_METHOD_OK = 0,
  DX_METHOD_NO_DETECTION = 1, /* second-stage method on a negative image */
  DX_METHOD_DEGENERATE = 2    /* valid but empty map; a warning is logged */
} dx_method_status;

typedef struct dx_image dx_image;
typedef struct dx_detector dx_detector;
typedef struct dx_saliency dx_saliency;
typedef struct dx_run_config dx_run_config;

typedef struct dx_box {
  int x1;
  int y1;
  int x2;
  int y2;
} dx_box;

typedef struct dx_detection {
  dx_box box;
  double score;
} dx_detection;

DX_API const char* dx_version(void);
/* Message of the last failed call on this thread; "" when none. */
DX_API const char* dx_last_error(void);
/* Process exit code for a status: 0, 2 configuration, 3 data, 4 numeric. */
DX_API int dx_exit_code(dx_status status);
DX_API void dx_string_free(char* text);

/* Images: row-major intensities in [0, 1]. */
DX_API dx_status dx_image_create(int height, int width, const double* values,
                                 dx_image** out);
DX_API dx_status dx_image_load_png(const char* path, dx_image** out);
/* Synthetic scene; up to `capacity` ground-truth boxes are copied to boxes. */
DX_API dx_status dx_image_generate(int height, int width, int nodules,
                                   uint64_t seed, dx_image** out, dx_box* boxes,
                                   size_t capacity, size_t* box_count);
DX_API int dx_image_height(const dx_image* image);
DX_API int dx_image_width(const dx_image* image);
DX_API const double* dx_image_values(const dx_image* image);
DX_API void dx_image_destroy(dx_image* image);

/* kind is "synthetic" or "minicnn"; config_path may be NULL. */
DX_API dx_status dx_detector_create(const char* kind, const char* config_path,
                                    dx_detector** out);
DX_API void dx_detector_destroy(dx_detector* detector);
/* Final detections, best first. *count receives the total number even when
 * it exceeds capacity. */
DX_API dx_status dx_detect(const dx_detector* detector, const dx_image* image,
                           dx_detection* out, size_t capacity, size_t* count);
DX_API dx_status dx_image_score(const dx_detector* detector,
                                const dx_image* image, double* score);

/* Run configuration: `key = value` settings as in a config file. */
DX_API dx_status dx_run_config_create(dx_run_config** out);
DX_API dx_status dx_run_config_load(const char* path, dx_run_config** out);
DX_API dx_status dx_run_config_set(dx_run_config* cfg, const char* key,
                                   const char* value);
DX_API void dx_run_config_destroy(dx_run_config* cfg);

/* Explains the image with one method (kde, dm, lime, gradcam, gradcampp, lrp,
 * rise, adasise, drise; D-RISE explains the top detection). cfg may be NULL
 * for defaults. *out is NULL when *method_status is DX_METHOD_NO_DETECTION. */
DX_API dx_status dx_explain(const dx_detector* detector, const dx_image* image,
                            const char* method, const dx_run_config* cfg,
                            dx_saliency** out, dx_method_status* method_status);
DX_API int dx_saliency_height(const dx_saliency* map);
DX_API int dx_saliency_width(const dx_saliency* map);
DX_API const double* dx_saliency_values(const dx_saliency* map);
DX_API dx_status dx_saliency_write_sal1(const dx_saliency* map, const char* path);
DX_API void dx_saliency_destroy(dx_saliency* map);

/* metric is ebpg, iou or bbox. *present is 0 when the metric is undefined
 * (no ground-truth boxes). */
DX_API dx_status dx_metric(const dx_saliency* map, const dx_box* gt,
                           size_t gt_count, const char* metric, double* value,
                           int* present);

/* Commands behind the detxplain tool. Returned strings are released with
 * dx_string_free; the out-parameters may be NULL. */
DX_API dx_status dx_cmd_gen_data(int count, int height, int width,
                                 uint64_t seed, const char* out_dir);
DX_API dx_status dx_cmd_explain(const dx_run_config* cfg, const char* image_id,
                                char** json);
DX_API dx_status dx_cmd_benchmark(const dx_run_config* cfg, char** table);
DX_API dx_status dx_cmd_render(const char* dataset, const char* image_id,
                               const char* sal_path, const char* png_path);

#ifdef __cplusplus
}
#endif

#endif /* DETXPLAIN_DETXPLAIN_H_ */
