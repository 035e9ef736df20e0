/* Copyright 2026 The LVW Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

/* Public C interface of the learnable-visual-words library.
 *
 * An experiment handle wraps a flat key/value configuration (load a config
 * file, then override individual keys); the lvw_run_* entry points execute
 * the pipeline commands against it and write their artifacts under the
 * configured output directory. All functions return LVW_OK on success; on
 * failure lvw_last_error() carries a message until the next call on the
 * same handle.
 */

#ifndef LVW_LVW_H_
#define LVW_LVW_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LVW_API __declspec(dllexport)
#else
#define LVW_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lvw_status {
  LVW_OK = 0,
  LVW_ERROR_CONFIG = 1,   /* bad configuration, unknown key, missing path */
  LVW_ERROR_DATA = 2,     /* unreadable or inconsistent dataset/artifact */
  LVW_ERROR_NUMERIC = 3,  /* NaN/Inf abort during optimization */
  LVW_ERROR_ARGUMENT = 4, /* invalid argument to an API call */
  LVW_ERROR_IO = 5,       /* filesystem failure */
  LVW_ERROR_INTERNAL = 6
} lvw_status;

typedef struct lvw_experiment lvw_experiment; /* opaque */

LVW_API const char* lvw_version(void);
LVW_API const char* lvw_status_name(lvw_status status);

/* Handle lifecycle. lvw_experiment_new never fails except on allocation. */
LVW_API lvw_experiment* lvw_experiment_new(void);
LVW_API void lvw_experiment_free(lvw_experiment* exp);

LVW_API lvw_status lvw_load_config(lvw_experiment* exp, const char* path);
LVW_API lvw_status lvw_set_option(lvw_experiment* exp, const char* key,
                                  const char* value);
/* Valid until the next API call on the same handle. Empty string when the
 * last call succeeded. */
LVW_API const char* lvw_last_error(const lvw_experiment* exp);
/* Main artifact path produced by the last successful run (checkpoint or
 * report directory). */
LVW_API const char* lvw_last_artifact(const lvw_experiment* exp);

/* Pipeline commands. */
LVW_API lvw_status lvw_run_finetune_base(lvw_experiment* exp);
LVW_API lvw_status lvw_run_train(lvw_experiment* exp);
LVW_API lvw_status lvw_run_project(lvw_experiment* exp);
LVW_API lvw_status lvw_run_evaluate(lvw_experiment* exp);
LVW_API lvw_status lvw_run_sweep(lvw_experiment* exp);
LVW_API lvw_status lvw_run_explain(lvw_experiment* exp);
LVW_API lvw_status lvw_run_explain_unseen(lvw_experiment* exp);
LVW_API lvw_status lvw_run_synth(lvw_experiment* exp);

/* Interpretability metrics on raw row-major maps (height x width doubles).
 * No handle required. */

/* mask_out must hold height*width bytes; entries become 0/1. q in [0,100). */
LVW_API lvw_status lvw_quantile_mask(const double* map, int32_t height, int32_t width,
                                     double q, uint8_t* mask_out);
/* IoU of the q-quantile masks of the two maps, in [0,1]. */
LVW_API lvw_status lvw_iou_coverage(const double* attention, const double* combined,
                                    int32_t height, int32_t width, double q,
                                    double* iou_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LVW_LVW_H_ */
