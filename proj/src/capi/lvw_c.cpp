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

#include "lvw/lvw.h"

#include <cstring>
#include <string>

#include "core/errors.hpp"
#include "core/eval.hpp"
#include "core/experiment.hpp"

struct lvw_experiment {
  lvw::Experiment impl;
  std::string last_error;
  std::string last_artifact;
};

namespace {

lvw_status status_from_exception(lvw_experiment* exp) {
  try {
    throw;
  } catch (const lvw::ConfigError& e) {
    if (exp) exp->last_error = e.what();
    return LVW_ERROR_CONFIG;
  } catch (const lvw::DataError& e) {
    if (exp) exp->last_error = e.what();
    return LVW_ERROR_DATA;
  } catch (const lvw::NumericError& e) {
    if (exp) exp->last_error = e.what();
    return LVW_ERROR_NUMERIC;
  } catch (const lvw::ArgumentError& e) {
    if (exp) exp->last_error = e.what();
    return LVW_ERROR_ARGUMENT;
  } catch (const lvw::IoError& e) {
    if (exp) exp->last_error = e.what();
    return LVW_ERROR_IO;
  } catch (const std::exception& e) {
    if (exp) exp->last_error = e.what();
    return LVW_ERROR_INTERNAL;
  } catch (...) {
    if (exp) exp->last_error = "unknown error";
    return LVW_ERROR_INTERNAL;
  }
}

template <typename Fn>
lvw_status run_command(lvw_experiment* exp, Fn&& fn) {
  if (exp == nullptr) return LVW_ERROR_ARGUMENT;
  exp->last_error.clear();
  try {
    exp->last_artifact = fn(exp->impl);
    return LVW_OK;
  } catch (...) {
    return status_from_exception(exp);
  }
}

}  // namespace

extern "C" {

const char* lvw_version(void) { return "0.1.0"; }

const char* lvw_status_name(lvw_status status) {
  switch (status) {
    case LVW_OK: return "ok";
    case LVW_ERROR_CONFIG: return "config error";
    case LVW_ERROR_DATA: return "data error";
    case LVW_ERROR_NUMERIC: return "numeric failure";
    case LVW_ERROR_ARGUMENT: return "invalid argument";
    case LVW_ERROR_IO: return "io error";
    case LVW_ERROR_INTERNAL: return "internal error";
  }
  return "unknown";
}

lvw_experiment* lvw_experiment_new(void) {
  try {
    return new lvw_experiment();
  } catch (...) {
    return nullptr;
  }
}

void lvw_experiment_free(lvw_experiment* exp) { delete exp; }

lvw_status lvw_load_config(lvw_experiment* exp, const char* path) {
  if (exp == nullptr || path == nullptr) return LVW_ERROR_ARGUMENT;
  exp->last_error.clear();
  try {
    exp->impl.load_config_file(path);
    return LVW_OK;
  } catch (...) {
    return status_from_exception(exp);
  }
}

lvw_status lvw_set_option(lvw_experiment* exp, const char* key, const char* value) {
  if (exp == nullptr || key == nullptr || value == nullptr) return LVW_ERROR_ARGUMENT;
  exp->last_error.clear();
  try {
    exp->impl.set_option(key, value);
    return LVW_OK;
  } catch (...) {
    return status_from_exception(exp);
  }
}

const char* lvw_last_error(const lvw_experiment* exp) {
  return exp == nullptr ? "null experiment handle" : exp->last_error.c_str();
}

const char* lvw_last_artifact(const lvw_experiment* exp) {
  return exp == nullptr ? "" : exp->last_artifact.c_str();
}

lvw_status lvw_run_finetune_base(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_finetune_base(); });
}

lvw_status lvw_run_train(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_train(); });
}

lvw_status lvw_run_project(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_project(); });
}

lvw_status lvw_run_evaluate(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_evaluate(); });
}

lvw_status lvw_run_sweep(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_sweep(); });
}

lvw_status lvw_run_explain(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_explain(); });
}

lvw_status lvw_run_explain_unseen(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_explain_unseen(); });
}

lvw_status lvw_run_synth(lvw_experiment* exp) {
  return run_command(exp, [](lvw::Experiment& e) { return e.run_synth(); });
}

lvw_status lvw_quantile_mask(const double* map, int32_t height, int32_t width, double q,
                             uint8_t* mask_out) {
  if (map == nullptr || mask_out == nullptr || height <= 0 || width <= 0)
    return LVW_ERROR_ARGUMENT;
  try {
    lvw::Tensor t({height, width});
    std::memcpy(t.data(), map, sizeof(double) * size_t(height) * size_t(width));
    lvw::BinaryMask mask = lvw::quantile_mask(t, q);
    std::memcpy(mask_out, mask.values.data(), mask.values.size());
    return LVW_OK;
  } catch (...) {
    return status_from_exception(nullptr);
  }
}

lvw_status lvw_iou_coverage(const double* attention, const double* combined,
                            int32_t height, int32_t width, double q, double* iou_out) {
  if (attention == nullptr || combined == nullptr || iou_out == nullptr || height <= 0 ||
      width <= 0)
    return LVW_ERROR_ARGUMENT;
  try {
    lvw::Tensor a({height, width});
    lvw::Tensor b({height, width});
    std::memcpy(a.data(), attention, sizeof(double) * size_t(height) * size_t(width));
    std::memcpy(b.data(), combined, sizeof(double) * size_t(height) * size_t(width));
    *iou_out = lvw::iou_coverage(a, b, q);
    return LVW_OK;
  } catch (...) {
    return status_from_exception(nullptr);
  }
}

}  // extern "C"
