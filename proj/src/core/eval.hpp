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

#ifndef LVW_CORE_EVAL_HPP_
#define LVW_CORE_EVAL_HPP_

#include <string>
#include <vector>

#include "core/attention.hpp"
#include "core/model.hpp"
#include "core/tensor.hpp"

namespace lvw {

// Quantile-thresholded mask: true where the value is >= the q-th percentile
// (linear interpolation over all entries), false below it.
struct BinaryMask {
  int height = 0;
  int width = 0;
  double q = 0.0;
  std::vector<uint8_t> values;  // row-major, 0/1

  int64_t count_true() const;
};

BinaryMask quantile_mask(const Tensor& map, double q);

// IoU of the q-quantile masks of the two maps; 1.0 when both masks are
// empty (cannot happen for q < 100 under this mask convention).
double iou_coverage(const Tensor& attention, const Tensor& combined, double q);

// --- dataset-level evaluation ------------------------------------------------

struct EvalSample {
  std::string id;
  int label = -1;
  Tensor image;  // [3,R,R]
};

struct EvalRow {
  std::string id;
  int label = -1;
  int predicted = -1;
  double iou = 0.0;
  bool excluded = false;  // no attention map available
};

struct EvalReport {
  int k = 0;
  double q = 0.0;
  double mean_iou = 0.0;
  double accuracy = 0.0;
  int num_samples = 0;
  int num_excluded = 0;
  std::vector<EvalRow> rows;
};

// Per test image: predict, pool the top-k activation heatmaps at image
// resolution, compare against the base model's attention at quantile q.
// Attention comes from the cache; on a miss it is computed with `base` (for
// ClassSource::kPredicted the model's own predicted class is attributed) or,
// when base is null, the sample is excluded and counted.
EvalReport evaluate(const LvwModel& model, const BaseModel* base,
                    const std::vector<EvalSample>& samples, int k, double q,
                    ClassSource source, AttentionCache& cache);

struct QuantileSweepRow {
  double q = 0.0;
  double mean_iou = 0.0;
};
std::vector<QuantileSweepRow> quantile_sweep(const LvwModel& model, const BaseModel* base,
                                             const std::vector<EvalSample>& samples, int k,
                                             const std::vector<double>& qs,
                                             ClassSource source, AttentionCache& cache);

struct TopkSweepRow {
  int k = 0;
  double mean_iou = 0.0;
  double iou_std = 0.0;  // over random test subsets; 0 when subsets <= 1
  double accuracy = 0.0;
};
std::vector<TopkSweepRow> topk_sweep(const LvwModel& model, const BaseModel* base,
                                     const std::vector<EvalSample>& samples,
                                     const std::vector<int>& ks, double q,
                                     ClassSource source, AttentionCache& cache,
                                     int subsets = 3, double subset_fraction = 0.5,
                                     uint64_t subset_seed = 1);

}  // namespace lvw

#endif  // LVW_CORE_EVAL_HPP_
