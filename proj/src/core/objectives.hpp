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

#ifndef LVW_CORE_OBJECTIVES_HPP_
#define LVW_CORE_OBJECTIVES_HPP_

#include <vector>

#include "core/model.hpp"
#include "core/tensor.hpp"

namespace lvw {

struct LossWeights {
  double alpha = 0.8;   // cluster term
  double beta = 10.0;   // attention alignment term
  double gamma = 1e-4;  // L1 on the head (last-layer stage)
};

// Indices of the k largest scores, descending; ties resolve to the lower
// word id.
std::vector<int> topk_indices(const Tensor& scores, int k);

// --- plain (evaluation) forms ----------------------------------------------

// Mean over samples of the smallest squared distance between any patch of
// the sample's feature map and any word.
double cluster_loss(const std::vector<Tensor>& features, const Tensor& words);

// Pointwise max of the k highest-scoring maps, then min-max normalized to
// [0,1]. All maps must share one shape. Optionally reports the chosen ids.
Tensor topk_combined_heatmap(const std::vector<Tensor>& maps, const Tensor& scores,
                             int k, std::vector<int>* chosen_ids = nullptr);

// Mean over the batch of the per-sample sum over pixels of the squared
// difference. Inputs are expected in [0,1] at a common resolution.
double alignment_loss(const std::vector<Tensor>& attention,
                      const std::vector<Tensor>& combined);

// Mean cross-entropy from raw class scores. use_sigmoid selects the
// sigmoid-renormalized convention; otherwise softmax.
double classification_loss(const std::vector<Tensor>& logits,
                           const std::vector<int>& labels, bool use_sigmoid);

double l1_penalty(const Tensor& head);

// --- per-sample training graphs ---------------------------------------------

struct SampleObjective {
  LvwForward fwd;
  NodePtr cls;
  NodePtr cluster;
  NodePtr align;  // null when no attention target was supplied
  NodePtr total;
};

// Stage-1 objective for one sample: L_cls + alpha*L_c + beta*L_a. The
// attention target must already be at grid resolution and min-max
// normalized; pass null to drop the alignment term (ablation).
SampleObjective stage1_sample_objective(const LvwModel& model, const Tensor& image,
                                        int label, const Tensor* attention_grid_target,
                                        const LossWeights& weights, int k,
                                        bool with_grad);

// Full-batch stage-1 objective value (mean of per-sample totals) with its
// components; evaluation only.
struct Stage1Value {
  double total = 0.0;
  double cls = 0.0;
  double cluster = 0.0;
  double align = 0.0;
};
Stage1Value stage1_objective(const LvwModel& model, const std::vector<Tensor>& images,
                             const std::vector<int>& labels,
                             const std::vector<const Tensor*>& attention_targets,
                             const LossWeights& weights, int k);

// Head-only objective for one sample on a frozen similarity vector.
struct HeadSampleObjective {
  NodePtr head_leaf;
  NodePtr cls;
};
HeadSampleObjective stage3_sample_objective(const Tensor& scores, int label,
                                            const Tensor& head, bool use_sigmoid);

// Full-batch stage-3 objective: mean cross-entropy + gamma * l1(head).
double stage3_objective(const std::vector<Tensor>& score_vectors,
                        const std::vector<int>& labels, const Tensor& head,
                        double gamma, bool use_sigmoid);

}  // namespace lvw

#endif  // LVW_CORE_OBJECTIVES_HPP_
