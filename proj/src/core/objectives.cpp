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

#include "core/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "core/errors.hpp"
#include "core/image.hpp"

namespace lvw {

std::vector<int> topk_indices(const Tensor& scores, int k) {
  int m = static_cast<int>(scores.size());
  if (k <= 0 || k > m) throw ArgumentError("topk_indices: k out of range");
  std::vector<int> ids(static_cast<size_t>(m), 0);
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(), [&scores](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  ids.resize(size_t(k));
  return ids;
}

// ---------------------------------------------------------------------------
// plain forms
// ---------------------------------------------------------------------------

double cluster_loss(const std::vector<Tensor>& features, const Tensor& words) {
  if (features.empty()) throw ArgumentError("cluster_loss: empty batch");
  if (words.rank() != 2 || words.dim(0) == 0)
    throw ArgumentError("cluster_loss: empty word bank");
  double acc = 0.0;
  for (const Tensor& z : features) {
    NodePtr d2 = distance_grids(constant(z), constant(words));
    acc += min_over_all(d2)->value[0];
  }
  return acc / double(features.size());
}

Tensor topk_combined_heatmap(const std::vector<Tensor>& maps, const Tensor& scores,
                             int k, std::vector<int>* chosen_ids) {
  if (maps.empty()) throw ArgumentError("topk_combined_heatmap: no maps");
  if (static_cast<int64_t>(maps.size()) != scores.size())
    throw ArgumentError("topk_combined_heatmap: maps/scores length mismatch");
  std::vector<int> ids = topk_indices(scores, k);
  Tensor combined = maps[size_t(ids[0])];
  for (size_t i = 1; i < ids.size(); ++i) {
    const Tensor& m = maps[size_t(ids[i])];
    if (!m.same_shape(combined))
      throw ArgumentError("topk_combined_heatmap: map shapes differ");
    for (int64_t p = 0; p < combined.size(); ++p) {
      if (m[p] > combined[p]) combined[p] = m[p];
    }
  }
  minmax_normalize(combined);
  if (chosen_ids) *chosen_ids = std::move(ids);
  return combined;
}

double alignment_loss(const std::vector<Tensor>& attention,
                      const std::vector<Tensor>& combined) {
  if (attention.empty() || attention.size() != combined.size())
    throw ArgumentError("alignment_loss: batch size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < attention.size(); ++i) {
    if (!attention[i].same_shape(combined[i]))
      throw ArgumentError("alignment_loss: resolution mismatch");
    for (int64_t p = 0; p < attention[i].size(); ++p) {
      double d = attention[i][p] - combined[i][p];
      acc += d * d;
    }
  }
  return acc / double(attention.size());
}

double classification_loss(const std::vector<Tensor>& logits,
                           const std::vector<int>& labels, bool use_sigmoid) {
  if (logits.empty() || logits.size() != labels.size())
    throw ArgumentError("classification_loss: batch size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < logits.size(); ++i) {
    NodePtr z = constant(logits[i]);
    NodePtr l = use_sigmoid ? sigmoid_cross_entropy(z, labels[i])
                            : softmax_cross_entropy(z, labels[i]);
    acc += l->value[0];
  }
  return acc / double(logits.size());
}

double l1_penalty(const Tensor& head) {
  double acc = 0.0;
  for (int64_t i = 0; i < head.size(); ++i) acc += std::fabs(head[i]);
  return acc;
}

// ---------------------------------------------------------------------------
// training graphs
// ---------------------------------------------------------------------------

SampleObjective stage1_sample_objective(const LvwModel& model, const Tensor& image,
                                        int label, const Tensor* attention_grid_target,
                                        const LossWeights& weights, int k,
                                        bool with_grad) {
  SampleObjective s;
  s.fwd = model.forward(image, with_grad);
  s.cls = model.config().use_sigmoid_head ? sigmoid_cross_entropy(s.fwd.logits, label)
                                          : softmax_cross_entropy(s.fwd.logits, label);
  s.cluster = min_over_all(s.fwd.d2);
  std::vector<NodePtr> terms = {s.cls, s.cluster};
  std::vector<double> coeffs = {1.0, weights.alpha};
  if (attention_grid_target != nullptr) {
    std::vector<int> ids = topk_indices(s.fwd.scores->value, k);
    NodePtr combined = minmax_norm(max_over_grids(gather_grids(s.fwd.act, ids)));
    s.align = squared_error_sum(combined, *attention_grid_target);
    terms.push_back(s.align);
    coeffs.push_back(weights.beta);
  }
  s.total = weighted_sum(terms, coeffs);
  return s;
}

Stage1Value stage1_objective(const LvwModel& model, const std::vector<Tensor>& images,
                             const std::vector<int>& labels,
                             const std::vector<const Tensor*>& attention_targets,
                             const LossWeights& weights, int k) {
  if (images.empty() || images.size() != labels.size() ||
      images.size() != attention_targets.size())
    throw ArgumentError("stage1_objective: batch size mismatch");
  Stage1Value v;
  for (size_t i = 0; i < images.size(); ++i) {
    SampleObjective s = stage1_sample_objective(model, images[i], labels[i],
                                                attention_targets[i], weights, k,
                                                /*with_grad=*/false);
    v.total += s.total->value[0];
    v.cls += s.cls->value[0];
    v.cluster += s.cluster->value[0];
    if (s.align) v.align += s.align->value[0];
  }
  double n = double(images.size());
  v.total /= n;
  v.cls /= n;
  v.cluster /= n;
  v.align /= n;
  return v;
}

HeadSampleObjective stage3_sample_objective(const Tensor& scores, int label,
                                            const Tensor& head, bool use_sigmoid) {
  HeadSampleObjective s;
  s.head_leaf = leaf(head);
  NodePtr logits = linear_nobias(constant(scores), s.head_leaf);
  s.cls = use_sigmoid ? sigmoid_cross_entropy(logits, label)
                      : softmax_cross_entropy(logits, label);
  return s;
}

double stage3_objective(const std::vector<Tensor>& score_vectors,
                        const std::vector<int>& labels, const Tensor& head,
                        double gamma, bool use_sigmoid) {
  if (score_vectors.empty() || score_vectors.size() != labels.size())
    throw ArgumentError("stage3_objective: batch size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < score_vectors.size(); ++i) {
    HeadSampleObjective s =
        stage3_sample_objective(score_vectors[i], labels[i], head, use_sigmoid);
    acc += s.cls->value[0];
  }
  return acc / double(score_vectors.size()) + gamma * l1_penalty(head);
}

}  // namespace lvw
