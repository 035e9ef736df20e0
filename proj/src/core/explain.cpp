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

#include "core/explain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "core/errors.hpp"
#include "core/objectives.hpp"
#include "core/parallel.hpp"

namespace lvw {

BoundingBox heatmap_bounding_box(const Tensor& heat, double threshold_fraction) {
  if (heat.rank() != 2 || heat.size() == 0)
    throw ArgumentError("heatmap_bounding_box expects a nonempty 2-d map");
  if (threshold_fraction < 0.0 || threshold_fraction > 1.0)
    throw ArgumentError("box threshold fraction must be in [0,1]");
  int h = heat.dim(0), w = heat.dim(1);
  double cut = threshold_fraction * heat.max();
  int r0 = h, c0 = w, r1 = -1, c1 = -1;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (heat.at2(r, c) >= cut) {
        r0 = std::min(r0, r);
        c0 = std::min(c0, c);
        r1 = std::max(r1, r);
        c1 = std::max(c1, c);
      }
    }
  }
  // the maximum itself always passes the cut
  return BoundingBox{r0, c0, r1, c1};
}

namespace {

// Upsampled, normalized heatmap of one word on an already extracted feature
// map.
Tensor word_heatmap(const Tensor& feature, const LvwModel& model, int word_id,
                    int resolution) {
  Tensor word({model.config().feature_channels});
  std::copy_n(model.words().data() + size_t(word_id) * word.size(), word.size(),
              word.data());
  Tensor grid = activation_grid(feature, word, model.config().activation_eps);
  Tensor up = resample_bilinear(grid, resolution, resolution);
  minmax_normalize(up);
  return up;
}

}  // namespace

// ---------------------------------------------------------------------------
// ExplainContext
// ---------------------------------------------------------------------------

ExplainContext::ExplainContext(const LvwModel& model,
                               const std::vector<EvalSample>& training_set)
    : model_(model), training_set_(training_set) {
  if (training_set_.empty()) throw ArgumentError("ExplainContext: empty training set");
  int n = static_cast<int>(training_set_.size());
  features_.resize(size_t(n));
  score_matrix_ = Tensor({n, model_.num_words()});
  parallel_for(n, [&](int64_t i) {
    features_[size_t(i)] = model_.extract_features(training_set_[size_t(i)].image);
    Tensor s = similarity_scores(features_[size_t(i)], model_.words(),
                                 model_.config().activation_eps);
    std::copy_n(s.data(), s.size(),
                score_matrix_.data() + size_t(i) * size_t(model_.num_words()));
  });
}

WordVisualization ExplainContext::global_visualization(int word_id,
                                                       double box_threshold) const {
  if (word_id < 0 || word_id >= model_.num_words())
    throw ArgumentError("global_visualization: word id out of range");
  int n = static_cast<int>(training_set_.size());
  int best = 0;
  for (int i = 1; i < n; ++i) {
    if (score_matrix_.at2(i, word_id) > score_matrix_.at2(best, word_id)) best = i;
  }
  WordVisualization vis;
  vis.word_id = word_id;
  vis.sample_index = best;
  vis.image_id = training_set_[size_t(best)].id;
  vis.class_id = training_set_[size_t(best)].label;
  vis.score = score_matrix_.at2(best, word_id);
  vis.heatmap = word_heatmap(features_[size_t(best)], model_, word_id,
                             model_.config().input_resolution);
  vis.box = heatmap_bounding_box(vis.heatmap, box_threshold);
  return vis;
}

std::vector<ExplanationEntry> ExplainContext::local_explanation(
    const Tensor& image, int k, double box_threshold) const {
  if (k <= 0 || k > model_.num_words())
    throw ArgumentError("local_explanation: k out of range");
  Tensor feature = model_.extract_features(image);
  Tensor scores =
      similarity_scores(feature, model_.words(), model_.config().activation_eps);
  std::vector<int> ids = topk_indices(scores, k);

  std::vector<ExplanationEntry> out;
  for (int word_id : ids) {
    ExplanationEntry e;
    e.word_id = word_id;
    e.score = scores[word_id];
    e.heatmap = word_heatmap(feature, model_, word_id, model_.config().input_resolution);
    e.box = heatmap_bounding_box(e.heatmap, box_threshold);
    e.global = global_visualization(word_id, box_threshold);
    const WordProvenance& prov = model_.provenance()[size_t(word_id)];
    if (prov.projected) {
      e.provenance_class = prov.class_id;
      e.provenance_image_id = prov.image_id;
    } else {
      // unprojected bank: fall back to the strongest training image
      e.provenance_class = e.global.class_id;
      e.provenance_image_id = e.global.image_id;
    }
    out.push_back(std::move(e));
  }
  return out;
}

UnseenExplanation ExplainContext::explain_unseen(const Tensor& image, int k,
                                                 double box_threshold) const {
  UnseenExplanation out;
  Tensor feature = model_.extract_features(image);
  Tensor scores =
      similarity_scores(feature, model_.words(), model_.config().activation_eps);
  out.predicted_class =
      argmax_index(predict(scores, model_.head(), model_.config().use_sigmoid_head));
  out.out_of_vocabulary = true;
  out.entries = local_explanation(image, k, box_threshold);
  return out;
}

CategorySimilarity ExplainContext::category_similarity() const {
  int c = model_.config().num_classes;
  int m = model_.num_words();
  int n = static_cast<int>(training_set_.size());

  std::vector<Tensor> sums(size_t(c), Tensor({m}));
  std::vector<int> counts(size_t(c), 0);
  for (int i = 0; i < n; ++i) {
    int label = training_set_[size_t(i)].label;
    if (label < 0 || label >= c)
      throw ArgumentError("category_similarity: label out of range");
    for (int j = 0; j < m; ++j) sums[size_t(label)][j] += score_matrix_.at2(i, j);
    ++counts[size_t(label)];
  }

  CategorySimilarity out;
  for (int cls = 0; cls < c; ++cls) {
    Tensor v({m});
    if (counts[size_t(cls)] > 0) {
      for (int j = 0; j < m; ++j) v[j] = sums[size_t(cls)][j] / counts[size_t(cls)];
    }
    out.category_vectors.push_back(std::move(v));
  }

  std::vector<double> means(static_cast<size_t>(c)), stds(static_cast<size_t>(c));
  for (int cls = 0; cls < c; ++cls) {
    const Tensor& v = out.category_vectors[size_t(cls)];
    double mu = v.sum() / m;
    double var = 0.0;
    for (int j = 0; j < m; ++j) var += (v[j] - mu) * (v[j] - mu);
    means[size_t(cls)] = mu;
    stds[size_t(cls)] = std::sqrt(var);
  }
  out.matrix = Tensor({c, c});
  for (int a = 0; a < c; ++a) {
    out.matrix.at2(a, a) = 1.0;
    for (int b = a + 1; b < c; ++b) {
      double value;
      if (stds[size_t(a)] == 0.0 || stds[size_t(b)] == 0.0) {
        value = std::numeric_limits<double>::quiet_NaN();
        out.missing.emplace_back(a, b);
      } else {
        double cov = 0.0;
        for (int j = 0; j < m; ++j) {
          cov += (out.category_vectors[size_t(a)][j] - means[size_t(a)]) *
                 (out.category_vectors[size_t(b)][j] - means[size_t(b)]);
        }
        value = cov / (stds[size_t(a)] * stds[size_t(b)]);
      }
      out.matrix.at2(a, b) = value;
      out.matrix.at2(b, a) = value;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// single-shot wrappers
// ---------------------------------------------------------------------------

WordVisualization global_visualization(int word_id,
                                       const std::vector<EvalSample>& training_set,
                                       const LvwModel& model, double box_threshold) {
  return ExplainContext(model, training_set).global_visualization(word_id, box_threshold);
}

std::vector<ExplanationEntry> local_explanation(const Tensor& image, const LvwModel& model,
                                                int k,
                                                const std::vector<EvalSample>& training_set,
                                                double box_threshold) {
  return ExplainContext(model, training_set).local_explanation(image, k, box_threshold);
}

UnseenExplanation explain_unseen(const Tensor& image, const LvwModel& model, int k,
                                 const std::vector<EvalSample>& training_set,
                                 double box_threshold) {
  return ExplainContext(model, training_set).explain_unseen(image, k, box_threshold);
}

CategorySimilarity category_similarity_matrix(const std::vector<EvalSample>& training_set,
                                              const LvwModel& model) {
  return ExplainContext(model, training_set).category_similarity();
}

Image render_overlay_with_box(const Image& base, const Tensor& heat01,
                              const BoundingBox& box, double alpha) {
  Image out = render_heatmap_overlay(base, heat01, alpha);
  draw_box(out, box.row0, box.col0, box.row1, box.col1, 255, 255, 0);
  return out;
}

}  // namespace lvw
