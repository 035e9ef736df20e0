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

#ifndef LVW_CORE_EXPLAIN_HPP_
#define LVW_CORE_EXPLAIN_HPP_

#include <string>
#include <vector>

#include "core/eval.hpp"
#include "core/image.hpp"
#include "core/model.hpp"
#include "core/tensor.hpp"

namespace lvw {

// Inclusive pixel rectangle; always inside the image with positive area.
struct BoundingBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;
};

// Tightest box containing every pixel >= threshold_fraction * max(heat).
// A constant map yields the full-image box.
BoundingBox heatmap_bounding_box(const Tensor& heat, double threshold_fraction);

// Global view of one word: the training image it activates most on, with
// the upsampled heatmap and its high-activation box.
struct WordVisualization {
  int word_id = -1;
  std::string image_id;
  int sample_index = -1;  // index into the training sample list
  int class_id = -1;      // class of the chosen training image
  double score = 0.0;
  Tensor heatmap;  // [R,R], min-max normalized
  BoundingBox box;
};

// One row of a local explanation: a word detected on the query image,
// linked back to its global (training-set) visualization.
struct ExplanationEntry {
  int word_id = -1;
  double score = 0.0;
  Tensor heatmap;  // on the query image, [R,R] normalized
  BoundingBox box;
  WordVisualization global;
  int provenance_class = -1;  // class of the word's projection source
  std::string provenance_image_id;
};

// Same pipeline for an image whose category was never trained on; carries
// the predicted (in-vocabulary) class and a disclaimer flag.
struct UnseenExplanation {
  int predicted_class = -1;
  bool out_of_vocabulary = true;
  std::vector<ExplanationEntry> entries;
};

// Mean similarity vector per category and their pairwise Pearson
// correlations. Zero-variance vectors make a pair undefined: the entry is
// NaN and listed in `missing` (diagonal stays 1).
struct CategorySimilarity {
  std::vector<Tensor> category_vectors;  // C vectors of length M
  Tensor matrix;                         // [C,C], symmetric, unit diagonal
  std::vector<std::pair<int, int>> missing;
};

// Caches training-set features and similarity scores once; all explanation
// artifacts are read-only over a trained checkpoint.
class ExplainContext {
 public:
  ExplainContext(const LvwModel& model, const std::vector<EvalSample>& training_set);

  const LvwModel& model() const { return model_; }
  const std::vector<EvalSample>& training_set() const { return training_set_; }
  const Tensor& training_feature(int index) const { return features_[size_t(index)]; }
  double training_score(int sample, int word) const {
    return score_matrix_.at2(sample, word);
  }

  WordVisualization global_visualization(int word_id, double box_threshold) const;
  std::vector<ExplanationEntry> local_explanation(const Tensor& image, int k,
                                                  double box_threshold) const;
  UnseenExplanation explain_unseen(const Tensor& image, int k,
                                   double box_threshold) const;
  CategorySimilarity category_similarity() const;

 private:
  const LvwModel& model_;
  const std::vector<EvalSample>& training_set_;
  std::vector<Tensor> features_;  // [D,H,W] per training image
  Tensor score_matrix_;           // [N,M]
};

// Single-shot conveniences over a throwaway context.
WordVisualization global_visualization(int word_id,
                                       const std::vector<EvalSample>& training_set,
                                       const LvwModel& model, double box_threshold);
std::vector<ExplanationEntry> local_explanation(const Tensor& image, const LvwModel& model,
                                                int k,
                                                const std::vector<EvalSample>& training_set,
                                                double box_threshold);
UnseenExplanation explain_unseen(const Tensor& image, const LvwModel& model, int k,
                                 const std::vector<EvalSample>& training_set,
                                 double box_threshold);
CategorySimilarity category_similarity_matrix(const std::vector<EvalSample>& training_set,
                                              const LvwModel& model);

// Rendering helper shared by the artifact emitters.
Image render_overlay_with_box(const Image& base, const Tensor& heat01,
                              const BoundingBox& box, double alpha);

}  // namespace lvw

#endif  // LVW_CORE_EXPLAIN_HPP_
