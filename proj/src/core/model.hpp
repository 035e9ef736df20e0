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

#ifndef LVW_CORE_MODEL_HPP_
#define LVW_CORE_MODEL_HPP_

#include <optional>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lvw {

// Named view of a model parameter; ordering is the serialization order.
struct ParamRef {
  std::string name;
  Tensor* value;
};

// Conv trunk: repeated [3x3 conv, ReLU, 2x2 maxpool] blocks. Input resolution
// must be divisible by 2^blocks.
struct TrunkConfig {
  int in_channels = 3;
  std::vector<int> channels;  // output channels per block
};

class Trunk {
 public:
  Trunk() = default;
  explicit Trunk(TrunkConfig config);

  void init(Rng& rng);
  std::vector<ParamRef> params(const std::string& prefix);
  int out_channels() const { return config_.channels.back(); }
  int num_blocks() const { return static_cast<int>(config_.channels.size()); }
  const TrunkConfig& config() const { return config_; }

  // Builds the trunk graph on top of `input`; appends the parameter leaves
  // (one per entry of params()) to `leaves`. with_grad selects whether the
  // leaves carry gradients.
  NodePtr forward(const NodePtr& input, bool with_grad,
                  std::vector<NodePtr>* leaves) const;

 private:
  TrunkConfig config_;
  std::vector<Tensor> weights_;  // [Cout,Cin,3,3] per block
  std::vector<Tensor> biases_;   // [Cout] per block
};

// Fresh fully connected head: for each class, its contiguous block of M/C
// words gets weight 1 and every other connection gets -0.5.
Tensor init_head(int num_words, int num_classes);

// Where a visual word came from after projection.
struct WordProvenance {
  bool projected = false;
  std::string image_id;
  int row = -1;
  int col = -1;
  int class_id = -1;
};

struct LvwConfig {
  int input_resolution = 64;
  TrunkConfig trunk;
  int feature_channels = 128;  // D, enforced by the 1x1 adapter conv
  int num_classes = 0;
  int words_per_class = 5;
  bool use_sigmoid_head = true;
  double activation_eps = 1e-4;
};

// One forward pass of the interpretable model. Nodes stay alive as long as
// the struct does, so gradients and intermediate maps can be read after
// backward().
struct LvwForward {
  NodePtr feature;   // [D,H,W]
  NodePtr d2;        // [M,H,W] squared patch distances
  NodePtr act;       // [M,H,W] activation grids
  NodePtr scores;    // [M]
  NodePtr logits;    // [C] pre-squash
  std::vector<NodePtr> param_leaves;  // aligned with LvwModel::params()
};

// Backbone f (trunk + 1x1 channel adapter), visual-words layer g and
// prediction head h.
class LvwModel {
 public:
  LvwModel() = default;
  explicit LvwModel(LvwConfig config);

  void init(Rng& rng);
  // Copies trunk weights from a compatible trained base model.
  void init_trunk_from(const Trunk& other);

  const LvwConfig& config() const { return config_; }
  int num_words() const { return config_.words_per_class * config_.num_classes; }
  int grid_size() const;  // spatial H (= W) of the feature map

  std::vector<ParamRef> params();           // all, serialization order
  std::vector<ParamRef> backbone_params();  // trunk + adapter
  std::vector<ParamRef> word_params();
  std::vector<ParamRef> head_params();

  Tensor& words() { return words_; }
  const Tensor& words() const { return words_; }
  Tensor& head() { return head_; }
  const Tensor& head() const { return head_; }
  Trunk& trunk() { return trunk_; }
  const Trunk& trunk() const { return trunk_; }
  std::vector<WordProvenance>& provenance() { return provenance_; }
  const std::vector<WordProvenance>& provenance() const { return provenance_; }

  LvwForward forward(const Tensor& image, bool with_grad) const;
  // Backbone-only eval pass (feature extraction contract).
  Tensor extract_features(const Tensor& image) const;

 private:
  LvwConfig config_;
  Trunk trunk_;
  Tensor adapter_w_;  // [D, trunk_out, 1, 1]
  Tensor adapter_b_;  // [D]
  Tensor words_;      // [M, D]
  Tensor head_;       // [M, C]
  std::vector<WordProvenance> provenance_;
};

// Plain classifier used as the interpretation target: trunk + global average
// pooling + fully connected layer. Grad-CAM attaches to the trunk output.
struct BaseConfig {
  int input_resolution = 64;
  TrunkConfig trunk;
  int num_classes = 0;
};

struct BaseForward {
  NodePtr target_act;  // trunk output [C,H,W]; Grad-CAM target layer
  NodePtr logits;      // [C]
  std::vector<NodePtr> param_leaves;
};

class BaseModel {
 public:
  BaseModel() = default;
  explicit BaseModel(BaseConfig config);

  void init(Rng& rng);
  const BaseConfig& config() const { return config_; }
  std::vector<ParamRef> params();
  Trunk& trunk() { return trunk_; }
  const Trunk& trunk() const { return trunk_; }

  BaseForward forward(const Tensor& image, bool with_grad) const;
  // Trunk evaluated without gradients, target activation wrapped as a leaf
  // so d(logit)/d(activation) is cheap to extract.
  BaseForward forward_for_gradcam(const Tensor& image) const;

 private:
  BaseConfig config_;
  Trunk trunk_;
  Tensor fc_w_;  // [trunk_out, C]
  Tensor fc_b_;  // [C]
};

// --- standalone evaluation-mode helpers ------------------------------------

// Activation grid act(d^2) of one word against every patch of z.
Tensor activation_grid(const Tensor& z, const Tensor& word, double eps);
// Per-word maxima of the activation grids: the similarity vector g(f(x)).
Tensor similarity_scores(const Tensor& z, const Tensor& words, double eps);
// Squashed class scores from a similarity vector.
Tensor predict(const Tensor& scores, const Tensor& head, bool use_sigmoid);
int argmax_index(const Tensor& v);

}  // namespace lvw

#endif  // LVW_CORE_MODEL_HPP_
