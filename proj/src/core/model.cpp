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

#include "core/model.hpp"

#include <cmath>

#include "core/errors.hpp"

namespace lvw {

namespace {

NodePtr wrap(const Tensor& t, bool with_grad, std::vector<NodePtr>* leaves) {
  NodePtr n = with_grad ? leaf(t) : constant(t);
  if (leaves) leaves->push_back(n);
  return n;
}

void he_init(Tensor& w, int fan_in, Rng& rng) {
  double std = std::sqrt(2.0 / fan_in);
  for (int64_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
}

}  // namespace

// ---------------------------------------------------------------------------
// Trunk
// ---------------------------------------------------------------------------

Trunk::Trunk(TrunkConfig config) : config_(std::move(config)) {
  if (config_.channels.empty()) throw ConfigError("trunk needs at least one block");
  int cin = config_.in_channels;
  for (int cout : config_.channels) {
    if (cout <= 0) throw ConfigError("trunk channel count must be positive");
    weights_.push_back(Tensor({cout, cin, 3, 3}));
    biases_.push_back(Tensor({cout}));
    cin = cout;
  }
}

void Trunk::init(Rng& rng) {
  int cin = config_.in_channels;
  for (size_t i = 0; i < weights_.size(); ++i) {
    he_init(weights_[i], cin * 9, rng);
    biases_[i].fill(0.0);
    cin = config_.channels[i];
  }
}

std::vector<ParamRef> Trunk::params(const std::string& prefix) {
  std::vector<ParamRef> out;
  for (size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({prefix + ".conv" + std::to_string(i) + ".weight", &weights_[i]});
    out.push_back({prefix + ".conv" + std::to_string(i) + ".bias", &biases_[i]});
  }
  return out;
}

NodePtr Trunk::forward(const NodePtr& input, bool with_grad,
                       std::vector<NodePtr>* leaves) const {
  NodePtr x = input;
  for (size_t i = 0; i < weights_.size(); ++i) {
    NodePtr w = wrap(weights_[i], with_grad, leaves);
    NodePtr b = wrap(biases_[i], with_grad, leaves);
    x = maxpool2(relu(conv2d(x, w, b, /*pad=*/1)));
  }
  return x;
}

// ---------------------------------------------------------------------------
// Head initialization
// ---------------------------------------------------------------------------

Tensor init_head(int num_words, int num_classes) {
  if (num_words <= 0 || num_classes <= 0)
    throw ArgumentError("init_head: sizes must be positive");
  if (num_words % num_classes != 0)
    throw ArgumentError("init_head: word count must be divisible by class count");
  int per_class = num_words / num_classes;
  Tensor head = Tensor::full({num_words, num_classes}, -0.5);
  for (int c = 0; c < num_classes; ++c) {
    for (int j = c * per_class; j < (c + 1) * per_class; ++j) head.at2(j, c) = 1.0;
  }
  return head;
}

// ---------------------------------------------------------------------------
// LvwModel
// ---------------------------------------------------------------------------

LvwModel::LvwModel(LvwConfig config) : config_(std::move(config)), trunk_(config_.trunk) {
  if (config_.num_classes <= 0) throw ConfigError("model needs a positive class count");
  if (config_.words_per_class <= 0) throw ConfigError("words_per_class must be positive");
  if (config_.feature_channels <= 0) throw ConfigError("feature_channels must be positive");
  int res = config_.input_resolution;
  for (int i = 0; i < trunk_.num_blocks(); ++i) {
    if (res % 2 != 0) throw ConfigError("input resolution not divisible by trunk pooling");
    res /= 2;
  }
  if (res < 1) throw ConfigError("trunk pools the image away entirely");
  adapter_w_ = Tensor({config_.feature_channels, trunk_.out_channels(), 1, 1});
  adapter_b_ = Tensor({config_.feature_channels});
  words_ = Tensor({num_words(), config_.feature_channels});
  head_ = Tensor({num_words(), config_.num_classes});
  provenance_.assign(size_t(num_words()), WordProvenance{});
}

int LvwModel::grid_size() const {
  int res = config_.input_resolution;
  for (int i = 0; i < trunk_.num_blocks(); ++i) res /= 2;
  return res;
}

void LvwModel::init(Rng& rng) {
  trunk_.init(rng);
  he_init(adapter_w_, trunk_.out_channels(), rng);
  adapter_b_.fill(0.0);
  // Words start as random nonnegative unit vectors, matching the geometry
  // of the normalized patch features they will be compared against.
  int d = config_.feature_channels;
  for (int j = 0; j < num_words(); ++j) {
    double n2 = 0.0;
    for (int ch = 0; ch < d; ++ch) {
      double v = rng.uniform();
      words_.at2(j, ch) = v;
      n2 += v * v;
    }
    double inv = n2 > 0 ? 1.0 / std::sqrt(n2) : 0.0;
    for (int ch = 0; ch < d; ++ch) words_.at2(j, ch) *= inv;
  }
  head_ = init_head(num_words(), config_.num_classes);
  provenance_.assign(size_t(num_words()), WordProvenance{});
}

void LvwModel::init_trunk_from(const Trunk& other) {
  if (other.config().channels != config_.trunk.channels ||
      other.config().in_channels != config_.trunk.in_channels) {
    throw ConfigError("base trunk architecture does not match model trunk");
  }
  trunk_ = other;
}

std::vector<ParamRef> LvwModel::params() {
  std::vector<ParamRef> out = backbone_params();
  out.push_back({"words.values", &words_});
  out.push_back({"head.weight", &head_});
  return out;
}

std::vector<ParamRef> LvwModel::backbone_params() {
  std::vector<ParamRef> out = trunk_.params("trunk");
  out.push_back({"adapter.weight", &adapter_w_});
  out.push_back({"adapter.bias", &adapter_b_});
  return out;
}

std::vector<ParamRef> LvwModel::word_params() { return {{"words.values", &words_}}; }

std::vector<ParamRef> LvwModel::head_params() { return {{"head.weight", &head_}}; }

LvwForward LvwModel::forward(const Tensor& image, bool with_grad) const {
  if (image.rank() != 3 || image.dim(0) != config_.trunk.in_channels ||
      image.dim(1) != config_.input_resolution || image.dim(2) != config_.input_resolution) {
    throw ConfigError("input image shape " + image.shape_str() +
                      " does not match configured resolution");
  }
  LvwForward f;
  NodePtr x = constant(image);
  NodePtr t = trunk_.forward(x, with_grad, &f.param_leaves);
  NodePtr aw = wrap(adapter_w_, with_grad, &f.param_leaves);
  NodePtr ab = wrap(adapter_b_, with_grad, &f.param_leaves);
  // Unit-norm patches keep the squared distances in [0, 4], where the log
  // activation has usable dynamic range.
  f.feature = patch_l2_normalize(relu(conv2d(t, aw, ab, /*pad=*/0)));
  NodePtr words = wrap(words_, with_grad, &f.param_leaves);
  f.d2 = distance_grids(f.feature, words);
  f.act = log_activation(f.d2, config_.activation_eps);
  f.scores = spatial_max(f.act);
  NodePtr head = wrap(head_, with_grad, &f.param_leaves);
  f.logits = linear_nobias(f.scores, head);
  return f;
}

Tensor LvwModel::extract_features(const Tensor& image) const {
  return forward(image, /*with_grad=*/false).feature->value;
}

// ---------------------------------------------------------------------------
// BaseModel
// ---------------------------------------------------------------------------

BaseModel::BaseModel(BaseConfig config) : config_(std::move(config)), trunk_(config_.trunk) {
  if (config_.num_classes <= 0) throw ConfigError("base model needs a positive class count");
  fc_w_ = Tensor({trunk_.out_channels(), config_.num_classes});
  fc_b_ = Tensor({config_.num_classes});
}

void BaseModel::init(Rng& rng) {
  trunk_.init(rng);
  he_init(fc_w_, trunk_.out_channels(), rng);
  fc_b_.fill(0.0);
}

std::vector<ParamRef> BaseModel::params() {
  std::vector<ParamRef> out = trunk_.params("trunk");
  out.push_back({"fc.weight", &fc_w_});
  out.push_back({"fc.bias", &fc_b_});
  return out;
}

BaseForward BaseModel::forward(const Tensor& image, bool with_grad) const {
  if (image.rank() != 3 || image.dim(1) != config_.input_resolution ||
      image.dim(2) != config_.input_resolution) {
    throw ConfigError("input image shape " + image.shape_str() +
                      " does not match base model resolution");
  }
  BaseForward f;
  NodePtr x = constant(image);
  f.target_act = trunk_.forward(x, with_grad, &f.param_leaves);
  NodePtr w = wrap(fc_w_, with_grad, &f.param_leaves);
  NodePtr b = wrap(fc_b_, with_grad, &f.param_leaves);
  f.logits = linear(global_avg_pool(f.target_act), w, b);
  return f;
}

BaseForward BaseModel::forward_for_gradcam(const Tensor& image) const {
  BaseForward plain = forward(image, /*with_grad=*/false);
  BaseForward f;
  // Re-root the graph at the target activation so backward() only walks the
  // classifier head.
  f.target_act = leaf(plain.target_act->value);
  NodePtr w = constant(fc_w_);
  NodePtr b = constant(fc_b_);
  f.logits = linear(global_avg_pool(f.target_act), w, b);
  return f;
}

// ---------------------------------------------------------------------------
// standalone helpers
// ---------------------------------------------------------------------------

Tensor activation_grid(const Tensor& z, const Tensor& word, double eps) {
  if (word.rank() != 1) throw ArgumentError("activation_grid expects a 1x1xD word");
  Tensor bank({1, word.dim(0)});
  std::copy_n(word.data(), word.size(), bank.data());
  NodePtr grids = log_activation(distance_grids(constant(z), constant(bank)), eps);
  Tensor out({z.dim(1), z.dim(2)});
  std::copy_n(grids->value.data(), out.size(), out.data());
  return out;
}

Tensor similarity_scores(const Tensor& z, const Tensor& words, double eps) {
  if (words.rank() != 2 || words.dim(0) == 0)
    throw ArgumentError("similarity_scores: word bank must be a nonempty [M,D] tensor");
  return spatial_max(log_activation(distance_grids(constant(z), constant(words)), eps))->value;
}

Tensor predict(const Tensor& scores, const Tensor& head, bool use_sigmoid) {
  if (scores.rank() != 1 || head.rank() != 2 || head.dim(0) != scores.dim(0))
    throw ArgumentError("predict: dimension mismatch between scores and head");
  Tensor logits = linear_nobias(constant(scores), constant(head))->value;
  int c = logits.dim(0);
  Tensor out({c});
  if (use_sigmoid) {
    for (int i = 0; i < c; ++i) out[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  } else {
    double zmax = logits.max();
    double sum = 0.0;
    for (int i = 0; i < c; ++i) sum += std::exp(logits[i] - zmax);
    for (int i = 0; i < c; ++i) out[i] = std::exp(logits[i] - zmax) / sum;
  }
  return out;
}

int argmax_index(const Tensor& v) {
  if (v.size() == 0) throw ArgumentError("argmax of empty tensor");
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;  // ties resolve to the lowest index
  }
  return best;
}

}  // namespace lvw
