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

#include "core/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/parallel.hpp"

namespace fs = std::filesystem;

namespace lvw {

// ---------------------------------------------------------------------------
// AdamOptimizer
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::vector<ParamRef> params, std::vector<double> lrs,
                             double beta1, double beta2, double eps)
    : params_(std::move(params)),
      lrs_(std::move(lrs)),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps) {
  if (params_.size() != lrs_.size())
    throw ArgumentError("AdamOptimizer: one learning rate per parameter required");
  for (const auto& p : params_) {
    m_.push_back(Tensor(p.value->shape()));
    v_.push_back(Tensor(p.value->shape()));
  }
}

void AdamOptimizer::step(const std::vector<Tensor>& grads) {
  if (grads.size() != params_.size())
    throw ArgumentError("AdamOptimizer::step: gradient count mismatch");
  ++t_;
  double bc1 = 1.0 - std::pow(beta1_, double(t_));
  double bc2 = 1.0 - std::pow(beta2_, double(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& x = *params_[i].value;
    const Tensor& g = grads[i];
    if (!g.same_shape(x)) throw ArgumentError("AdamOptimizer::step: gradient shape mismatch");
    double lr = lrs_[i];
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (int64_t j = 0; j < x.size(); ++j) {
      m[j] = beta1_ * m[j] + (1.0 - beta1_) * g[j];
      v[j] = beta2_ * v[j] + (1.0 - beta2_) * g[j] * g[j];
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      x[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

// ---------------------------------------------------------------------------
// projection
// ---------------------------------------------------------------------------

void project_word_bank(Tensor& words, std::vector<WordProvenance>& provenance,
                       const std::vector<PatchSource>& sources) {
  if (sources.empty()) throw ArgumentError("project_word_bank: empty training set");
  int m = words.dim(0), d = words.dim(1);
  if (static_cast<int>(provenance.size()) != m)
    throw ArgumentError("project_word_bank: provenance size mismatch");

  Tensor new_words(words.shape());
  std::vector<WordProvenance> new_prov(static_cast<size_t>(m));
  parallel_for(m, [&](int64_t j) {
    const double* word = words.data() + size_t(j) * d;
    double best = std::numeric_limits<double>::infinity();
    int best_src = -1, best_row = -1, best_col = -1;
    for (size_t s = 0; s < sources.size(); ++s) {
      const Tensor& z = sources[s].feature;
      int h = z.dim(1), w = z.dim(2), hw = h * w;
      for (int p = 0; p < hw; ++p) {
        double acc = 0.0;
        const double* zp = z.data() + p;
        for (int ch = 0; ch < d; ++ch) {
          double diff = zp[size_t(ch) * hw] - word[ch];
          acc += diff * diff;
          if (acc >= best) break;
        }
        if (acc < best) {  // strict: first minimum wins
          best = acc;
          best_src = static_cast<int>(s);
          best_row = p / w;
          best_col = p % w;
        }
      }
    }
    const Tensor& z = sources[size_t(best_src)].feature;
    int hw = z.dim(1) * z.dim(2);
    int p = best_row * z.dim(2) + best_col;
    double* dst = new_words.data() + size_t(j) * d;
    for (int ch = 0; ch < d; ++ch) dst[ch] = z.data()[size_t(ch) * hw + p];
    new_prov[size_t(j)] = {true, sources[size_t(best_src)].image_id, best_row, best_col,
                           sources[size_t(best_src)].class_id};
  });
  words = std::move(new_words);
  provenance = std::move(new_prov);
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

Trainer::Trainer(LvwModel model, TrainingConfig config, std::string out_dir,
                 std::map<std::string, std::string> config_snapshot,
                 std::vector<std::string> class_names)
    : model_(std::move(model)),
      config_(std::move(config)),
      out_dir_(std::move(out_dir)),
      config_snapshot_(std::move(config_snapshot)),
      class_names_(std::move(class_names)),
      rng_(config_.seed) {
  if (config_.epochs < 0 || config_.project_every <= 0)
    throw ConfigError("training schedule: epochs must be >= 0, project_every > 0");
  if (config_.batch_size <= 0) throw ConfigError("batch_size must be positive");
  // lr = 0 is allowed (degenerate zero-step runs); negatives are not.
  if (config_.lr_backbone < 0 || config_.lr_other < 0)
    throw ConfigError("learning rates must be nonnegative");
  if (config_.k <= 0 || config_.k > model_.num_words())
    throw ConfigError("k must be in [1, M]");
  if (!out_dir_.empty()) fs::create_directories(out_dir_);
}

void Trainer::record(TraceRow row) {
  trace_.push_back(row);
  if (out_dir_.empty()) return;
  fs::path path = fs::path(out_dir_) / "trace.csv";
  bool fresh = !fs::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to trace: " + path.string());
  if (fresh) out << "epoch,stage,loss_total,loss_cls,loss_cluster,loss_align,accuracy\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.epoch,
                row.stage.c_str(), row.loss_total, row.loss_cls, row.loss_cluster,
                row.loss_align, row.accuracy);
  out << buf;
}

void Trainer::save_checkpoint(const std::string& name, const std::string& stage) {
  if (out_dir_.empty()) return;
  CheckpointMeta meta;
  meta.kind = "lvw";
  meta.epoch = stage1_epochs_done_;
  meta.stage = stage;
  meta.rng_state = rng_.serialize();
  meta.config = config_snapshot_;
  meta.class_names = class_names_;
  save_lvw_checkpoint((fs::path(out_dir_) / name).string(), model_, meta);
}

void Trainer::abort_numeric(const std::string& what) {
  save_checkpoint("checkpoint_diagnostic", "diagnostic");
  throw NumericError(what + (out_dir_.empty()
                                 ? ""
                                 : "; diagnostic snapshot written to " + out_dir_));
}

namespace {

struct BatchStats {
  double total = 0.0, cls = 0.0, cluster = 0.0, align = 0.0;
  int correct = 0;
};

}  // namespace

void Trainer::run_stage1(const std::vector<TrainSample>& data, int epochs) {
  if (data.empty()) throw ArgumentError("run_stage1: empty training set");

  // Head excluded: frozen during this stage.
  std::vector<ParamRef> trainable = model_.backbone_params();
  std::vector<double> lrs(trainable.size(), config_.lr_backbone);
  for (const auto& p : model_.word_params()) {
    trainable.push_back(p);
    lrs.push_back(config_.lr_other);
  }
  AdamOptimizer opt(trainable, lrs);

  // Leaf order in LvwForward matches params(); map trainable entries to it.
  std::vector<ParamRef> all = model_.params();
  std::vector<size_t> leaf_index;
  for (const auto& t : trainable) {
    for (size_t i = 0; i < all.size(); ++i) {
      if (all[i].name == t.name) {
        leaf_index.push_back(i);
        break;
      }
    }
  }

  int n = static_cast<int>(data.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);

    BatchStats epoch_stats;
    for (int start = 0; start < n; start += config_.batch_size) {
      int bsz = std::min(config_.batch_size, n - start);
      std::vector<char> flip(static_cast<size_t>(bsz));
      for (int b = 0; b < bsz; ++b) flip[size_t(b)] = rng_.bernoulli(0.5) ? 1 : 0;

      std::vector<std::vector<Tensor>> sample_grads(static_cast<size_t>(bsz));
      std::vector<BatchStats> sample_stats(static_cast<size_t>(bsz));
      try {
        parallel_for(bsz, [&](int64_t b) {
          const TrainSample& s = data[size_t(order[size_t(start + b)])];
          bool flipped = flip[size_t(b)] != 0;
          const Tensor& image = flipped ? s.image_flipped : s.image;
          const Tensor* attn = nullptr;
          if (s.attn_grid.size() > 0) attn = flipped ? &s.attn_grid_flipped : &s.attn_grid;
          SampleObjective obj = stage1_sample_objective(model_, image, s.label, attn,
                                                        config_.weights, config_.k,
                                                        /*with_grad=*/true);
          backward(obj.total);
          auto& grads = sample_grads[size_t(b)];
          grads.reserve(leaf_index.size());
          for (size_t li : leaf_index) {
            Node& leafn = *obj.fwd.param_leaves[li];
            grads.push_back(leafn.grad_allocated ? leafn.grad
                                                 : Tensor(leafn.value.shape()));
          }
          BatchStats& st = sample_stats[size_t(b)];
          st.total = obj.total->value[0];
          st.cls = obj.cls->value[0];
          st.cluster = obj.cluster->value[0];
          st.align = obj.align ? obj.align->value[0] : 0.0;
          st.correct = argmax_index(obj.fwd.logits->value) == s.label ? 1 : 0;
        });
      } catch (const NumericError& e) {
        abort_numeric(e.what());
      }

      // Deterministic reduction in batch order.
      std::vector<Tensor> grads;
      for (size_t i = 0; i < leaf_index.size(); ++i)
        grads.push_back(Tensor(trainable[i].value->shape()));
      double batch_total = 0.0;
      for (int b = 0; b < bsz; ++b) {
        for (size_t i = 0; i < grads.size(); ++i) {
          const Tensor& g = sample_grads[size_t(b)][i];
          for (int64_t j = 0; j < g.size(); ++j) grads[i][j] += g[j];
        }
        batch_total += sample_stats[size_t(b)].total;
        epoch_stats.total += sample_stats[size_t(b)].total;
        epoch_stats.cls += sample_stats[size_t(b)].cls;
        epoch_stats.cluster += sample_stats[size_t(b)].cluster;
        epoch_stats.align += sample_stats[size_t(b)].align;
        epoch_stats.correct += sample_stats[size_t(b)].correct;
      }
      if (!std::isfinite(batch_total)) abort_numeric("NaN/Inf stage-1 loss");
      for (auto& g : grads) {
        for (int64_t j = 0; j < g.size(); ++j) g[j] /= bsz;
      }
      opt.step(grads);
    }

    ++global_epoch_;
    ++stage1_epochs_done_;
    record({global_epoch_, "stage1", epoch_stats.total / n, epoch_stats.cls / n,
            epoch_stats.cluster / n, epoch_stats.align / n,
            double(epoch_stats.correct) / n});
  }
}

void Trainer::run_word_warmup(const std::vector<TrainSample>& data, int epochs) {
  // Same objective as stage 1 but only the words move.
  std::vector<ParamRef> trainable = model_.word_params();
  std::vector<double> lrs(trainable.size(), config_.lr_other);
  AdamOptimizer opt(trainable, lrs);
  std::vector<ParamRef> all = model_.params();
  size_t words_leaf = 0;
  for (size_t i = 0; i < all.size(); ++i) {
    if (all[i].name == "words.values") words_leaf = i;
  }

  int n = static_cast<int>(data.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    BatchStats epoch_stats;
    for (int start = 0; start < n; start += config_.batch_size) {
      int bsz = std::min(config_.batch_size, n - start);
      std::vector<char> flip(static_cast<size_t>(bsz));
      for (int b = 0; b < bsz; ++b) flip[size_t(b)] = rng_.bernoulli(0.5) ? 1 : 0;
      std::vector<Tensor> sample_grads(static_cast<size_t>(bsz));
      std::vector<BatchStats> sample_stats(static_cast<size_t>(bsz));
      parallel_for(bsz, [&](int64_t b) {
        const TrainSample& s = data[size_t(order[size_t(start + b)])];
        bool flipped = flip[size_t(b)] != 0;
        const Tensor& image = flipped ? s.image_flipped : s.image;
        const Tensor* attn = nullptr;
        if (s.attn_grid.size() > 0) attn = flipped ? &s.attn_grid_flipped : &s.attn_grid;
        SampleObjective obj = stage1_sample_objective(model_, image, s.label, attn,
                                                      config_.weights, config_.k, true);
        backward(obj.total);
        Node& leafn = *obj.fwd.param_leaves[words_leaf];
        sample_grads[size_t(b)] =
            leafn.grad_allocated ? leafn.grad : Tensor(leafn.value.shape());
        sample_stats[size_t(b)].total = obj.total->value[0];
        sample_stats[size_t(b)].correct =
            argmax_index(obj.fwd.logits->value) == s.label ? 1 : 0;
      });
      Tensor grad(model_.words().shape());
      double batch_total = 0.0;
      for (int b = 0; b < bsz; ++b) {
        const Tensor& g = sample_grads[size_t(b)];
        for (int64_t j = 0; j < g.size(); ++j) grad[j] += g[j];
        batch_total += sample_stats[size_t(b)].total;
        epoch_stats.total += sample_stats[size_t(b)].total;
        epoch_stats.correct += sample_stats[size_t(b)].correct;
      }
      if (!std::isfinite(batch_total)) abort_numeric("NaN/Inf warmup loss");
      for (int64_t j = 0; j < grad.size(); ++j) grad[j] /= bsz;
      opt.step({grad});
    }
    ++global_epoch_;
    record({global_epoch_, "warmup", epoch_stats.total / n, 0.0, 0.0, 0.0,
            double(epoch_stats.correct) / n});
  }
}

void Trainer::project_words(const std::vector<TrainSample>& data) {
  if (data.empty()) throw ArgumentError("project_words: empty training set");
  std::vector<PatchSource> sources(data.size());
  parallel_for(static_cast<int64_t>(data.size()), [&](int64_t i) {
    sources[size_t(i)].image_id = data[size_t(i)].id;
    sources[size_t(i)].class_id = data[size_t(i)].label;
    sources[size_t(i)].feature = model_.extract_features(data[size_t(i)].image);
  });
  project_word_bank(model_.words(), model_.provenance(), sources);
}

void Trainer::run_stage3(const std::vector<TrainSample>& data, int epochs) {
  if (data.empty()) throw ArgumentError("run_stage3: empty training set");

  // Backbone and words frozen: similarity vectors are fixed, compute once.
  int n = static_cast<int>(data.size());
  std::vector<Tensor> scores(static_cast<size_t>(n));
  parallel_for(n, [&](int64_t i) {
    LvwForward f = model_.forward(data[size_t(i)].image, /*with_grad=*/false);
    scores[size_t(i)] = f.scores->value;
  });

  bool use_sigmoid = model_.config().use_sigmoid_head;
  double gamma = config_.weights.gamma;
  AdamOptimizer opt(model_.head_params(), {config_.lr_other});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order);
    double epoch_cls = 0.0;
    int correct = 0;
    for (int start = 0; start < n; start += config_.batch_size) {
      int bsz = std::min(config_.batch_size, n - start);
      Tensor grad(model_.head().shape());
      double batch_cls = 0.0;
      for (int b = 0; b < bsz; ++b) {
        const int i = order[size_t(start + b)];
        HeadSampleObjective obj = stage3_sample_objective(
            scores[size_t(i)], data[size_t(i)].label, model_.head(), use_sigmoid);
        backward(obj.cls);
        const Tensor& g = obj.head_leaf->ensure_grad();
        for (int64_t j = 0; j < g.size(); ++j) grad[j] += g[j];
        batch_cls += obj.cls->value[0];
        Tensor cls_scores = predict(scores[size_t(i)], model_.head(), use_sigmoid);
        if (argmax_index(cls_scores) == data[size_t(i)].label) ++correct;
      }
      if (!std::isfinite(batch_cls)) abort_numeric("NaN/Inf stage-3 loss");
      for (int64_t j = 0; j < grad.size(); ++j) {
        grad[j] /= bsz;
        double w = model_.head()[j];
        grad[j] += gamma * (w > 0.0 ? 1.0 : (w < 0.0 ? -1.0 : 0.0));
      }
      opt.step({grad});
      epoch_cls += batch_cls;
    }
    ++global_epoch_;
    double mean_cls = epoch_cls / n;
    record({global_epoch_, "stage3", mean_cls + gamma * l1_penalty(model_.head()),
            mean_cls, 0.0, 0.0, double(correct) / n});
  }
}

std::vector<TraceRow> train_base_model(BaseModel& model,
                                       const std::vector<BaseTrainSample>& data,
                                       int epochs, int batch_size, double lr,
                                       uint64_t seed, const std::string& trace_csv_path) {
  if (data.empty()) throw ArgumentError("train_base_model: empty training set");
  if (batch_size <= 0 || lr <= 0.0) throw ConfigError("bad base training settings");

  std::vector<ParamRef> params = model.params();
  AdamOptimizer opt(params, std::vector<double>(params.size(), lr));
  Rng rng(seed);
  int n = static_cast<int>(data.size());
  std::vector<TraceRow> trace;

  std::ofstream csv;
  if (!trace_csv_path.empty()) {
    bool fresh = !fs::exists(trace_csv_path);
    csv.open(trace_csv_path, std::ios::app);
    if (!csv) throw IoError("cannot append to " + trace_csv_path);
    if (fresh) csv << "epoch,stage,loss_total,loss_cls,loss_cluster,loss_align,accuracy\n";
  }

  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    double epoch_loss = 0.0;
    int correct = 0;
    for (int start = 0; start < n; start += batch_size) {
      int bsz = std::min(batch_size, n - start);
      std::vector<char> flip(static_cast<size_t>(bsz));
      for (int b = 0; b < bsz; ++b) flip[size_t(b)] = rng.bernoulli(0.5) ? 1 : 0;
      std::vector<std::vector<Tensor>> sample_grads(static_cast<size_t>(bsz));
      std::vector<double> sample_loss(static_cast<size_t>(bsz));
      std::vector<char> sample_correct(static_cast<size_t>(bsz));
      parallel_for(bsz, [&](int64_t b) {
        const BaseTrainSample& s = data[size_t(order[size_t(start + b)])];
        const Tensor& image = flip[size_t(b)] ? s.image_flipped : s.image;
        BaseForward f = model.forward(image, /*with_grad=*/true);
        NodePtr loss = softmax_cross_entropy(f.logits, s.label);
        backward(loss);
        auto& grads = sample_grads[size_t(b)];
        grads.reserve(f.param_leaves.size());
        for (auto& leafp : f.param_leaves) {
          grads.push_back(leafp->grad_allocated ? leafp->grad
                                                : Tensor(leafp->value.shape()));
        }
        sample_loss[size_t(b)] = loss->value[0];
        sample_correct[size_t(b)] = argmax_index(f.logits->value) == s.label ? 1 : 0;
      });
      std::vector<Tensor> grads;
      for (const auto& p : params) grads.push_back(Tensor(p.value->shape()));
      double batch_loss = 0.0;
      for (int b = 0; b < bsz; ++b) {
        for (size_t i = 0; i < grads.size(); ++i) {
          const Tensor& g = sample_grads[size_t(b)][i];
          for (int64_t j = 0; j < g.size(); ++j) grads[i][j] += g[j];
        }
        batch_loss += sample_loss[size_t(b)];
        correct += sample_correct[size_t(b)];
      }
      if (!std::isfinite(batch_loss)) throw NumericError("NaN/Inf base-model loss");
      for (auto& g : grads) {
        for (int64_t j = 0; j < g.size(); ++j) g[j] /= bsz;
      }
      opt.step(grads);
      epoch_loss += batch_loss;
    }
    TraceRow row{epoch + 1, "base", epoch_loss / n, epoch_loss / n, 0.0, 0.0,
                 double(correct) / n};
    trace.push_back(row);
    if (csv.is_open()) {
      char buf[256];
      std::snprintf(buf, sizeof(buf), "%d,%s,%.9g,%.9g,%.9g,%.9g,%.9g\n", row.epoch,
                    row.stage.c_str(), row.loss_total, row.loss_cls, row.loss_cluster,
                    row.loss_align, row.accuracy);
      csv << buf;
    }
  }
  return trace;
}

std::string Trainer::full_protocol(const std::vector<TrainSample>& data) {
  if (data.empty()) throw ArgumentError("full_protocol: empty training set");
  if (config_.warmup_epochs > 0) run_word_warmup(data, config_.warmup_epochs);

  int remaining = config_.epochs;
  while (remaining > 0) {
    int block = std::min(config_.project_every, remaining);
    run_stage1(data, block);
    remaining -= block;
    project_words(data);
    run_stage3(data, config_.stage3_epochs);
    ++cycles_done_;
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoint_cycle_%03d", cycles_done_);
    save_checkpoint(name, "stage3");
  }
  save_checkpoint("checkpoint_final", "final");
  return out_dir_.empty() ? "" : (fs::path(out_dir_) / "checkpoint_final").string();
}

}  // namespace lvw
