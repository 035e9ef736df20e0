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

#ifndef LVW_CORE_TRAIN_HPP_
#define LVW_CORE_TRAIN_HPP_

#include <map>
#include <string>
#include <vector>

#include "core/model.hpp"
#include "core/objectives.hpp"
#include "core/rng.hpp"

namespace lvw {

struct TrainingConfig {
  int epochs = 200;           // stage-1 epoch budget
  int project_every = 10;     // stage-1 epochs per projection cycle
  int stage3_epochs = 20;     // head-only epochs after each projection
  int warmup_epochs = 0;      // words-only epochs before the first cycle
  int batch_size = 32;
  double lr_backbone = 1e-4;
  double lr_other = 3e-3;
  int k = 10;                 // words pooled into the combined heatmap
  LossWeights weights;
  uint64_t seed = 1;
};

// One training sample with its precomputed flipped variant and alignment
// target at grid resolution. Empty attn_grid disables the alignment term for
// the sample (ablation runs leave all of them empty).
struct TrainSample {
  std::string id;
  int label = -1;
  Tensor image;          // [3,R,R]
  Tensor image_flipped;
  Tensor attn_grid;          // [H,W] min-max normalized
  Tensor attn_grid_flipped;
};

struct TraceRow {
  int epoch = 0;       // global epoch counter across all stages
  std::string stage;   // warmup | stage1 | stage3
  double loss_total = 0.0;
  double loss_cls = 0.0;
  double loss_cluster = 0.0;
  double loss_align = 0.0;
  double accuracy = 0.0;
};

// Adam with a per-parameter learning rate. Gradients are supplied already
// averaged over the batch.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<ParamRef> params, std::vector<double> lrs,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(const std::vector<Tensor>& grads);
  const std::vector<ParamRef>& params() const { return params_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<double> lrs_;
  std::vector<Tensor> m_, v_;
  double beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

// The cyclic training protocol: [stage-1 block -> word projection -> stage-3
// block] repeated until the stage-1 epoch budget is spent. Checkpoints are
// written after every cycle when an output directory is set.
class Trainer {
 public:
  Trainer(LvwModel model, TrainingConfig config, std::string out_dir = "",
          std::map<std::string, std::string> config_snapshot = {},
          std::vector<std::string> class_names = {});

  // Stage 1: head frozen, backbone + words trained on
  // L_cls + alpha*L_c + beta*L_a.
  void run_stage1(const std::vector<TrainSample>& data, int epochs);
  // Replaces every word by its nearest training patch and records
  // provenance.
  void project_words(const std::vector<TrainSample>& data);
  // Stage 3: backbone + words frozen, head trained on L_cls + gamma*|W|_1.
  void run_stage3(const std::vector<TrainSample>& data, int epochs);
  // Full protocol; returns the directory of the final checkpoint ("" when
  // no out_dir was configured).
  std::string full_protocol(const std::vector<TrainSample>& data);

  LvwModel& model() { return model_; }
  const TrainingConfig& config() const { return config_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  Rng& rng() { return rng_; }
  int cycles_done() const { return cycles_done_; }

 private:
  void run_word_warmup(const std::vector<TrainSample>& data, int epochs);
  void record(TraceRow row);
  void save_checkpoint(const std::string& name, const std::string& stage);
  [[noreturn]] void abort_numeric(const std::string& what);

  LvwModel model_;
  TrainingConfig config_;
  std::string out_dir_;
  std::map<std::string, std::string> config_snapshot_;
  std::vector<std::string> class_names_;
  Rng rng_;
  std::vector<TraceRow> trace_;
  int global_epoch_ = 0;
  int stage1_epochs_done_ = 0;
  int cycles_done_ = 0;
};

// Nearest-patch projection as a standalone operation (shared by Trainer and
// the CLI "project" command). Features must come from the current backbone
// in evaluation mode.
struct PatchSource {
  std::string image_id;
  int class_id = -1;
  Tensor feature;  // [D,H,W]
};
void project_word_bank(Tensor& words, std::vector<WordProvenance>& provenance,
                       const std::vector<PatchSource>& sources);

// Supervised fine-tuning of the base classifier (softmax cross-entropy,
// Adam, horizontal-flip augmentation). Returns the loss/accuracy trace.
struct BaseTrainSample {
  Tensor image;
  Tensor image_flipped;
  int label = -1;
};
std::vector<TraceRow> train_base_model(BaseModel& model,
                                       const std::vector<BaseTrainSample>& data,
                                       int epochs, int batch_size, double lr,
                                       uint64_t seed,
                                       const std::string& trace_csv_path = "");

}  // namespace lvw

#endif  // LVW_CORE_TRAIN_HPP_
