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

#ifndef LVW_CORE_EXPERIMENT_HPP_
#define LVW_CORE_EXPERIMENT_HPP_

#include <string>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/eval.hpp"
#include "core/train.hpp"

namespace lvw {

// Experiment orchestration: the command implementations behind the CLI and
// the C API. Every run takes its settings from the flat config (flags are
// applied as overrides before running), holds a lock on the output
// directory for its duration and leaves a run manifest sufficient to replay
// the command.
class Experiment {
 public:
  Experiment() = default;

  void load_config_file(const std::string& path);
  void set_option(const std::string& key, const std::string& value);
  const Config& config() const { return config_; }
  Config& config() { return config_; }

  // Command entry points; each returns the main artifact directory.
  std::string run_finetune_base();
  std::string run_train();
  std::string run_project();
  std::string run_evaluate();
  std::string run_sweep();
  std::string run_explain();
  std::string run_explain_unseen();
  std::string run_synth();

  // Shared helpers (also used by tests and the acceptance suite).
  LoadedDataset load_dataset() const;
  static std::vector<EvalSample> to_eval_samples(const std::vector<DatasetItem>& items);
  static std::vector<TrainSample> build_train_samples(
      const std::vector<DatasetItem>& items,
      const std::vector<AttentionMap>* attention, int grid_size);

 private:
  std::string output_dir(const std::string& subdir) const;
  void write_run_manifest(const std::string& dir, const std::string& command,
                          const std::map<std::string, std::string>& inputs,
                          const std::map<std::string, std::string>& outputs) const;

  Config config_;
};

}  // namespace lvw

#endif  // LVW_CORE_EXPERIMENT_HPP_
