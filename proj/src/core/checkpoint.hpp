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

#ifndef LVW_CORE_CHECKPOINT_HPP_
#define LVW_CORE_CHECKPOINT_HPP_

#include <map>
#include <string>
#include <vector>

#include "core/model.hpp"

namespace lvw {

// Checkpoint = versioned JSON manifest + one binary blob per named tensor.
// Saves are canonical: loading a checkpoint and saving it again produces
// byte-identical files.
struct CheckpointMeta {
  std::string kind;         // "lvw" or "base"
  int epoch = 0;
  std::string stage;        // e.g. "init", "stage1", "stage3", "final", "diagnostic"
  std::string rng_state;
  std::map<std::string, std::string> config;  // flat dotted-key snapshot
  std::vector<std::string> class_names;
};

void save_lvw_checkpoint(const std::string& dir, LvwModel& model,
                         const CheckpointMeta& meta);
LvwModel load_lvw_checkpoint(const std::string& dir, CheckpointMeta* meta = nullptr);

void save_base_checkpoint(const std::string& dir, BaseModel& model,
                          const CheckpointMeta& meta);
BaseModel load_base_checkpoint(const std::string& dir, CheckpointMeta* meta = nullptr);

// Content checksum over the manifest and all blobs (sorted by name).
std::string checkpoint_hash(const std::string& dir);

}  // namespace lvw

#endif  // LVW_CORE_CHECKPOINT_HPP_
