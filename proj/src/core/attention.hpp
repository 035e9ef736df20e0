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

#ifndef LVW_CORE_ATTENTION_HPP_
#define LVW_CORE_ATTENTION_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "core/model.hpp"
#include "core/tensor.hpp"

namespace lvw {

// Class-level attention map of the base model, min-max normalized to [0,1]
// at image resolution. degenerate flags an all-zero map (uniform or dead
// gradients).
struct AttentionMap {
  Tensor values;
  int class_id = -1;
  bool degenerate = false;
};

enum class ClassSource { kGroundTruth, kPredicted };

std::string class_source_name(ClassSource s);
ClassSource class_source_from_name(const std::string& name);

struct GradCamStats {
  int64_t maps_computed = 0;
};

// Grad-CAM at the base model's trunk output: channel weights are the spatial
// means of d(logit_class)/d(activation); the weighted activation sum is
// rectified, bilinearly upsampled to out_resolution and min-max normalized.
AttentionMap gradcam(const BaseModel& base, const Tensor& image, int class_id,
                     int out_resolution, GradCamStats* stats = nullptr);

// On-disk cache of attention maps keyed by image id. The manifest pins the
// base model hash, target layer, class source and resolution; a cache whose
// manifest does not match is rejected (treated as empty and rebuilt).
class AttentionCache {
 public:
  AttentionCache(std::string dir, std::string base_model_hash,
                 std::string class_source, int resolution);

  bool has(const std::string& image_id) const;
  AttentionMap get(const std::string& image_id) const;
  void put(const std::string& image_id, const AttentionMap& map);
  void save_manifest() const;
  size_t size() const { return entries_.size(); }

  static constexpr const char* kTargetLayer = "trunk.output";

 private:
  struct Entry {
    std::string file;
    int class_id = -1;
    bool degenerate = false;
  };

  std::string dir_;
  std::string base_hash_;
  std::string class_source_;
  int resolution_;
  std::map<std::string, Entry> entries_;
  int next_index_ = 0;
};

// Computes (or loads from cache) one attention map per image. labels are
// required for ClassSource::kGroundTruth; with kPredicted the base model's
// argmax class is attributed. Returns maps aligned with the input order.
std::vector<AttentionMap> attention_batch(const BaseModel& base,
                                          const std::vector<Tensor>& images,
                                          const std::vector<std::string>& image_ids,
                                          const std::vector<int>& labels,
                                          ClassSource source, AttentionCache& cache,
                                          GradCamStats* stats = nullptr);

}  // namespace lvw

#endif  // LVW_CORE_ATTENTION_HPP_
