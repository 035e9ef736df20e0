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

#include "core/attention.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/image.hpp"
#include "core/parallel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lvw {

std::string class_source_name(ClassSource s) {
  return s == ClassSource::kGroundTruth ? "ground_truth" : "predicted";
}

ClassSource class_source_from_name(const std::string& name) {
  if (name == "ground_truth") return ClassSource::kGroundTruth;
  if (name == "predicted") return ClassSource::kPredicted;
  throw ConfigError("unknown class source: " + name);
}

AttentionMap gradcam(const BaseModel& base, const Tensor& image, int class_id,
                     int out_resolution, GradCamStats* stats) {
  if (class_id < 0 || class_id >= base.config().num_classes)
    throw ArgumentError("gradcam: class id out of range");
  if (stats) ++stats->maps_computed;

  BaseForward f = base.forward_for_gradcam(image);
  backward(select(f.logits, class_id));

  const Tensor& act = f.target_act->value;
  const Tensor& grad = f.target_act->grad;
  int c = act.dim(0), h = act.dim(1), w = act.dim(2), hw = h * w;

  // Channel weights: spatial mean of the class gradient.
  Tensor raw({h, w});
  for (int ch = 0; ch < c; ++ch) {
    const double* gp = grad.data() + size_t(ch) * hw;
    double wgt = 0.0;
    for (int p = 0; p < hw; ++p) wgt += gp[p];
    wgt /= hw;
    const double* ap = act.data() + size_t(ch) * hw;
    for (int p = 0; p < hw; ++p) raw[p] += wgt * ap[p];
  }
  for (int p = 0; p < hw; ++p) raw[p] = raw[p] > 0.0 ? raw[p] : 0.0;

  AttentionMap out;
  out.class_id = class_id;
  out.values = resample_bilinear(raw, out_resolution, out_resolution);
  out.degenerate = !minmax_normalize(out.values);
  return out;
}

// ---------------------------------------------------------------------------
// cache
// ---------------------------------------------------------------------------

AttentionCache::AttentionCache(std::string dir, std::string base_model_hash,
                               std::string class_source, int resolution)
    : dir_(std::move(dir)),
      base_hash_(std::move(base_model_hash)),
      class_source_(std::move(class_source)),
      resolution_(resolution) {
  fs::create_directories(fs::path(dir_) / "maps");
  fs::path manifest = fs::path(dir_) / "manifest.json";
  if (!fs::exists(manifest)) return;

  std::ifstream in(manifest);
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    return;  // unreadable manifest: rebuild
  }
  // Stale cache (different base model, source or resolution) is rejected.
  if (j.value("base_model_hash", "") != base_hash_ ||
      j.value("class_source", "") != class_source_ ||
      j.value("target_layer", "") != std::string(kTargetLayer) ||
      j.value("resolution", -1) != resolution_) {
    return;
  }
  for (auto& [id, e] : j.at("entries").items()) {
    Entry entry;
    entry.file = e.at("file").get<std::string>();
    entry.class_id = e.at("class_id").get<int>();
    entry.degenerate = e.at("degenerate").get<bool>();
    entries_[id] = entry;
  }
  next_index_ = j.value("next_index", static_cast<int>(entries_.size()));
}

bool AttentionCache::has(const std::string& image_id) const {
  return entries_.count(image_id) > 0;
}

AttentionMap AttentionCache::get(const std::string& image_id) const {
  auto it = entries_.find(image_id);
  if (it == entries_.end()) throw ArgumentError("attention cache miss: " + image_id);
  AttentionMap m;
  m.values = read_tensor_file((fs::path(dir_) / "maps" / it->second.file).string());
  m.class_id = it->second.class_id;
  m.degenerate = it->second.degenerate;
  return m;
}

void AttentionCache::put(const std::string& image_id, const AttentionMap& map) {
  Entry e;
  auto it = entries_.find(image_id);
  if (it != entries_.end()) {
    e.file = it->second.file;  // overwrite in place
  } else {
    char name[32];
    std::snprintf(name, sizeof(name), "map_%06d.bin", next_index_++);
    e.file = name;
  }
  e.class_id = map.class_id;
  e.degenerate = map.degenerate;
  write_tensor_file((fs::path(dir_) / "maps" / e.file).string(), map.values);
  entries_[image_id] = e;
}

void AttentionCache::save_manifest() const {
  json entries = json::object();
  for (const auto& [id, e] : entries_) {
    entries[id] = {{"file", e.file}, {"class_id", e.class_id}, {"degenerate", e.degenerate}};
  }
  json j = {{"format_version", 1},
            {"base_model_hash", base_hash_},
            {"target_layer", kTargetLayer},
            {"class_source", class_source_},
            {"resolution", resolution_},
            {"next_index", next_index_},
            {"entries", entries}};
  std::ofstream out(fs::path(dir_) / "manifest.json");
  if (!out) throw IoError("cannot write attention cache manifest in " + dir_);
  out << j.dump(2) << "\n";
}

std::vector<AttentionMap> attention_batch(const BaseModel& base,
                                          const std::vector<Tensor>& images,
                                          const std::vector<std::string>& image_ids,
                                          const std::vector<int>& labels,
                                          ClassSource source, AttentionCache& cache,
                                          GradCamStats* stats) {
  size_t n = images.size();
  if (image_ids.size() != n) throw ArgumentError("attention_batch: id/image count mismatch");
  if (source == ClassSource::kGroundTruth) {
    if (labels.size() != n) throw ArgumentError("attention_batch: labels required");
    for (int l : labels) {
      if (l < 0) throw ArgumentError("attention_batch: missing label with ground_truth source");
    }
  }

  std::vector<AttentionMap> out(n);
  std::vector<char> computed(n, 0);
  GradCamStats local;
  std::mutex stats_mu;
  parallel_for(static_cast<int64_t>(n), [&](int64_t i) {
    if (cache.has(image_ids[size_t(i)])) {
      out[size_t(i)] = cache.get(image_ids[size_t(i)]);
      return;
    }
    int class_id;
    if (source == ClassSource::kGroundTruth) {
      class_id = labels[size_t(i)];
    } else {
      BaseForward f = base.forward(images[size_t(i)], /*with_grad=*/false);
      class_id = argmax_index(f.logits->value);
    }
    out[size_t(i)] =
        gradcam(base, images[size_t(i)], class_id, base.config().input_resolution);
    {
      std::lock_guard<std::mutex> lock(stats_mu);
      ++local.maps_computed;
    }
    computed[size_t(i)] = 1;
  });
  for (size_t i = 0; i < n; ++i) {
    if (computed[i]) cache.put(image_ids[i], out[i]);
  }
  cache.save_manifest();
  if (stats) stats->maps_computed += local.maps_computed;
  return out;
}

}  // namespace lvw
