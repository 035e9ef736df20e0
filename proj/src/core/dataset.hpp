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

#ifndef LVW_CORE_DATASET_HPP_
#define LVW_CORE_DATASET_HPP_

#include <string>
#include <utility>
#include <vector>

#include "core/image.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lvw {

struct ManifestEntry {
  std::string path;   // relative to the dataset root
  int label = -1;
  std::string split;  // "train" | "test"
};

struct DatasetManifest {
  std::vector<std::string> class_names;  // sorted; label = index
  std::vector<ManifestEntry> entries;    // sorted by (split, class, filename)
  std::vector<std::string> warnings;

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::string canonical_text() const;
};

// Scans a folder-per-class tree: root/{train,test}/<class>/<image files>.
// Deterministic ordering; a file listed under the same class and name in
// both splits is a hard error, an empty class folder only a warning.
DatasetManifest ingest(const std::string& root);

struct DatasetItem {
  std::string id;  // split/class/filename (or synthetic id)
  int label = -1;
  Image image;
};

struct LoadedDataset {
  int resolution = 0;
  std::vector<std::string> class_names;
  std::vector<DatasetItem> train;
  std::vector<DatasetItem> test;
};

// Reads every manifest entry, resizing to `resolution`.
LoadedDataset load_folder_dataset(const std::string& root, int resolution);

// Horizontal flip with probability 1/2 in training mode, identity otherwise.
Image augment(const Image& image, bool train_mode, Rng& rng);

// Image bytes -> model input in [-1, 1], CHW.
Tensor to_input_tensor(const Image& image);
// Mirrors a [H,W] map; used to keep attention targets aligned with flipped
// inputs.
Tensor flip_map_horizontal(const Tensor& map);

// ---------------------------------------------------------------------------
// synthetic planted-parts generator
// ---------------------------------------------------------------------------

// Each class is a fixed pair of colored shape parts planted at random
// non-overlapping positions on a speckled background. Classes 0 and 1 share
// part 0 by construction, which gives the category-similarity analysis a
// known ground truth.
struct SyntheticConfig {
  int classes = 4;        // 2..10
  int train_per_class = 50;
  int test_per_class = 25;
  int resolution = 64;
  uint64_t seed = 7;
  double noise = 12.0;    // background speckle amplitude, 8-bit units
  int part_size = 0;      // 0 -> resolution * 3 / 8
};

int synthetic_part_count();
// Part ids (two per class) for each of the `classes` classes.
std::vector<std::pair<int, int>> synthetic_class_parts(int classes);
// One image with the given parts planted; consumes draws from rng.
Image synthetic_image(const std::vector<int>& part_ids, int resolution, double noise,
                      int part_size, Rng& rng);

LoadedDataset generate_synthetic(const SyntheticConfig& config);
// Writes the generated tree as PNGs under root/{train,test}/class_<c>/.
void materialize_synthetic(const SyntheticConfig& config, const std::string& root);

// A sample outside the training vocabulary: one distinguishing part from
// each of two classes, composed into a single image.
Image synthetic_unseen_composite(const SyntheticConfig& config, int class_a, int class_b,
                                 uint64_t seed);

}  // namespace lvw

#endif  // LVW_CORE_DATASET_HPP_
