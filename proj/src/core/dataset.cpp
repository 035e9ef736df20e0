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

#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

#include "core/errors.hpp"

namespace fs = std::filesystem;

namespace lvw {

// ---------------------------------------------------------------------------
// manifest / ingest
// ---------------------------------------------------------------------------

std::string DatasetManifest::canonical_text() const {
  std::ostringstream os;
  for (const auto& name : class_names) os << "class," << name << "\n";
  for (const auto& e : entries) os << e.split << "," << e.label << "," << e.path << "\n";
  return os.str();
}

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png" || ext == ".ppm" || ext == ".pgm";
}

}  // namespace

DatasetManifest ingest(const std::string& root) {
  fs::path train_dir = fs::path(root) / "train";
  fs::path test_dir = fs::path(root) / "test";
  if (!fs::is_directory(train_dir) || !fs::is_directory(test_dir)) {
    throw DataError("dataset root must contain train/ and test/ subtrees: " + root);
  }

  // class name -> split -> sorted filenames
  std::map<std::string, std::map<std::string, std::vector<std::string>>> tree;
  DatasetManifest manifest;
  for (const char* split : {"train", "test"}) {
    fs::path split_dir = fs::path(root) / split;
    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(split_dir)) {
      if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& cls : class_dirs) {
      std::vector<std::string> files;
      for (const auto& e : fs::directory_iterator(split_dir / cls)) {
        if (e.is_regular_file() && is_image_file(e.path())) {
          files.push_back(e.path().filename().string());
        }
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) {
        manifest.warnings.push_back(std::string("empty class folder: ") + split + "/" + cls);
      }
      tree[cls][split] = std::move(files);
    }
  }

  for (const auto& [cls, splits] : tree) manifest.class_names.push_back(cls);
  std::sort(manifest.class_names.begin(), manifest.class_names.end());

  std::map<std::string, int> label_of;
  for (size_t i = 0; i < manifest.class_names.size(); ++i) {
    label_of[manifest.class_names[i]] = static_cast<int>(i);
  }

  // a file under the same class/name in both splits leaks test data
  for (const auto& [cls, splits] : tree) {
    auto tr = splits.find("train");
    auto te = splits.find("test");
    if (tr == splits.end() || te == splits.end()) continue;
    std::set<std::string> train_files(tr->second.begin(), tr->second.end());
    for (const auto& f : te->second) {
      if (train_files.count(f)) {
        throw DataError("file present in both splits: " + cls + "/" + f);
      }
    }
  }

  for (const char* split : {"train", "test"}) {
    for (const auto& cls : manifest.class_names) {
      auto it = tree.find(cls);
      if (it == tree.end()) continue;
      auto sit = it->second.find(split);
      if (sit == it->second.end()) continue;
      for (const auto& f : sit->second) {
        manifest.entries.push_back(
            {std::string(split) + "/" + cls + "/" + f, label_of[cls], split});
      }
    }
  }
  return manifest;
}

LoadedDataset load_folder_dataset(const std::string& root, int resolution) {
  DatasetManifest manifest = ingest(root);
  LoadedDataset out;
  out.resolution = resolution;
  out.class_names = manifest.class_names;
  for (const auto& e : manifest.entries) {
    DatasetItem item;
    item.id = e.path;
    item.label = e.label;
    item.image = read_image((fs::path(root) / e.path).string());
    if (item.image.width != resolution || item.image.height != resolution) {
      item.image = resize_bilinear(item.image, resolution, resolution);
    }
    (e.split == "train" ? out.train : out.test).push_back(std::move(item));
  }
  return out;
}

Image augment(const Image& image, bool train_mode, Rng& rng) {
  if (!train_mode) return image;
  return rng.bernoulli(0.5) ? flip_horizontal(image) : image;
}

Tensor to_input_tensor(const Image& image) {
  Tensor t({3, image.height, image.width});
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const uint8_t* px = image.px(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        t.at3(ch, r, c) = (px[ch] / 255.0 - 0.5) / 0.5;
      }
    }
  }
  return t;
}

Tensor flip_map_horizontal(const Tensor& map) {
  if (map.rank() != 2) throw ArgumentError("flip_map_horizontal expects a 2-d map");
  Tensor out(map.shape());
  int h = map.dim(0), w = map.dim(1);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out.at2(r, c) = map.at2(r, w - 1 - c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic generator
// ---------------------------------------------------------------------------

namespace {

struct PartSpec {
  enum Shape { kCircle, kSquare, kCross, kTriangle, kRing, kDiamond, kStripes, kBlocks };
  Shape shape;
  uint8_t r, g, b;
};

constexpr PartSpec kParts[] = {
    {PartSpec::kCircle, 220, 40, 40},    // 0 red circle
    {PartSpec::kSquare, 40, 70, 220},    // 1 blue square
    {PartSpec::kCross, 235, 210, 40},    // 2 yellow cross
    {PartSpec::kTriangle, 40, 190, 60},  // 3 green triangle
    {PartSpec::kRing, 220, 50, 200},     // 4 magenta ring
    {PartSpec::kDiamond, 240, 140, 30},  // 5 orange diamond
    {PartSpec::kStripes, 40, 210, 220},  // 6 cyan stripes
    {PartSpec::kBlocks, 180, 120, 235},  // 7 violet blocks
};
constexpr int kNumParts = static_cast<int>(sizeof(kParts) / sizeof(kParts[0]));

void draw_part(Image& img, int part_id, int cy, int cx, int size, Rng& rng) {
  const PartSpec& spec = kParts[part_id];
  int jitter[3];
  for (int& j : jitter) j = static_cast<int>(rng.uniform_int(13)) - 6;
  auto color = [&](int ch) {
    int base = ch == 0 ? spec.r : (ch == 1 ? spec.g : spec.b);
    return static_cast<uint8_t>(std::clamp(base + jitter[ch], 0, 255));
  };
  uint8_t cr = color(0), cg = color(1), cb = color(2);
  int half = size / 2;
  auto put = [&](int y, int x) {
    if (y < 0 || y >= img.height || x < 0 || x >= img.width) return;
    uint8_t* p = img.px(y, x);
    p[0] = cr;
    p[1] = cg;
    p[2] = cb;
  };
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      bool on = false;
      switch (spec.shape) {
        case PartSpec::kCircle:
          on = dy * dy + dx * dx <= half * half;
          break;
        case PartSpec::kSquare:
          on = true;
          break;
        case PartSpec::kCross:
          on = std::abs(dy) <= half / 3 || std::abs(dx) <= half / 3;
          break;
        case PartSpec::kTriangle:
          // apex up: row dy spans wider toward the bottom
          on = std::abs(dx) * 2 * half <= (dy + half) * half;
          break;
        case PartSpec::kRing: {
          int d2 = dy * dy + dx * dx;
          on = d2 <= half * half && d2 >= (half / 2) * (half / 2);
          break;
        }
        case PartSpec::kDiamond:
          on = std::abs(dy) + std::abs(dx) <= half;
          break;
        case PartSpec::kStripes:
          on = ((dy + dx) / 3) % 2 == 0;
          break;
        case PartSpec::kBlocks:
          on = ((dy + half) / (half / 2 + 1) + (dx + half) / (half / 2 + 1)) % 2 == 0;
          break;
      }
      if (on) put(cy + dy, cx + dx);
    }
  }
}

uint64_t mix_seed(uint64_t seed, uint64_t a, uint64_t b, uint64_t c) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0x2545f4914f6cdd1dULL * (b + 1) +
               0x94d049bb133111ebULL * (c + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

int synthetic_part_count() { return kNumParts; }

std::vector<std::pair<int, int>> synthetic_class_parts(int classes) {
  if (classes < 2 || classes > 10)
    throw ConfigError("synthetic dataset supports 2..10 classes");
  std::vector<std::pair<int, int>> out;
  for (int c = 0; c < classes; ++c) {
    if (c == 0) {
      out.emplace_back(0, 1);
    } else if (c == 1) {
      out.emplace_back(0, 2);  // shares part 0 with class 0
    } else {
      out.emplace_back((2 * c - 1) % kNumParts, (2 * c) % kNumParts);
    }
  }
  return out;
}

Image synthetic_image(const std::vector<int>& part_ids, int resolution, double noise,
                      int part_size, Rng& rng) {
  if (resolution < 32) throw ConfigError("synthetic resolution must be >= 32");
  for (int id : part_ids) {
    if (id < 0 || id >= kNumParts) throw ArgumentError("unknown part id");
  }
  if (part_size <= 0) part_size = resolution * 3 / 8;

  Image img(resolution, resolution);
  // Backgrounds share a narrow palette so parts, not backdrops, carry the
  // class signal; the speckle keeps them textured.
  int base[3];
  for (int& b : base) b = 105 + static_cast<int>(rng.uniform_int(30));
  for (int r = 0; r < resolution; ++r) {
    for (int c = 0; c < resolution; ++c) {
      uint8_t* p = img.px(r, c);
      for (int ch = 0; ch < 3; ++ch) {
        double v = base[ch] + rng.uniform(-noise, noise);
        p[ch] = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
    }
  }

  std::vector<std::pair<int, int>> centers;
  for (int id : part_ids) {
    int size = part_size + static_cast<int>(rng.uniform_int(part_size / 5 + 1)) -
               part_size / 10;
    int margin = size / 2 + 2;
    int cy = 0, cx = 0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      cy = margin + static_cast<int>(rng.uniform_int(resolution - 2 * margin));
      cx = margin + static_cast<int>(rng.uniform_int(resolution - 2 * margin));
      bool clear = true;
      for (const auto& [oy, ox] : centers) {
        int dy = cy - oy, dx = cx - ox;
        if (dy * dy + dx * dx < size * size) clear = false;
      }
      if (clear) break;
    }
    centers.emplace_back(cy, cx);
    draw_part(img, id, cy, cx, size, rng);
  }
  return img;
}

LoadedDataset generate_synthetic(const SyntheticConfig& config) {
  auto parts = synthetic_class_parts(config.classes);
  LoadedDataset out;
  out.resolution = config.resolution;
  for (int c = 0; c < config.classes; ++c) {
    out.class_names.push_back("class_" + std::to_string(c));
  }
  for (int split = 0; split < 2; ++split) {
    int per_class = split == 0 ? config.train_per_class : config.test_per_class;
    const char* split_name = split == 0 ? "train" : "test";
    for (int c = 0; c < config.classes; ++c) {
      for (int i = 0; i < per_class; ++i) {
        Rng rng(mix_seed(config.seed, uint64_t(split), uint64_t(c), uint64_t(i)));
        DatasetItem item;
        char name[96];
        std::snprintf(name, sizeof(name), "%s/class_%d/%s_%04d.png", split_name, c,
                      split_name, i);
        item.id = name;
        item.label = c;
        item.image = synthetic_image({parts[size_t(c)].first, parts[size_t(c)].second},
                                     config.resolution, config.noise, config.part_size, rng);
        (split == 0 ? out.train : out.test).push_back(std::move(item));
      }
    }
  }
  return out;
}

void materialize_synthetic(const SyntheticConfig& config, const std::string& root) {
  LoadedDataset data = generate_synthetic(config);
  for (const auto* split : {&data.train, &data.test}) {
    for (const auto& item : *split) {
      fs::path path = fs::path(root) / item.id;
      fs::create_directories(path.parent_path());
      write_png(path.string(), item.image);
    }
  }
}

Image synthetic_unseen_composite(const SyntheticConfig& config, int class_a, int class_b,
                                 uint64_t seed) {
  auto parts = synthetic_class_parts(config.classes);
  if (class_a < 0 || class_a >= config.classes || class_b < 0 || class_b >= config.classes ||
      class_a == class_b) {
    throw ArgumentError("unseen composite needs two distinct valid classes");
  }
  // Pick each class's least-shared part so the composite reads as "a bit of
  // A plus a bit of B".
  std::map<int, int> usage;
  for (const auto& [p, q] : parts) {
    ++usage[p];
    ++usage[q];
  }
  auto distinguishing = [&usage, &parts](int c) {
    auto [p, q] = parts[size_t(c)];
    return usage[q] <= usage[p] ? q : p;
  };
  Rng rng(mix_seed(seed, 0xabcdefULL, uint64_t(class_a), uint64_t(class_b)));
  return synthetic_image({distinguishing(class_a), distinguishing(class_b)},
                         config.resolution, config.noise, config.part_size, rng);
}

}  // namespace lvw
