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

#include <doctest.h>

#include <filesystem>

#include "core/dataset.hpp"
#include "core/errors.hpp"
#include "core/image.hpp"
#include "test_util.hpp"

using namespace lvw;
namespace fs = std::filesystem;

namespace {

Image tiny_image(uint8_t r, uint8_t g, uint8_t b) {
  Image img(8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      uint8_t* p = img.px(y, x);
      p[0] = uint8_t(r + x);
      p[1] = uint8_t(g + y);
      p[2] = b;
    }
  }
  return img;
}

std::string make_tree(bool overlap) {
  std::string root = test::temp_dir("ingest");
  int counter = 0;
  for (const char* split : {"train", "test"}) {
    for (const char* cls : {"cat", "dog"}) {
      fs::create_directories(fs::path(root) / split / cls);
      for (int i = 0; i < 3; ++i) {
        std::string name = std::string(split) + "_" + std::to_string(i) + ".png";
        if (overlap) name = "shared_" + std::to_string(i) + ".png";
        write_png((fs::path(root) / split / cls / name).string(),
                  tiny_image(uint8_t(counter * 20), 100, 200));
        ++counter;
      }
    }
  }
  return root;
}

}  // namespace

TEST_CASE("png round trip is lossless") {
  Rng rng(3);
  Image img(13, 9);
  for (auto& px : img.pixels) px = uint8_t(rng.uniform_int(256));
  std::vector<uint8_t> bytes = encode_png(img);
  Image back = decode_png(bytes.data(), bytes.size());
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("zlib inflate handles fixed-huffman streams") {
  // zlib-compressed "hello" (fixed Huffman block)
  const uint8_t stream[] = {0x78, 0x9c, 0xcb, 0x48, 0xcd, 0xc9, 0xc9,
                            0x07, 0x00, 0x06, 0x2c, 0x02, 0x15};
  std::vector<uint8_t> out = zlib_decompress(stream, sizeof(stream));
  CHECK(std::string(out.begin(), out.end()) == "hello");
}

TEST_CASE("zlib stored round trip") {
  Rng rng(5);
  std::vector<uint8_t> data(100000);
  for (auto& b : data) b = uint8_t(rng.uniform_int(256));
  std::vector<uint8_t> z = zlib_compress_stored(data.data(), data.size());
  std::vector<uint8_t> back = zlib_decompress(z.data(), z.size());
  CHECK(back == data);
}

TEST_CASE("ppm round trip") {
  Image img = tiny_image(10, 20, 30);
  std::string dir = test::temp_dir("ppm");
  write_ppm(dir + "/img.ppm", img);
  Image back = read_image(dir + "/img.ppm");
  CHECK(back.pixels == img.pixels);
}

TEST_CASE("ingest") {
  SUBCASE("counts, labels and determinism") {
    std::string root = make_tree(false);
    DatasetManifest m1 = ingest(root);
    CHECK(m1.class_names == std::vector<std::string>{"cat", "dog"});
    CHECK(m1.entries.size() == 12);
    int train_rows = 0;
    for (const auto& e : m1.entries) {
      CHECK((e.label == 0 || e.label == 1));
      if (e.split == "train") ++train_rows;
    }
    CHECK(train_rows == 6);
    DatasetManifest m2 = ingest(root);
    CHECK(m1.canonical_text() == m2.canonical_text());
  }
  SUBCASE("file in both splits is a hard error") {
    std::string root = make_tree(true);
    CHECK_THROWS_AS(ingest(root), DataError);
  }
  SUBCASE("empty class folder warns") {
    std::string root = make_tree(false);
    fs::create_directories(fs::path(root) / "train" / "empty_class");
    DatasetManifest m = ingest(root);
    REQUIRE_FALSE(m.warnings.empty());
  }
  SUBCASE("missing split is an error") {
    std::string root = test::temp_dir("no_split");
    fs::create_directories(fs::path(root) / "train");
    CHECK_THROWS_AS(ingest(root), DataError);
  }
}

TEST_CASE("augment") {
  Image img = tiny_image(5, 50, 150);
  Rng rng(7);
  SUBCASE("eval mode is the identity, bit for bit") {
    Image out = augment(img, false, rng);
    CHECK(out.pixels == img.pixels);
  }
  SUBCASE("flip is an involution") {
    Image once = flip_horizontal(img);
    Image twice = flip_horizontal(once);
    CHECK(twice.pixels == img.pixels);
  }
  SUBCASE("flip frequency near 1/2 over 10000 seeded draws") {
    int flips = 0;
    Image probe(2, 1);
    probe.px(0, 0)[0] = 1;  // asymmetric: flip detectable
    for (int i = 0; i < 10000; ++i) {
      Image out = augment(probe, true, rng);
      if (out.px(0, 1)[0] == 1) ++flips;
    }
    CHECK(flips >= 4700);
    CHECK(flips <= 5300);
  }
}

TEST_CASE("input tensor conversion and map flip") {
  Image img = tiny_image(0, 128, 255);
  Tensor t = to_input_tensor(img);
  CHECK(t.dim(0) == 3);
  CHECK(t.at3(2, 0, 0) == doctest::Approx(1.0));       // 255 -> +1
  CHECK(t.at3(0, 0, 0) == doctest::Approx(-1.0));      // 0 -> -1
  CHECK(t.at3(1, 0, 0) == doctest::Approx(0.00392157).epsilon(1e-3));  // 128 ~ 0

  Tensor m({2, 3});
  for (int i = 0; i < 6; ++i) m[i] = i;
  Tensor f = flip_map_horizontal(m);
  CHECK(f.at2(0, 0) == 2);
  CHECK(f.at2(0, 2) == 0);
  CHECK(f.at2(1, 1) == 4);
}

TEST_CASE("synthetic dataset") {
  SyntheticConfig cfg;
  cfg.classes = 4;
  cfg.train_per_class = 3;
  cfg.test_per_class = 2;
  cfg.resolution = 64;
  cfg.seed = 99;

  SUBCASE("generation is deterministic") {
    LoadedDataset a = generate_synthetic(cfg);
    LoadedDataset b = generate_synthetic(cfg);
    REQUIRE(a.train.size() == 12);
    REQUIRE(a.test.size() == 8);
    for (size_t i = 0; i < a.train.size(); ++i) {
      CHECK(a.train[i].id == b.train[i].id);
      CHECK(a.train[i].image.pixels == b.train[i].image.pixels);
    }
  }

  SUBCASE("classes 0 and 1 share a part id") {
    auto parts = synthetic_class_parts(4);
    bool shares = parts[0].first == parts[1].first || parts[0].first == parts[1].second ||
                  parts[0].second == parts[1].first || parts[0].second == parts[1].second;
    CHECK(shares);
    // classes 2 and 3 share nothing with 0
    for (int other : {2, 3}) {
      CHECK(parts[size_t(other)].first != parts[0].first);
      CHECK(parts[size_t(other)].first != parts[0].second);
      CHECK(parts[size_t(other)].second != parts[0].first);
      CHECK(parts[size_t(other)].second != parts[0].second);
    }
  }

  SUBCASE("materialized tree ingests back to the same ids") {
    std::string root = test::temp_dir("synth");
    materialize_synthetic(cfg, root);
    DatasetManifest manifest = ingest(root);
    CHECK(manifest.class_names.size() == 4);
    CHECK(manifest.entries.size() == 20);
    LoadedDataset mem = generate_synthetic(cfg);
    LoadedDataset disk = load_folder_dataset(root, cfg.resolution);
    REQUIRE(disk.train.size() == mem.train.size());
    // PNG is lossless: bytes round trip exactly
    for (size_t i = 0; i < mem.train.size(); ++i) {
      CHECK(disk.train[i].id == mem.train[i].id);
      CHECK(disk.train[i].image.pixels == mem.train[i].image.pixels);
    }
  }

  SUBCASE("unseen composite draws parts from two classes") {
    Image img = synthetic_unseen_composite(cfg, 0, 2, 5);
    CHECK(img.width == 64);
    CHECK_THROWS_AS(synthetic_unseen_composite(cfg, 1, 1, 5), ArgumentError);
  }

  SUBCASE("class count bounds enforced") {
    CHECK_THROWS_AS(synthetic_class_parts(1), ConfigError);
    CHECK_THROWS_AS(synthetic_class_parts(11), ConfigError);
  }
}

TEST_CASE("image resize identity") {
  Image img = tiny_image(1, 2, 3);
  Image same = resize_bilinear(img, 8, 8);
  CHECK(same.pixels == img.pixels);
}
