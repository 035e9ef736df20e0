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

#include <cmath>

#include "core/errors.hpp"
#include "core/explain.hpp"
#include "core/image.hpp"
#include "core/objectives.hpp"
#include "core/train.hpp"
#include "test_util.hpp"

using namespace lvw;
using test::random_tensor;

namespace {

LvwConfig tiny_config() {
  LvwConfig c;
  c.input_resolution = 16;
  c.trunk.in_channels = 3;
  c.trunk.channels = {4, 8};
  c.feature_channels = 6;
  c.num_classes = 2;
  c.words_per_class = 2;
  return c;
}

std::vector<EvalSample> random_train_set(int n, Rng& rng) {
  std::vector<EvalSample> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({"train_" + std::to_string(i), i % 2, random_tensor({3, 16, 16}, rng)});
  }
  return out;
}

// Projects the model's words onto the given training set.
void project_onto(LvwModel& model, const std::vector<EvalSample>& train) {
  std::vector<PatchSource> sources;
  for (const auto& s : train) {
    sources.push_back({s.id, s.label, model.extract_features(s.image)});
  }
  project_word_bank(model.words(), model.provenance(), sources);
}

}  // namespace

TEST_CASE("heatmap bounding box") {
  SUBCASE("constant map spans the whole image") {
    Tensor heat = Tensor::full({8, 10}, 0.4);
    BoundingBox box = heatmap_bounding_box(heat, 0.95);
    CHECK(box.row0 == 0);
    CHECK(box.col0 == 0);
    CHECK(box.row1 == 7);
    CHECK(box.col1 == 9);
  }
  SUBCASE("single peak gives the hand-computed level-set rectangle") {
    Tensor heat({6, 6});
    // plateau of 1.0 on rows 2-3, cols 1-2; faint elsewhere
    heat.fill(0.1);
    heat.at2(2, 1) = 1.0;
    heat.at2(2, 2) = 1.0;
    heat.at2(3, 1) = 1.0;
    heat.at2(3, 2) = 0.97;
    heat.at2(0, 5) = 0.90;  // below the 95% cut
    BoundingBox box = heatmap_bounding_box(heat, 0.95);
    CHECK(box.row0 == 2);
    CHECK(box.row1 == 3);
    CHECK(box.col0 == 1);
    CHECK(box.col1 == 2);
  }
  SUBCASE("boxes stay inside bounds with positive area on random maps") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor heat = random_tensor({7, 9}, rng, 0, 1);
      BoundingBox box = heatmap_bounding_box(heat, 0.95);
      CHECK(box.row0 >= 0);
      CHECK(box.col0 >= 0);
      CHECK(box.row1 <= 6);
      CHECK(box.col1 <= 8);
      CHECK(box.row1 >= box.row0);
      CHECK(box.col1 >= box.col0);
      CHECK((box.row1 - box.row0 + 1) * (box.col1 - box.col0 + 1) >= 1);
    }
  }
}

TEST_CASE("global visualization picks the projection source after projection") {
  LvwModel model(tiny_config());
  Rng rng(5);
  model.init(rng);
  auto train = random_train_set(6, rng);
  project_onto(model, train);

  for (int j = 0; j < model.num_words(); ++j) {
    WordVisualization vis = global_visualization(j, train, model, 0.95);
    CHECK(vis.image_id == model.provenance()[size_t(j)].image_id);
    CHECK(vis.score == doctest::Approx(std::log(1.0 / 1e-4)).epsilon(1e-9));
    CHECK(vis.heatmap.dim(0) == 16);
  }
}

TEST_CASE("local explanation") {
  LvwModel model(tiny_config());
  Rng rng(7);
  model.init(rng);
  auto train = random_train_set(6, rng);
  project_onto(model, train);
  ExplainContext ctx(model, train);

  SUBCASE("word ids equal the top-k of the similarity scores") {
    Tensor query = random_tensor({3, 16, 16}, rng);
    auto entries = ctx.local_explanation(query, 3, 0.95);
    Tensor scores = similarity_scores(model.extract_features(query), model.words(),
                                      model.config().activation_eps);
    std::vector<int> expected = topk_indices(scores, 3);
    REQUIRE(entries.size() == 3);
    for (size_t i = 0; i < entries.size(); ++i) {
      CHECK(entries[i].word_id == expected[i]);
    }
  }

  SUBCASE("k=1 returns the single strongest word") {
    Tensor query = random_tensor({3, 16, 16}, rng);
    auto entries = ctx.local_explanation(query, 1, 0.95);
    REQUIRE(entries.size() == 1);
    Tensor scores = similarity_scores(model.extract_features(query), model.words(),
                                      model.config().activation_eps);
    CHECK(entries[0].word_id == argmax_index(scores));
  }

  SUBCASE("querying a word's provenance image retrieves that word") {
    const WordProvenance& prov = model.provenance()[0];
    int idx = -1;
    for (size_t i = 0; i < train.size(); ++i) {
      if (train[i].id == prov.image_id) idx = static_cast<int>(i);
    }
    REQUIRE(idx >= 0);
    auto entries = ctx.local_explanation(train[size_t(idx)].image, 2, 0.95);
    bool found = false;
    for (const auto& e : entries) {
      if (e.word_id == 0) found = true;
    }
    CHECK(found);
  }

  SUBCASE("k out of range rejected") {
    Tensor query = random_tensor({3, 16, 16}, rng);
    CHECK_THROWS_AS(ctx.local_explanation(query, 0, 0.95), ArgumentError);
    CHECK_THROWS_AS(ctx.local_explanation(query, 99, 0.95), ArgumentError);
  }
}

TEST_CASE("explain unseen") {
  LvwModel model(tiny_config());
  Rng rng(9);
  model.init(rng);
  auto train = random_train_set(6, rng);
  project_onto(model, train);
  ExplainContext ctx(model, train);

  SUBCASE("identical computation path as local explanation on seen images") {
    const Tensor& img = train[2].image;
    UnseenExplanation u = ctx.explain_unseen(img, 2, 0.95);
    auto local = ctx.local_explanation(img, 2, 0.95);
    REQUIRE(u.entries.size() == local.size());
    for (size_t i = 0; i < local.size(); ++i) {
      CHECK(u.entries[i].word_id == local[i].word_id);
      CHECK(u.entries[i].score == local[i].score);
    }
    CHECK(u.out_of_vocabulary);
  }

  SUBCASE("every entry carries a valid provenance record") {
    Tensor query = random_tensor({3, 16, 16}, rng);
    UnseenExplanation u = ctx.explain_unseen(query, 3, 0.95);
    REQUIRE(u.entries.size() == 3);
    for (const auto& e : u.entries) {
      CHECK_FALSE(e.provenance_image_id.empty());
      CHECK(e.provenance_class >= 0);
      CHECK(e.provenance_class < 2);
    }
    CHECK(u.predicted_class >= 0);
    CHECK(u.predicted_class < 2);
  }
}

TEST_CASE("category similarity matrix") {
  LvwModel model(tiny_config());
  Rng rng(11);
  model.init(rng);

  SUBCASE("unit diagonal and exact symmetry") {
    auto train = random_train_set(8, rng);
    CategorySimilarity sim = category_similarity_matrix(train, model);
    REQUIRE(sim.matrix.dim(0) == 2);
    CHECK(sim.matrix.at2(0, 0) == 1.0);
    CHECK(sim.matrix.at2(1, 1) == 1.0);
    CHECK(sim.matrix.at2(0, 1) == sim.matrix.at2(1, 0));
    CHECK(sim.category_vectors.size() == 2);
    CHECK(sim.category_vectors[0].size() == model.num_words());
  }

  SUBCASE("identical sample sets give off-diagonal 1") {
    Rng rng2(13);
    Tensor shared = random_tensor({3, 16, 16}, rng2);
    std::vector<EvalSample> train = {{"a", 0, shared}, {"b", 1, shared}};
    CategorySimilarity sim = category_similarity_matrix(train, model);
    CHECK(sim.matrix.at2(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("zero-variance vectors are flagged missing") {
    // identical words -> every sample's scores are equal across words ->
    // category vectors constant -> correlation undefined
    LvwModel flat(tiny_config());
    Rng rng3(15);
    flat.init(rng3);
    for (int j = 1; j < flat.num_words(); ++j) {
      for (int ch = 0; ch < flat.config().feature_channels; ++ch) {
        flat.words().at2(j, ch) = flat.words().at2(0, ch);
      }
    }
    auto train = random_train_set(4, rng3);
    CategorySimilarity sim = category_similarity_matrix(train, flat);
    REQUIRE_FALSE(sim.missing.empty());
    CHECK(std::isnan(sim.matrix.at2(0, 1)));
    CHECK(sim.matrix.at2(0, 0) == 1.0);  // diagonal stays defined
  }
}

TEST_CASE("overlay rendering stays in bounds") {
  Image base(16, 16);
  Tensor heat = Tensor::full({16, 16}, 0.5);
  heat.at2(4, 4) = 1.0;
  BoundingBox box{2, 2, 9, 9};
  Image out = render_overlay_with_box(base, heat, box, 0.5);
  CHECK(out.width == 16);
  CHECK(out.height == 16);
  // box painted yellow
  CHECK(out.px(2, 5)[0] == 255);
  CHECK(out.px(2, 5)[1] == 255);
  CHECK(out.px(2, 5)[2] == 0);
}
