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
#include "core/image.hpp"
#include "core/model.hpp"
#include "core/objectives.hpp"
#include "test_util.hpp"

using namespace lvw;
using test::random_tensor;

namespace {

// Brute-force min-min cluster loss: triple loop over samples, words, patches.
double cluster_oracle(const std::vector<Tensor>& features, const Tensor& words) {
  double total = 0.0;
  for (const Tensor& z : features) {
    int d = z.dim(0), hw = z.dim(1) * z.dim(2);
    double best = 1e300;
    for (int j = 0; j < words.dim(0); ++j) {
      for (int p = 0; p < hw; ++p) {
        double d2 = 0.0;
        for (int ch = 0; ch < d; ++ch) {
          double diff = z[ch * hw + p] - words.at2(j, ch);
          d2 += diff * diff;
        }
        best = std::min(best, d2);
      }
    }
    total += best;
  }
  return total / double(features.size());
}

LvwConfig small_config() {
  LvwConfig c;
  c.input_resolution = 16;
  c.trunk.in_channels = 3;
  c.trunk.channels = {4, 8};
  c.feature_channels = 5;
  c.num_classes = 2;
  c.words_per_class = 2;
  return c;
}

}  // namespace

TEST_CASE("cluster loss") {
  SUBCASE("zero when every sample contains a word patch") {
    Rng rng(3);
    std::vector<Tensor> features = {random_tensor({3, 2, 2}, rng, 0, 1),
                                    random_tensor({3, 2, 2}, rng, 0, 1)};
    Tensor words = random_tensor({2, 3}, rng, 5, 6);
    for (int ch = 0; ch < 3; ++ch) {
      words.at2(0, ch) = features[0].at3(ch, 0, 1);
      words.at2(1, ch) = features[1].at3(ch, 1, 0);
    }
    CHECK(cluster_loss(features, words) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("single 1x1x2 patch against a single word") {
    Tensor z({2, 1, 1});  // patch (0,0)
    Tensor words({1, 2});
    words.at2(0, 0) = 3.0;
    words.at2(0, 1) = 4.0;
    CHECK(cluster_loss({z}, words) == doctest::Approx(25.0));
  }
  SUBCASE("matches the brute-force oracle on random batches") {
    Rng rng(5);
    for (int trial = 0; trial < 25; ++trial) {
      int h = 2 + int(rng.uniform_int(3)), w = 2 + int(rng.uniform_int(3));
      int m = 1 + int(rng.uniform_int(5)), d = 1 + int(rng.uniform_int(4));
      int n = 1 + int(rng.uniform_int(4));
      std::vector<Tensor> features;
      for (int i = 0; i < n; ++i) features.push_back(random_tensor({d, h, w}, rng, 0, 1));
      Tensor words = random_tensor({m, d}, rng, 0, 1);
      CHECK(cluster_loss(features, words) ==
            doctest::Approx(cluster_oracle(features, words)).epsilon(1e-6));
    }
  }
  SUBCASE("empty batch rejected") {
    CHECK_THROWS_AS(cluster_loss({}, Tensor({1, 2})), ArgumentError);
  }
}

TEST_CASE("top-k combined heatmap") {
  Tensor scores({3});
  scores[0] = 3.0;
  scores[1] = 2.0;
  scores[2] = 1.0;
  Tensor m0({2, 2}), m1({2, 2}), m2({2, 2});
  m0.at2(0, 0) = 0;
  m0.at2(0, 1) = 2;
  m0.at2(1, 0) = 2;
  m0.at2(1, 1) = 0;
  m1.fill(1.0);
  m2.fill(9.0);
  std::vector<Tensor> maps = {m0, m1, m2};

  SUBCASE("k=1 is the top map, normalized") {
    std::vector<int> ids;
    Tensor combined = topk_combined_heatmap(maps, scores, 1, &ids);
    CHECK(ids == std::vector<int>{0});
    CHECK(combined.at2(0, 0) == 0.0);
    CHECK(combined.at2(0, 1) == 1.0);
  }
  SUBCASE("k=2 pointwise max then min-max scaling (hand oracle)") {
    std::vector<int> ids;
    Tensor combined = topk_combined_heatmap(maps, scores, 2, &ids);
    CHECK(ids == std::vector<int>{0, 1});
    // max(m0, m1) = [[1,2],[2,1]] -> normalized [[0,1],[1,0]]
    CHECK(combined.at2(0, 0) == doctest::Approx(0.0));
    CHECK(combined.at2(0, 1) == doctest::Approx(1.0));
    CHECK(combined.at2(1, 0) == doctest::Approx(1.0));
    CHECK(combined.at2(1, 1) == doctest::Approx(0.0));
  }
  SUBCASE("k=M with one dominating map returns it normalized") {
    Tensor dom = m2;
    std::vector<Tensor> maps2 = {m0, m1, dom};
    Tensor s2({3});
    s2[2] = 5.0;
    Tensor combined = topk_combined_heatmap(maps2, s2, 3);
    // m2 constant 9 dominates everywhere; constant map normalizes to zeros
    for (int64_t i = 0; i < combined.size(); ++i) CHECK(combined[i] == 0.0);
  }
  SUBCASE("k out of range rejected") {
    CHECK_THROWS_AS(topk_combined_heatmap(maps, scores, 0), ArgumentError);
    CHECK_THROWS_AS(topk_combined_heatmap(maps, scores, 4), ArgumentError);
  }
}

TEST_CASE("top-k selection") {
  SUBCASE("ties break toward the lower word id") {
    Tensor s({4});
    s[0] = 1.0;
    s[1] = 2.0;
    s[2] = 2.0;
    s[3] = 0.5;
    CHECK(topk_indices(s, 2) == std::vector<int>{1, 2});
    CHECK(topk_indices(s, 3) == std::vector<int>{1, 2, 0});
  }
  SUBCASE("invariant under strictly monotone transforms") {
    Rng rng(7);
    for (int trial = 0; trial < 30; ++trial) {
      Tensor s = random_tensor({8}, rng, -2, 2);
      Tensor warped({8});
      for (int i = 0; i < 8; ++i) warped[i] = std::exp(3.0 * s[i]) + 1.0;
      for (int k = 1; k <= 8; ++k) {
        CHECK(topk_indices(s, k) == topk_indices(warped, k));
      }
    }
  }
}

TEST_CASE("alignment loss") {
  SUBCASE("identical maps give zero") {
    Rng rng(9);
    Tensor a = random_tensor({3, 3}, rng, 0, 1);
    CHECK(alignment_loss({a}, {a}) == 0.0);
  }
  SUBCASE("all-ones vs all-zeros on P pixels, batch of one, sums to P") {
    Tensor ones = Tensor::full({4, 5}, 1.0);
    Tensor zeros({4, 5});
    CHECK(alignment_loss({ones}, {zeros}) == doctest::Approx(20.0));
  }
  SUBCASE("matches the elementwise oracle and is symmetric") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
      Tensor a = random_tensor({4, 4}, rng, 0, 1);
      Tensor b = random_tensor({4, 4}, rng, 0, 1);
      double expected = 0;
      for (int64_t i = 0; i < a.size(); ++i) expected += (a[i] - b[i]) * (a[i] - b[i]);
      CHECK(alignment_loss({a}, {b}) == doctest::Approx(expected).epsilon(1e-6));
      CHECK(alignment_loss({a}, {b}) == doctest::Approx(alignment_loss({b}, {a})));
      CHECK(alignment_loss({a}, {b}) >= 0.0);
    }
  }
  SUBCASE("resolution mismatch rejected") {
    CHECK_THROWS_AS(alignment_loss({Tensor({2, 2})}, {Tensor({2, 3})}), ArgumentError);
  }
}

TEST_CASE("classification loss") {
  SUBCASE("confident correct prediction drives the loss toward zero") {
    Tensor z({3});
    z[1] = 40.0;  // overwhelming correct logit
    CHECK(classification_loss({z}, {1}, false) < 1e-12);
  }
  SUBCASE("uniform scores give ln(C)") {
    Tensor z({5});
    CHECK(classification_loss({z}, {2}, false) == doctest::Approx(std::log(5.0)));
    CHECK(classification_loss({z}, {2}, true) == doctest::Approx(std::log(5.0)));
  }
  SUBCASE("random batch matches the log-sum-exp oracle") {
    Rng rng(13);
    std::vector<Tensor> batch;
    std::vector<int> labels;
    double expected = 0.0;
    for (int i = 0; i < 10; ++i) {
      Tensor z = random_tensor({4}, rng, -3, 3);
      int y = int(rng.uniform_int(4));
      double lse = 0;
      for (int c = 0; c < 4; ++c) lse += std::exp(z[c]);
      expected += std::log(lse) - z[y];
      batch.push_back(z);
      labels.push_back(y);
    }
    CHECK(classification_loss(batch, labels, false) ==
          doctest::Approx(expected / 10.0).epsilon(1e-6));
  }
  SUBCASE("label out of range rejected") {
    CHECK_THROWS_AS(classification_loss({Tensor({3})}, {3}, false), ArgumentError);
  }
}

TEST_CASE("l1 penalty") {
  CHECK(l1_penalty(Tensor({5, 3})) == 0.0);
  CHECK(l1_penalty(init_head(50, 10)) == doctest::Approx(275.0));
  Rng rng(15);
  Tensor w = random_tensor({4, 4}, rng);
  double base = l1_penalty(w);
  Tensor scaled = w;
  for (int64_t i = 0; i < w.size(); ++i) scaled[i] *= -2.5;
  CHECK(l1_penalty(scaled) == doctest::Approx(2.5 * base).epsilon(1e-12));
}

TEST_CASE("stage-1 objective") {
  LvwConfig cfg = small_config();
  LvwModel model(cfg);
  Rng rng(17);
  model.init(rng);
  std::vector<Tensor> images = {random_tensor({3, 16, 16}, rng),
                                random_tensor({3, 16, 16}, rng)};
  std::vector<int> labels = {0, 1};
  int grid = model.grid_size();
  std::vector<Tensor> attn;
  for (int i = 0; i < 2; ++i) {
    Tensor a = random_tensor({grid, grid}, rng, 0, 1);
    minmax_normalize(a);
    attn.push_back(a);
  }
  std::vector<const Tensor*> attn_ptrs = {&attn[0], &attn[1]};

  SUBCASE("alpha=beta=0 equals the classification loss") {
    LossWeights w;
    w.alpha = 0.0;
    w.beta = 0.0;
    Stage1Value v = stage1_objective(model, images, labels, attn_ptrs, w, 2);
    std::vector<Tensor> logits;
    for (const auto& img : images) {
      LvwForward f = model.forward(img, false);
      logits.push_back(f.logits->value);
    }
    double cls = classification_loss(logits, labels, cfg.use_sigmoid_head);
    CHECK(std::fabs(v.total - cls) <= 1e-9);
  }

  SUBCASE("equals the independently assembled weighted term sum") {
    LossWeights w;
    w.alpha = 0.8;
    w.beta = 10.0;
    int k = 3;
    Stage1Value v = stage1_objective(model, images, labels, attn_ptrs, w, k);

    std::vector<Tensor> logits, features;
    double align = 0.0;
    for (size_t i = 0; i < images.size(); ++i) {
      LvwForward f = model.forward(images[i], false);
      logits.push_back(f.logits->value);
      features.push_back(f.feature->value);
      // rebuild the combined grid from per-word activation grids
      std::vector<Tensor> grids;
      int hw = grid * grid;
      for (int j = 0; j < model.num_words(); ++j) {
        Tensor g({grid, grid});
        std::copy_n(f.act->value.data() + size_t(j) * hw, hw, g.data());
        grids.push_back(g);
      }
      Tensor combined = topk_combined_heatmap(grids, f.scores->value, k);
      align += alignment_loss({attn[i]}, {combined});
    }
    align /= double(images.size());
    double cls = classification_loss(logits, labels, cfg.use_sigmoid_head);
    double cluster = cluster_loss(features, model.words());
    CHECK(v.total ==
          doctest::Approx(cls + w.alpha * cluster + w.beta * align).epsilon(1e-6));
    CHECK(v.cls == doctest::Approx(cls).epsilon(1e-9));
    CHECK(v.cluster == doctest::Approx(cluster).epsilon(1e-9));
    CHECK(v.align == doctest::Approx(align).epsilon(1e-6));
  }

  SUBCASE("all terms vanish in the fully matched configuration") {
    // softmax head with a crushing margin, a word sitting on a patch, and
    // the attention target equal to the produced combined heatmap
    LvwConfig cfg2 = small_config();
    cfg2.use_sigmoid_head = false;
    LvwModel m2(cfg2);
    Rng rng2(19);
    m2.init(rng2);
    Tensor image = random_tensor({3, 16, 16}, rng2);
    Tensor z = m2.extract_features(image);
    for (int ch = 0; ch < cfg2.feature_channels; ++ch) {
      m2.words().at2(0, ch) = z.at3(ch, 1, 1);  // cluster term -> 0
    }
    m2.head().fill(0.0);
    LvwForward f = m2.forward(image, false);
    int top = argmax_index(f.scores->value);
    m2.head().at2(top, 0) = 50.0;  // classification -> ~0 for label 0

    f = m2.forward(image, false);
    std::vector<int> ids = topk_indices(f.scores->value, 2);
    NodePtr combined = minmax_norm(max_over_grids(gather_grids(f.act, ids)));
    Tensor target = combined->value;  // alignment -> 0

    LossWeights w;
    Stage1Value v = stage1_objective(m2, {image}, {0}, {&target}, w, 2);
    CHECK(v.total == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("stage-3 objective") {
  Rng rng(23);
  std::vector<Tensor> scores;
  std::vector<int> labels;
  for (int i = 0; i < 6; ++i) {
    scores.push_back(random_tensor({4}, rng, 0, 5));
    labels.push_back(int(rng.uniform_int(2)));
  }
  Tensor head = random_tensor({4, 2}, rng);

  SUBCASE("gamma=0 equals classification loss alone") {
    std::vector<Tensor> logits;
    for (const auto& s : scores) {
      logits.push_back(linear_nobias(constant(s), constant(head))->value);
    }
    CHECK(stage3_objective(scores, labels, head, 0.0, false) ==
          doctest::Approx(classification_loss(logits, labels, false)).epsilon(1e-9));
  }
  SUBCASE("zero head gives ln(C)") {
    Tensor zero_head({4, 2});
    CHECK(stage3_objective(scores, labels, zero_head, 0.0, true) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-9));
  }
  SUBCASE("term-sum oracle") {
    std::vector<Tensor> logits;
    for (const auto& s : scores) {
      logits.push_back(linear_nobias(constant(s), constant(head))->value);
    }
    double expected = classification_loss(logits, labels, true) + 0.01 * l1_penalty(head);
    CHECK(stage3_objective(scores, labels, head, 0.01, true) ==
          doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("stage objectives: analytic gradients match finite differences") {
  // the unit-scale version of the acceptance gradient check
  LvwConfig cfg = small_config();
  LvwModel model(cfg);
  Rng rng(29);
  model.init(rng);
  Tensor image = random_tensor({3, 16, 16}, rng);
  int label = 1;
  int grid = model.grid_size();
  Tensor attn = random_tensor({grid, grid}, rng, 0, 1);
  minmax_normalize(attn);
  LossWeights w;
  w.alpha = 0.8;
  w.beta = 10.0;
  int k = 2;

  SUBCASE("stage 1, words and trunk slices") {
    SampleObjective obj =
        stage1_sample_objective(model, image, label, &attn, w, k, /*with_grad=*/true);
    backward(obj.total);
    // pick a few parameters and compare against central differences
    auto params = model.params();
    auto leaves = obj.fwd.param_leaves;
    REQUIRE(params.size() == leaves.size());
    Rng pick(31);
    int checked = 0;
    for (int trial = 0; trial < 12; ++trial) {
      size_t pi = size_t(pick.uniform_int(int64_t(params.size() - 1)));  // skip head (frozen)
      int64_t e = pick.uniform_int(params[pi].value->size());
      double h = 1e-4;
      double saved = (*params[pi].value)[e];
      (*params[pi].value)[e] = saved + h;
      double up = stage1_sample_objective(model, image, label, &attn, w, k, false)
                      .total->value[0];
      (*params[pi].value)[e] = saved - h;
      double down = stage1_sample_objective(model, image, label, &attn, w, k, false)
                        .total->value[0];
      (*params[pi].value)[e] = saved;
      double numeric = (up - down) / (2 * h);
      double analytic = leaves[pi]->grad_allocated ? leaves[pi]->grad[e] : 0.0;
      double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-4});
      CHECK(std::fabs(numeric - analytic) / denom < 1e-3);
      ++checked;
    }
    CHECK(checked == 12);
  }

  SUBCASE("stage 3, head slices including the L1 term") {
    Rng srng(37);
    std::vector<Tensor> score_vecs;
    std::vector<int> labels;
    for (int i = 0; i < 5; ++i) {
      score_vecs.push_back(random_tensor({model.num_words()}, srng, 0, 5));
      labels.push_back(int(srng.uniform_int(cfg.num_classes)));
    }
    double gamma = 1e-2;
    Tensor head = model.head();
    // analytic: mean of per-sample CE grads + gamma * sign
    Tensor analytic(head.shape());
    for (size_t i = 0; i < score_vecs.size(); ++i) {
      HeadSampleObjective o =
          stage3_sample_objective(score_vecs[i], labels[i], head, cfg.use_sigmoid_head);
      backward(o.cls);
      const Tensor& g = o.head_leaf->ensure_grad();
      for (int64_t j = 0; j < g.size(); ++j) analytic[j] += g[j] / double(score_vecs.size());
    }
    for (int64_t j = 0; j < head.size(); ++j) {
      double v = head[j];
      analytic[j] += gamma * (v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
    }
    Rng pick(41);
    for (int trial = 0; trial < 10; ++trial) {
      int64_t e = pick.uniform_int(head.size());
      double h = 1e-4;
      Tensor up_head = head, down_head = head;
      up_head[e] += h;
      down_head[e] -= h;
      double up = stage3_objective(score_vecs, labels, up_head, gamma, cfg.use_sigmoid_head);
      double down =
          stage3_objective(score_vecs, labels, down_head, gamma, cfg.use_sigmoid_head);
      double numeric = (up - down) / (2 * h);
      double denom = std::max({std::fabs(numeric), std::fabs(analytic[e]), 1e-4});
      CHECK(std::fabs(numeric - analytic[e]) / denom < 1e-3);
    }
  }
}
