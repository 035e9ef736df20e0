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

#include "core/config.hpp"
#include "core/errors.hpp"

using namespace lvw;

TEST_CASE("config parsing with comments and whitespace") {
  Config cfg = Config::from_string(
      "# experiment settings\n"
      "train.epochs = 60   # stage-1 budget\n"
      "  train.beta=10.0\n"
      "\n"
      "dataset.kind = synthetic\n");
  CHECK(cfg.get_int("train.epochs", 0) == 60);
  CHECK(cfg.get_double("train.beta", 0) == doctest::Approx(10.0));
  CHECK(cfg.get_string("dataset.kind") == "synthetic");
  CHECK(cfg.get_int("train.project_every", 10) == 10);  // fallback
}

TEST_CASE("unknown keys fail fast") {
  CHECK_THROWS_AS(Config::from_string("train.epoks = 60\n"), ConfigError);
  Config cfg;
  CHECK_THROWS_AS(cfg.set("no.such.key", "1"), ConfigError);
}

TEST_CASE("malformed lines and values") {
  CHECK_THROWS_AS(Config::from_string("train.epochs 60\n"), ConfigError);
  Config cfg = Config::from_string("train.epochs = sixty\n");
  CHECK_THROWS_AS(cfg.get_int("train.epochs", 0), ConfigError);
  Config cfg2 = Config::from_string("model.use_sigmoid_head = maybe\n");
  CHECK_THROWS_AS(cfg2.get_bool("model.use_sigmoid_head", true), ConfigError);
}

TEST_CASE("flag overrides replace file values") {
  Config cfg = Config::from_string("train.epochs = 60\n");
  cfg.set("train.epochs", "5");
  CHECK(cfg.get_int("train.epochs", 0) == 5);
}

TEST_CASE("lists parse") {
  Config cfg = Config::from_string("eval.qs = 10, 30, 50, 70, 90\neval.ks = 1,3,5,10\n");
  CHECK(cfg.get_double_list("eval.qs", {}) == std::vector<double>{10, 30, 50, 70, 90});
  CHECK(cfg.get_int_list("eval.ks", {}) == std::vector<int64_t>{1, 3, 5, 10});
}

TEST_CASE("canonical text is sorted and stable") {
  Config a = Config::from_string("train.beta = 10\ntrain.alpha = 0.8\n");
  Config b = Config::from_string("train.alpha = 0.8\ntrain.beta = 10\n");
  CHECK(a.canonical_text() == b.canonical_text());
  CHECK(a.canonical_text() == "train.alpha = 0.8\ntrain.beta = 10\n");
}

TEST_CASE("booleans accept common spellings") {
  Config cfg = Config::from_string("model.use_sigmoid_head = off\n");
  CHECK(cfg.get_bool("model.use_sigmoid_head", true) == false);
  Config cfg2 = Config::from_string("model.use_sigmoid_head = TRUE\n");
  CHECK(cfg2.get_bool("model.use_sigmoid_head", false) == true);
}
