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

// Exercises the shared library through its C surface only.

#include <doctest.h>
#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "lvw/lvw.h"

namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
  static int counter = 0;
  std::string dir = (fs::temp_directory_path() /
                     ("lvw_capi_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++)))
                        .string();
  fs::create_directories(dir);
  return dir;
}

struct Handle {
  lvw_experiment* exp;
  Handle() : exp(lvw_experiment_new()) {}
  ~Handle() { lvw_experiment_free(exp); }
};

void set_tiny_experiment(lvw_experiment* exp, const std::string& out) {
  const char* kv[][2] = {
      {"dataset.kind", "synthetic"},   {"dataset.classes", "2"},
      {"dataset.train_per_class", "6"}, {"dataset.test_per_class", "3"},
      {"dataset.resolution", "32"},     {"dataset.seed", "5"},
      {"model.trunk_channels", "4,8"},  {"model.feature_channels", "8"},
      {"model.words_per_class", "2"},   {"train.epochs", "2"},
      {"train.project_every", "2"},     {"train.stage3_epochs", "2"},
      {"train.batch_size", "6"},        {"train.k", "2"},
      {"train.lr_other", "0.003"},      {"base.epochs", "2"},
      {"base.batch_size", "6"},         {"eval.k", "2"},
      {"eval.ks", "1,2"},               {"eval.qs", "10,50,90"},
      {"explain.k", "2"},               {"explain.max_images", "2"},
  };
  for (auto& pair : kv) {
    REQUIRE(lvw_set_option(exp, pair[0], pair[1]) == LVW_OK);
  }
  REQUIRE(lvw_set_option(exp, "output.dir", out.c_str()) == LVW_OK);
}

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::string(lvw_version()) == "0.1.0");
  CHECK(std::string(lvw_status_name(LVW_OK)) == "ok");
  CHECK(std::string(lvw_status_name(LVW_ERROR_NUMERIC)) == "numeric failure");
}

TEST_CASE("option validation through the C surface") {
  Handle h;
  REQUIRE(h.exp != nullptr);
  CHECK(lvw_set_option(h.exp, "train.epochs", "5") == LVW_OK);
  CHECK(lvw_set_option(h.exp, "not.a.key", "5") == LVW_ERROR_CONFIG);
  CHECK(std::string(lvw_last_error(h.exp)).find("unknown config key") != std::string::npos);
  CHECK(lvw_set_option(nullptr, "train.epochs", "5") == LVW_ERROR_ARGUMENT);
  CHECK(lvw_load_config(h.exp, "/no/such/file.cfg") == LVW_ERROR_CONFIG);
}

TEST_CASE("config file loading") {
  Handle h;
  std::string dir = temp_dir("cfg");
  std::string path = dir + "/exp.cfg";
  std::ofstream(path) << "train.epochs = 3\n# comment\ndataset.kind = synthetic\n";
  CHECK(lvw_load_config(h.exp, path.c_str()) == LVW_OK);
}

TEST_CASE("metric entry points") {
  SUBCASE("quantile mask of [1,2,3,4] at q=50") {
    double map[4] = {1, 2, 3, 4};
    uint8_t mask[4];
    REQUIRE(lvw_quantile_mask(map, 2, 2, 50.0, mask) == LVW_OK);
    CHECK(mask[0] == 0);
    CHECK(mask[1] == 0);
    CHECK(mask[2] == 1);
    CHECK(mask[3] == 1);
  }
  SUBCASE("identical maps give IoU 1") {
    double a[9];
    for (int i = 0; i < 9; ++i) a[i] = i * 0.37;
    double iou = -1;
    REQUIRE(lvw_iou_coverage(a, a, 3, 3, 50.0, &iou) == LVW_OK);
    CHECK(iou == 1.0);
  }
  SUBCASE("invalid arguments rejected") {
    double a[4] = {0, 1, 2, 3};
    uint8_t mask[4];
    CHECK(lvw_quantile_mask(nullptr, 2, 2, 50.0, mask) == LVW_ERROR_ARGUMENT);
    CHECK(lvw_quantile_mask(a, 2, 2, 100.0, mask) == LVW_ERROR_ARGUMENT);
    double iou;
    CHECK(lvw_iou_coverage(a, a, 0, 2, 50.0, &iou) == LVW_ERROR_ARGUMENT);
  }
}

TEST_CASE("micro pipeline end to end over the C API") {
  std::string out = temp_dir("pipeline");
  Handle h;
  set_tiny_experiment(h.exp, out);

  // base model
  REQUIRE_MESSAGE(lvw_run_finetune_base(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  std::string base_ckpt = lvw_last_artifact(h.exp);
  CHECK(fs::exists(base_ckpt + "/manifest.json"));

  // training needs the base checkpoint path
  CHECK(lvw_run_train(h.exp) == LVW_ERROR_CONFIG);  // not set yet
  REQUIRE(lvw_set_option(h.exp, "paths.base_checkpoint", base_ckpt.c_str()) == LVW_OK);
  REQUIRE_MESSAGE(lvw_run_train(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  std::string ckpt = lvw_last_artifact(h.exp);
  CHECK(fs::exists(ckpt + "/manifest.json"));
  CHECK(fs::exists(out + "/model/trace.csv"));
  CHECK(fs::exists(out + "/run_manifest.json"));

  // evaluation emits the report pair
  REQUIRE(lvw_set_option(h.exp, "paths.lvw_checkpoint", ckpt.c_str()) == LVW_OK);
  REQUIRE_MESSAGE(lvw_run_evaluate(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  std::string eval_dir = lvw_last_artifact(h.exp);
  CHECK(fs::exists(eval_dir + "/report.json"));
  CHECK(fs::exists(eval_dir + "/per_sample.csv"));
  {
    std::ifstream in(eval_dir + "/report.json");
    std::string body((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    CHECK(body.find("\"mean_iou\"") != std::string::npos);
    CHECK(body.find("\"accuracy\"") != std::string::npos);
    CHECK(body.find("\"checkpoint_sha256\"") != std::string::npos);
  }

  // identical second evaluation (determinism at the artifact level)
  std::string out2 = temp_dir("pipeline2");
  REQUIRE(lvw_set_option(h.exp, "output.dir", out2.c_str()) == LVW_OK);
  REQUIRE_MESSAGE(lvw_run_evaluate(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  std::string eval_dir2 = lvw_last_artifact(h.exp);
  std::ifstream r1(eval_dir + "/report.json"), r2(eval_dir2 + "/report.json");
  std::string b1((std::istreambuf_iterator<char>(r1)), std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(r2)), std::istreambuf_iterator<char>());
  CHECK(b1 == b2);

  // sweep and explanations
  REQUIRE(lvw_set_option(h.exp, "output.dir", out.c_str()) == LVW_OK);
  REQUIRE_MESSAGE(lvw_run_sweep(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  CHECK(fs::exists(out + "/sweep/quantile_sweep.csv"));
  CHECK(fs::exists(out + "/sweep/topk_sweep.csv"));
  REQUIRE_MESSAGE(lvw_run_explain(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  CHECK(fs::exists(out + "/explain/index.json"));
  CHECK(fs::exists(out + "/explain/words/word_000.png"));
  CHECK(fs::exists(out + "/explain/category_similarity.json"));
  REQUIRE_MESSAGE(lvw_run_explain_unseen(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  CHECK(fs::exists(out + "/explain_unseen/index.json"));
  CHECK(fs::exists(out + "/explain_unseen/input.png"));
}

TEST_CASE("synth materializes a dataset folder") {
  std::string out = temp_dir("synth");
  Handle h;
  REQUIRE(lvw_set_option(h.exp, "dataset.classes", "2") == LVW_OK);
  REQUIRE(lvw_set_option(h.exp, "dataset.train_per_class", "2") == LVW_OK);
  REQUIRE(lvw_set_option(h.exp, "dataset.test_per_class", "1") == LVW_OK);
  REQUIRE(lvw_set_option(h.exp, "output.dir", out.c_str()) == LVW_OK);
  REQUIRE_MESSAGE(lvw_run_synth(h.exp) == LVW_OK, std::string(lvw_last_error(h.exp)));
  CHECK(fs::exists(out + "/dataset/train/class_0"));
  CHECK(fs::exists(out + "/dataset/test/class_1"));
}

TEST_CASE("missing dataset root is a data/config failure") {
  Handle h;
  std::string out = temp_dir("bad");
  REQUIRE(lvw_set_option(h.exp, "dataset.kind", "folder") == LVW_OK);
  REQUIRE(lvw_set_option(h.exp, "dataset.root", "/no/such/dataset") == LVW_OK);
  REQUIRE(lvw_set_option(h.exp, "output.dir", out.c_str()) == LVW_OK);
  CHECK(lvw_run_finetune_base(h.exp) == LVW_ERROR_CONFIG);
  CHECK(std::string(lvw_last_error(h.exp)).find("dataset.root") != std::string::npos);
}
