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

// Command-line harness over the shared library. Subcommand flags override
// config-file keys; every run writes its artifacts and a replayable run
// manifest under the configured output directory.

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lvw/lvw.h"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string output_dir;
  std::vector<std::string> overrides;  // key=value
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("-c,--config", args.config_path, "Config file (dotted key = value)");
  cmd->add_option("-o,--out", args.output_dir, "Output directory (overrides output.dir)");
  cmd->add_option("--set", args.overrides, "Override a config key, e.g. --set train.epochs=5")
      ->take_all();
}

int exit_code_for(lvw_status status) {
  switch (status) {
    case LVW_OK: return 0;
    case LVW_ERROR_DATA: return 2;
    case LVW_ERROR_NUMERIC: return 3;
    case LVW_ERROR_CONFIG:
    case LVW_ERROR_ARGUMENT:
    case LVW_ERROR_IO:
    case LVW_ERROR_INTERNAL:
    default: return 1;
  }
}

struct ExperimentHandle {
  lvw_experiment* ptr;
  ExperimentHandle() : ptr(lvw_experiment_new()) {}
  ~ExperimentHandle() { lvw_experiment_free(ptr); }
};

int apply_common(lvw_experiment* exp, const CommonArgs& args) {
  if (!args.config_path.empty()) {
    lvw_status s = lvw_load_config(exp, args.config_path.c_str());
    if (s != LVW_OK) {
      std::fprintf(stderr, "error: %s\n", lvw_last_error(exp));
      return exit_code_for(s);
    }
  }
  for (const std::string& kv : args.overrides) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "error: --set expects key=value, got '%s'\n", kv.c_str());
      return 1;
    }
    lvw_status s = lvw_set_option(exp, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (s != LVW_OK) {
      std::fprintf(stderr, "error: %s\n", lvw_last_error(exp));
      return exit_code_for(s);
    }
  }
  if (!args.output_dir.empty()) {
    lvw_status s = lvw_set_option(exp, "output.dir", args.output_dir.c_str());
    if (s != LVW_OK) {
      std::fprintf(stderr, "error: %s\n", lvw_last_error(exp));
      return exit_code_for(s);
    }
  }
  return 0;
}

int run(lvw_experiment* exp, lvw_status (*fn)(lvw_experiment*), const char* what) {
  lvw_status s = fn(exp);
  if (s != LVW_OK) {
    std::fprintf(stderr, "error (%s): %s\n", lvw_status_name(s), lvw_last_error(exp));
    return exit_code_for(s);
  }
  std::printf("%s: %s\n", what, lvw_last_artifact(exp));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learnable visual words: interpretable recognition toolkit"};
  app.set_version_flag("--version", std::string(lvw_version()));
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    CommonArgs args;
    lvw_status (*fn)(lvw_experiment*);
    const char* done_msg;
  };
  std::vector<std::unique_ptr<Sub>> subs;
  auto add = [&](const char* name, const char* help, lvw_status (*fn)(lvw_experiment*),
                 const char* done_msg) -> Sub& {
    auto sub = std::make_unique<Sub>();
    sub->cmd = app.add_subcommand(name, help);
    sub->fn = fn;
    sub->done_msg = done_msg;
    add_common(sub->cmd, sub->args);
    subs.push_back(std::move(sub));
    return *subs.back();
  };

  add("finetune-base", "Train and freeze the base classifier", lvw_run_finetune_base,
      "base checkpoint");
  auto& train = add("train", "Run the full training protocol", lvw_run_train, "checkpoint");
  std::string base_ckpt, epochs, seed;
  train.cmd->add_option("--base-checkpoint", base_ckpt,
                        "Base model checkpoint (paths.base_checkpoint)");
  train.cmd->add_option("--epochs", epochs, "Stage-1 epoch budget (train.epochs)");
  train.cmd->add_option("--seed", seed, "Training seed (train.seed)");

  auto& project = add("project", "Project words onto nearest training patches",
                      lvw_run_project, "projected checkpoint");
  auto& evaluate = add("evaluate", "Accuracy and IoU coverage on the test split",
                       lvw_run_evaluate, "report");
  std::string ckpt, kval, qval;
  for (Sub* s : {&project, &evaluate}) {
    s->cmd->add_option("--checkpoint", ckpt, "Model checkpoint (paths.lvw_checkpoint)");
  }
  evaluate.cmd->add_option("--base-checkpoint", base_ckpt,
                           "Base model checkpoint (paths.base_checkpoint)");
  evaluate.cmd->add_option("-k", kval, "Top-k words pooled (eval.k)");
  evaluate.cmd->add_option("-q", qval, "Mask quantile (eval.q)");

  auto& sweep = add("sweep", "Quantile and top-k sensitivity sweeps", lvw_run_sweep,
                    "sweep report");
  std::string qs, ks;
  sweep.cmd->add_option("--checkpoint", ckpt, "Model checkpoint (paths.lvw_checkpoint)");
  sweep.cmd->add_option("--base-checkpoint", base_ckpt,
                        "Base model checkpoint (paths.base_checkpoint)");
  sweep.cmd->add_option("--qs", qs, "Comma-separated quantiles (eval.qs)");
  sweep.cmd->add_option("--ks", ks, "Comma-separated k values (eval.ks)");

  auto& explain = add("explain", "Word visualizations and local explanations",
                      lvw_run_explain, "explanation tree");
  explain.cmd->add_option("--checkpoint", ckpt, "Model checkpoint (paths.lvw_checkpoint)");
  std::string image;
  auto& unseen = add("explain-unseen", "Explain an out-of-vocabulary image",
                     lvw_run_explain_unseen, "explanation tree");
  unseen.cmd->add_option("--checkpoint", ckpt, "Model checkpoint (paths.lvw_checkpoint)");
  unseen.cmd->add_option("--image", image,
                         "Query image path or synthetic:<classA>,<classB> (explain.image)");
  add("synth", "Materialize the bundled synthetic dataset", lvw_run_synth, "dataset");

  CLI11_PARSE(app, argc, argv);

  ExperimentHandle exp;
  if (exp.ptr == nullptr) {
    std::fprintf(stderr, "error: out of memory\n");
    return 1;
  }

  for (const auto& sub : subs) {
    if (!sub->cmd->parsed()) continue;
    int rc = apply_common(exp.ptr, sub->args);
    if (rc != 0) return rc;
    auto set_if = [&](const char* key, const std::string& value) -> int {
      if (value.empty()) return 0;
      lvw_status s = lvw_set_option(exp.ptr, key, value.c_str());
      if (s != LVW_OK) {
        std::fprintf(stderr, "error: %s\n", lvw_last_error(exp.ptr));
        return exit_code_for(s);
      }
      return 0;
    };
    int rc2 = 0;
    if ((rc2 = set_if("paths.base_checkpoint", base_ckpt))) return rc2;
    if ((rc2 = set_if("train.epochs", epochs))) return rc2;
    if ((rc2 = set_if("train.seed", seed))) return rc2;
    if ((rc2 = set_if("paths.lvw_checkpoint", ckpt))) return rc2;
    if ((rc2 = set_if("eval.k", kval))) return rc2;
    if ((rc2 = set_if("eval.q", qval))) return rc2;
    if ((rc2 = set_if("eval.qs", qs))) return rc2;
    if ((rc2 = set_if("eval.ks", ks))) return rc2;
    if ((rc2 = set_if("explain.image", image))) return rc2;
    return run(exp.ptr, sub->fn, sub->done_msg);
  }
  return 1;
}
