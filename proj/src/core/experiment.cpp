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

#include "core/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include <json.hpp>

#include "core/attention.hpp"
#include "core/checkpoint.hpp"
#include "core/errors.hpp"
#include "core/explain.hpp"
#include "core/image.hpp"
#include "core/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lvw {

namespace {

constexpr const char* kVersion = "0.1.0";

// Exclusive lock on an output directory; concurrent runs must use distinct
// directories.
class DirLock {
 public:
  explicit DirLock(const std::string& dir) : path_(fs::path(dir) / ".lvw_lock") {
    fs::create_directories(dir);
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      throw ConfigError("output directory is locked by another run (remove " +
                        path_.string() + " if stale)");
    }
  }
  ~DirLock() {
    if (fd_ >= 0) {
      ::close(fd_);
      ::unlink(path_.c_str());
    }
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

std::string sanitize_id(const std::string& id) {
  std::string out = id;
  for (char& c : out) {
    if (c == '/' || c == '\\' || c == ':') c = '_';
  }
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << text;
}

json box_json(const BoundingBox& b) {
  return json{{"row0", b.row0}, {"col0", b.col0}, {"row1", b.row1}, {"col1", b.col1}};
}

}  // namespace

void Experiment::load_config_file(const std::string& path) {
  config_ = Config::from_file(path);
}

void Experiment::set_option(const std::string& key, const std::string& value) {
  config_.set(key, value);
}

std::string Experiment::output_dir(const std::string& subdir) const {
  std::string root = config_.get_string("output.dir", "");
  if (root.empty()) throw ConfigError("output.dir is required");
  fs::path p = subdir.empty() ? fs::path(root) : fs::path(root) / subdir;
  fs::create_directories(p);
  return p.string();
}

void Experiment::write_run_manifest(const std::string& dir, const std::string& command,
                                    const std::map<std::string, std::string>& inputs,
                                    const std::map<std::string, std::string>& outputs) const {
  json cfg = json::object();
  for (const auto& [k, v] : config_.entries()) cfg[k] = v;
  json j = {{"command", command},
            {"version", kVersion},
            {"config", cfg},
            {"config_sha256", sha256_hex(config_.canonical_text())},
            {"inputs", inputs},
            {"outputs", outputs}};
  write_text((fs::path(dir) / "run_manifest.json").string(), j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// dataset plumbing
// ---------------------------------------------------------------------------

LoadedDataset Experiment::load_dataset() const {
  std::string kind = config_.get_string("dataset.kind", "synthetic");
  int resolution = static_cast<int>(config_.get_int("dataset.resolution", 64));
  if (resolution < 32) throw ConfigError("dataset.resolution must be >= 32");
  if (kind == "synthetic") {
    SyntheticConfig sc;
    sc.classes = static_cast<int>(config_.get_int("dataset.classes", 4));
    sc.train_per_class = static_cast<int>(config_.get_int("dataset.train_per_class", 50));
    sc.test_per_class = static_cast<int>(config_.get_int("dataset.test_per_class", 25));
    sc.resolution = resolution;
    sc.seed = static_cast<uint64_t>(config_.get_int("dataset.seed", 7));
    sc.noise = config_.get_double("dataset.noise", 12.0);
    sc.part_size = static_cast<int>(config_.get_int("dataset.part_size", 0));
    return generate_synthetic(sc);
  }
  if (kind == "folder") {
    std::string root = config_.get_string("dataset.root");
    if (!fs::exists(root)) throw ConfigError("dataset.root does not exist: " + root);
    return load_folder_dataset(root, resolution);
  }
  throw ConfigError("dataset.kind must be 'synthetic' or 'folder'");
}

std::vector<EvalSample> Experiment::to_eval_samples(const std::vector<DatasetItem>& items) {
  std::vector<EvalSample> out;
  out.reserve(items.size());
  for (const auto& item : items) {
    out.push_back({item.id, item.label, to_input_tensor(item.image)});
  }
  return out;
}

std::vector<TrainSample> Experiment::build_train_samples(
    const std::vector<DatasetItem>& items, const std::vector<AttentionMap>* attention,
    int grid_size) {
  if (attention && attention->size() != items.size())
    throw ArgumentError("attention map count does not match training set");
  std::vector<TrainSample> out(items.size());
  for (size_t i = 0; i < items.size(); ++i) {
    TrainSample& s = out[i];
    s.id = items[i].id;
    s.label = items[i].label;
    s.image = to_input_tensor(items[i].image);
    s.image_flipped = to_input_tensor(flip_horizontal(items[i].image));
    if (attention) {
      Tensor target = resample_bilinear((*attention)[i].values, grid_size, grid_size);
      minmax_normalize(target);
      s.attn_grid = target;
      s.attn_grid_flipped = flip_map_horizontal(target);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

namespace {

BaseConfig base_config_from(const Config& cfg, const LoadedDataset& data) {
  BaseConfig bc;
  bc.input_resolution = data.resolution;
  bc.trunk.in_channels = 3;
  std::vector<int64_t> channels = cfg.get_int_list("base.trunk_channels",
                                                   cfg.get_int_list("model.trunk_channels",
                                                                    {8, 16, 32}));
  for (int64_t c : channels) bc.trunk.channels.push_back(static_cast<int>(c));
  bc.num_classes = static_cast<int>(data.class_names.size());
  return bc;
}

LvwConfig lvw_config_from(const Config& cfg, const LoadedDataset& data) {
  LvwConfig mc;
  mc.input_resolution = data.resolution;
  mc.trunk.in_channels = 3;
  std::vector<int64_t> channels = cfg.get_int_list("model.trunk_channels", {8, 16, 32});
  for (int64_t c : channels) mc.trunk.channels.push_back(static_cast<int>(c));
  mc.feature_channels = static_cast<int>(cfg.get_int("model.feature_channels", 128));
  mc.num_classes = static_cast<int>(data.class_names.size());
  mc.words_per_class = static_cast<int>(cfg.get_int("model.words_per_class", 5));
  mc.use_sigmoid_head = cfg.get_bool("model.use_sigmoid_head", true);
  mc.activation_eps = cfg.get_double("model.activation_epsilon", 1e-4);
  return mc;
}

TrainingConfig training_config_from(const Config& cfg) {
  TrainingConfig tc;
  tc.epochs = static_cast<int>(cfg.get_int("train.epochs", 200));
  tc.project_every = static_cast<int>(cfg.get_int("train.project_every", 10));
  tc.stage3_epochs = static_cast<int>(cfg.get_int("train.stage3_epochs", 20));
  tc.warmup_epochs = static_cast<int>(cfg.get_int("train.warmup_epochs", 0));
  tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 32));
  tc.lr_backbone = cfg.get_double("train.lr_backbone", 1e-4);
  tc.lr_other = cfg.get_double("train.lr_other", 3e-3);
  tc.k = static_cast<int>(cfg.get_int("train.k", 10));
  tc.weights.alpha = cfg.get_double("train.alpha", 0.8);
  tc.weights.beta = cfg.get_double("train.beta", 10.0);
  tc.weights.gamma = cfg.get_double("train.gamma", 1e-4);
  tc.seed = static_cast<uint64_t>(cfg.get_int("train.seed", 1));
  if (tc.lr_backbone <= 0 || tc.lr_other <= 0)
    throw ConfigError("learning rates must be positive");
  return tc;
}

std::string dataset_label(const Config& cfg) {
  if (cfg.get_string("dataset.kind", "synthetic") == "synthetic") {
    return "synthetic(classes=" + std::to_string(cfg.get_int("dataset.classes", 4)) +
           ",seed=" + std::to_string(cfg.get_int("dataset.seed", 7)) + ")";
  }
  return cfg.get_string("dataset.root");
}

double test_accuracy(const BaseModel& model, const std::vector<EvalSample>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  for (const auto& s : samples) {
    BaseForward f = model.forward(s.image, /*with_grad=*/false);
    if (argmax_index(f.logits->value) == s.label) ++correct;
  }
  return double(correct) / double(samples.size());
}

}  // namespace

std::string Experiment::run_finetune_base() {
  std::string out = output_dir("");
  DirLock lock(out);
  LoadedDataset data = load_dataset();
  if (data.train.empty()) throw DataError("training split is empty");

  BaseConfig bc = base_config_from(config_, data);
  BaseModel model(bc);
  uint64_t seed = static_cast<uint64_t>(config_.get_int("base.seed", 1));
  Rng rng(seed);
  model.init(rng);

  std::vector<BaseTrainSample> samples;
  samples.reserve(data.train.size());
  for (const auto& item : data.train) {
    BaseTrainSample s;
    s.image = to_input_tensor(item.image);
    s.image_flipped = to_input_tensor(flip_horizontal(item.image));
    s.label = item.label;
    samples.push_back(std::move(s));
  }

  int epochs = static_cast<int>(config_.get_int("base.epochs", 30));
  int batch = static_cast<int>(config_.get_int("base.batch_size", 32));
  double lr = config_.get_double("base.lr", 3e-3);
  auto trace = train_base_model(model, samples, epochs, batch, lr, seed,
                                (fs::path(out) / "base_trace.csv").string());

  std::string ckpt_dir = (fs::path(out) / "base_checkpoint").string();
  CheckpointMeta meta;
  meta.kind = "base";
  meta.epoch = epochs;
  meta.stage = "final";
  meta.rng_state = rng.serialize();
  meta.config = config_.entries();
  meta.class_names = data.class_names;
  save_base_checkpoint(ckpt_dir, model, meta);

  double train_acc = trace.empty() ? 0.0 : trace.back().accuracy;
  double test_acc = test_accuracy(model, to_eval_samples(data.test));
  json summary = {{"train_accuracy", train_acc},
                  {"test_accuracy", test_acc},
                  {"epochs", epochs},
                  {"dataset", dataset_label(config_)},
                  {"checkpoint", ckpt_dir},
                  {"checkpoint_sha256", checkpoint_hash(ckpt_dir)}};
  write_text((fs::path(out) / "base_summary.json").string(), summary.dump(2) + "\n");

  write_run_manifest(out, "finetune-base", {},
                     {{"base_checkpoint", ckpt_dir},
                      {"base_checkpoint_sha256", checkpoint_hash(ckpt_dir)}});
  return ckpt_dir;
}

std::string Experiment::run_train() {
  std::string out = output_dir("");
  DirLock lock(out);
  LoadedDataset data = load_dataset();
  if (data.train.empty()) throw DataError("training split is empty");

  std::string base_dir = config_.get_string("paths.base_checkpoint", "");
  if (base_dir.empty())
    throw ConfigError("paths.base_checkpoint is required for training (run finetune-base)");
  if (!fs::exists(fs::path(base_dir) / "manifest.json"))
    throw ConfigError("base checkpoint not found at " + base_dir);
  BaseModel base = load_base_checkpoint(base_dir);
  std::string base_hash = checkpoint_hash(base_dir);

  TrainingConfig tc = training_config_from(config_);
  LvwConfig mc = lvw_config_from(config_, data);
  LvwModel model(mc);
  Rng init_rng(tc.seed);
  model.init(init_rng);
  if (config_.get_bool("model.init_from_base", true)) {
    model.init_trunk_from(base.trunk());
  }

  // Attention targets for the alignment loss; skipped entirely for the
  // no-alignment ablation (beta = 0).
  std::vector<TrainSample> samples;
  bool use_alignment = tc.weights.beta != 0.0;
  if (use_alignment) {
    ClassSource source = class_source_from_name(
        config_.get_string("attention.class_source", "ground_truth"));
    std::string cache_dir = config_.get_string(
        "paths.attention_cache",
        (fs::path(out) / ("attention_train_" + class_source_name(source))).string());
    AttentionCache cache(cache_dir, base_hash, class_source_name(source), data.resolution);
    std::vector<Tensor> images;
    std::vector<std::string> ids;
    std::vector<int> labels;
    for (const auto& item : data.train) {
      images.push_back(to_input_tensor(item.image));
      ids.push_back(item.id);
      labels.push_back(item.label);
    }
    std::vector<AttentionMap> maps =
        attention_batch(base, images, ids, labels, source, cache);
    samples = build_train_samples(data.train, &maps, model.grid_size());
  } else {
    samples = build_train_samples(data.train, nullptr, model.grid_size());
  }

  Trainer trainer(std::move(model), tc, (fs::path(out) / "model").string(),
                  config_.entries(), data.class_names);
  std::string final_ckpt = trainer.full_protocol(samples);

  write_run_manifest(out, "train",
                     {{"base_checkpoint_sha256", base_hash},
                      {"dataset", dataset_label(config_)}},
                     {{"checkpoint", final_ckpt},
                      {"checkpoint_sha256", checkpoint_hash(final_ckpt)}});
  return final_ckpt;
}

std::string Experiment::run_project() {
  std::string out = output_dir("");
  DirLock lock(out);
  std::string ckpt_dir = config_.get_string("paths.lvw_checkpoint", "");
  if (ckpt_dir.empty()) throw ConfigError("paths.lvw_checkpoint is required");
  CheckpointMeta meta;
  LvwModel model = load_lvw_checkpoint(ckpt_dir, &meta);

  LoadedDataset data = load_dataset();
  if (data.train.empty()) throw DataError("training split is empty");
  std::vector<PatchSource> sources(data.train.size());
  for (size_t i = 0; i < data.train.size(); ++i) {
    sources[i].image_id = data.train[i].id;
    sources[i].class_id = data.train[i].label;
    sources[i].feature = model.extract_features(to_input_tensor(data.train[i].image));
  }
  project_word_bank(model.words(), model.provenance(), sources);

  std::string out_ckpt = (fs::path(out) / "checkpoint_projected").string();
  meta.stage = "projected";
  save_lvw_checkpoint(out_ckpt, model, meta);
  write_run_manifest(out, "project",
                     {{"lvw_checkpoint_sha256", checkpoint_hash(ckpt_dir)}},
                     {{"checkpoint", out_ckpt},
                      {"checkpoint_sha256", checkpoint_hash(out_ckpt)}});
  return out_ckpt;
}

namespace {

struct EvalSetup {
  LvwModel model;
  std::unique_ptr<BaseModel> base;  // may be null
  std::string checkpoint_hash_hex;
  std::string base_hash_hex;
};

EvalSetup load_eval_setup(const Config& cfg) {
  EvalSetup s;
  std::string ckpt_dir = cfg.get_string("paths.lvw_checkpoint", "");
  if (ckpt_dir.empty()) throw ConfigError("paths.lvw_checkpoint is required");
  if (!fs::exists(fs::path(ckpt_dir) / "manifest.json"))
    throw ConfigError("lvw checkpoint not found at " + ckpt_dir);
  s.model = load_lvw_checkpoint(ckpt_dir);
  s.checkpoint_hash_hex = checkpoint_hash(ckpt_dir);
  std::string base_dir = cfg.get_string("paths.base_checkpoint", "");
  if (!base_dir.empty()) {
    if (!fs::exists(fs::path(base_dir) / "manifest.json"))
      throw ConfigError("base checkpoint not found at " + base_dir);
    s.base = std::make_unique<BaseModel>(load_base_checkpoint(base_dir));
    s.base_hash_hex = checkpoint_hash(base_dir);
  }
  return s;
}

}  // namespace

std::string Experiment::run_evaluate() {
  std::string out = output_dir("eval");
  DirLock lock(out);
  EvalSetup setup = load_eval_setup(config_);
  LoadedDataset data = load_dataset();
  if (data.test.empty()) throw DataError("test split is empty");
  std::vector<EvalSample> samples = to_eval_samples(data.test);

  int k = static_cast<int>(config_.get_int("eval.k", 10));
  double q = config_.get_double("eval.q", 50.0);
  ClassSource source =
      class_source_from_name(config_.get_string("eval.class_source", "predicted"));
  AttentionCache cache(
      (fs::path(out) / ("attention_test_" + class_source_name(source))).string(),
      setup.base_hash_hex, class_source_name(source), data.resolution);

  EvalReport report =
      evaluate(setup.model, setup.base.get(), samples, k, q, source, cache);

  std::ostringstream csv;
  csv << "image_id,label,predicted,iou,excluded\n";
  for (const auto& row : report.rows) {
    csv << row.id << "," << row.label << "," << row.predicted << "," << row.iou << ","
        << (row.excluded ? 1 : 0) << "\n";
  }
  write_text((fs::path(out) / "per_sample.csv").string(), csv.str());

  json j = {{"mean_iou", report.mean_iou},
            {"accuracy", report.accuracy},
            {"k", report.k},
            {"q", report.q},
            {"num_samples", report.num_samples},
            {"num_excluded", report.num_excluded},
            {"dataset", dataset_label(config_)},
            {"checkpoint_sha256", setup.checkpoint_hash_hex}};
  write_text((fs::path(out) / "report.json").string(), j.dump(2) + "\n");

  write_run_manifest(out, "evaluate",
                     {{"lvw_checkpoint_sha256", setup.checkpoint_hash_hex},
                      {"base_checkpoint_sha256", setup.base_hash_hex}},
                     {{"report", (fs::path(out) / "report.json").string()}});
  return out;
}

std::string Experiment::run_sweep() {
  std::string out = output_dir("sweep");
  DirLock lock(out);
  EvalSetup setup = load_eval_setup(config_);
  LoadedDataset data = load_dataset();
  if (data.test.empty()) throw DataError("test split is empty");
  std::vector<EvalSample> samples = to_eval_samples(data.test);

  int k = static_cast<int>(config_.get_int("eval.k", 10));
  double q = config_.get_double("eval.q", 50.0);
  ClassSource source =
      class_source_from_name(config_.get_string("eval.class_source", "predicted"));
  AttentionCache cache(
      (fs::path(out) / ("attention_test_" + class_source_name(source))).string(),
      setup.base_hash_hex, class_source_name(source), data.resolution);

  std::vector<double> qs = config_.get_double_list("eval.qs", {10, 30, 50, 70, 90});
  auto qrows = quantile_sweep(setup.model, setup.base.get(), samples, k, qs, source, cache);
  std::ostringstream qcsv;
  qcsv << "q,mean_iou\n";
  for (const auto& r : qrows) qcsv << r.q << "," << r.mean_iou << "\n";
  write_text((fs::path(out) / "quantile_sweep.csv").string(), qcsv.str());

  std::vector<int64_t> ks64 = config_.get_int_list("eval.ks", {1, 3, 5, 10});
  std::vector<int> ks(ks64.begin(), ks64.end());
  int subsets = static_cast<int>(config_.get_int("eval.subsets", 3));
  double subset_fraction = config_.get_double("eval.subset_fraction", 0.5);
  uint64_t subset_seed = static_cast<uint64_t>(config_.get_int("eval.subset_seed", 1));
  auto krows = topk_sweep(setup.model, setup.base.get(), samples, ks, q, source, cache,
                          subsets, subset_fraction, subset_seed);
  std::ostringstream kcsv;
  kcsv << "k,mean_iou,iou_std,accuracy\n";
  for (const auto& r : krows) {
    kcsv << r.k << "," << r.mean_iou << "," << r.iou_std << "," << r.accuracy << "\n";
  }
  write_text((fs::path(out) / "topk_sweep.csv").string(), kcsv.str());

  json j = {{"dataset", dataset_label(config_)},
            {"checkpoint_sha256", setup.checkpoint_hash_hex},
            {"k", k},
            {"q", q},
            {"quantile_sweep", json::array()},
            {"topk_sweep", json::array()}};
  for (const auto& r : qrows) j["quantile_sweep"].push_back({{"q", r.q}, {"mean_iou", r.mean_iou}});
  for (const auto& r : krows) {
    j["topk_sweep"].push_back({{"k", r.k},
                               {"mean_iou", r.mean_iou},
                               {"iou_std", r.iou_std},
                               {"accuracy", r.accuracy}});
  }
  write_text((fs::path(out) / "sweep_summary.json").string(), j.dump(2) + "\n");

  write_run_manifest(out, "sweep",
                     {{"lvw_checkpoint_sha256", setup.checkpoint_hash_hex},
                      {"base_checkpoint_sha256", setup.base_hash_hex}},
                     {{"summary", (fs::path(out) / "sweep_summary.json").string()}});
  return out;
}

std::string Experiment::run_explain() {
  std::string out = output_dir("explain");
  DirLock lock(out);
  EvalSetup setup = load_eval_setup(config_);
  LoadedDataset data = load_dataset();
  if (data.train.empty()) throw DataError("training split is empty");

  double box_threshold = config_.get_double("explain.box_threshold", 0.95);
  double alpha = config_.get_double("explain.overlay_alpha", 0.5);
  int k = static_cast<int>(config_.get_int("explain.k", 10));
  int max_images = static_cast<int>(config_.get_int("explain.max_images", 8));

  std::vector<EvalSample> train_samples = to_eval_samples(data.train);
  ExplainContext ctx(setup.model, train_samples);

  json index;
  index["checkpoint_sha256"] = setup.checkpoint_hash_hex;
  index["dataset"] = dataset_label(config_);
  index["class_names"] = data.class_names;

  // Global word visualizations.
  fs::create_directories(fs::path(out) / "words");
  json words = json::array();
  for (int j = 0; j < setup.model.num_words(); ++j) {
    WordVisualization vis = ctx.global_visualization(j, box_threshold);
    const Image& src = data.train[size_t(vis.sample_index)].image;
    char name[64];
    std::snprintf(name, sizeof(name), "words/word_%03d.png", j);
    write_png((fs::path(out) / name).string(),
              render_overlay_with_box(src, vis.heatmap, vis.box, alpha));
    const WordProvenance& prov = setup.model.provenance()[size_t(j)];
    words.push_back({{"word_id", j},
                     {"file", name},
                     {"image_id", vis.image_id},
                     {"class_id", vis.class_id},
                     {"score", vis.score},
                     {"box", box_json(vis.box)},
                     {"projected", prov.projected},
                     {"provenance_image_id", prov.image_id},
                     {"provenance_class", prov.class_id}});
  }
  index["words"] = words;

  // Local explanations for a few test images.
  json images = json::array();
  int count = std::min<int>(max_images, static_cast<int>(data.test.size()));
  for (int i = 0; i < count; ++i) {
    const DatasetItem& item = data.test[size_t(i)];
    Tensor input = to_input_tensor(item.image);
    auto entries = ctx.local_explanation(input, k, box_threshold);
    std::string folder = "images/" + sanitize_id(item.id);
    fs::create_directories(fs::path(out) / folder);
    write_png((fs::path(out) / folder / "input.png").string(), item.image);
    json jentries = json::array();
    for (size_t r = 0; r < entries.size(); ++r) {
      const ExplanationEntry& e = entries[r];
      char name[96];
      std::snprintf(name, sizeof(name), "rank_%02d_word_%03d.png", int(r), e.word_id);
      write_png((fs::path(out) / folder / name).string(),
                render_overlay_with_box(item.image, e.heatmap, e.box, alpha));
      char gname[96];
      std::snprintf(gname, sizeof(gname), "rank_%02d_word_%03d_source.png", int(r),
                    e.word_id);
      const Image& src = data.train[size_t(e.global.sample_index)].image;
      write_png((fs::path(out) / folder / gname).string(),
                render_overlay_with_box(src, e.global.heatmap, e.global.box, alpha));
      jentries.push_back({{"rank", int(r)},
                          {"word_id", e.word_id},
                          {"score", e.score},
                          {"file", folder + "/" + name},
                          {"source_file", folder + "/" + gname},
                          {"box", box_json(e.box)},
                          {"source_image_id", e.global.image_id},
                          {"provenance_class", e.provenance_class},
                          {"provenance_image_id", e.provenance_image_id}});
    }
    Tensor scores_t = similarity_scores(setup.model.extract_features(input),
                                        setup.model.words(),
                                        setup.model.config().activation_eps);
    int predicted = argmax_index(
        predict(scores_t, setup.model.head(), setup.model.config().use_sigmoid_head));
    images.push_back({{"image_id", item.id},
                      {"label", item.label},
                      {"predicted", predicted},
                      {"folder", folder},
                      {"entries", jentries}});
  }
  index["images"] = images;

  // Category similarity analysis.
  CategorySimilarity sim = ctx.category_similarity();
  json jsim;
  jsim["classes"] = data.class_names;
  json matrix = json::array();
  int c = setup.model.config().num_classes;
  for (int a = 0; a < c; ++a) {
    json row = json::array();
    for (int b = 0; b < c; ++b) {
      double v = sim.matrix.at2(a, b);
      if (std::isnan(v)) {
        row.push_back(nullptr);
      } else {
        row.push_back(v);
      }
    }
    matrix.push_back(row);
  }
  jsim["matrix"] = matrix;
  json vectors = json::array();
  for (const auto& v : sim.category_vectors) {
    json vec = json::array();
    for (int64_t i = 0; i < v.size(); ++i) vec.push_back(v[i]);
    vectors.push_back(vec);
  }
  jsim["category_vectors"] = vectors;
  json missing = json::array();
  for (const auto& [a, b] : sim.missing) missing.push_back({a, b});
  jsim["missing"] = missing;
  write_text((fs::path(out) / "category_similarity.json").string(), jsim.dump(2) + "\n");
  index["category_similarity"] = "category_similarity.json";

  write_text((fs::path(out) / "index.json").string(), index.dump(2) + "\n");
  write_run_manifest(out, "explain",
                     {{"lvw_checkpoint_sha256", setup.checkpoint_hash_hex}},
                     {{"index", (fs::path(out) / "index.json").string()}});
  return out;
}

std::string Experiment::run_explain_unseen() {
  std::string out = output_dir("explain_unseen");
  DirLock lock(out);
  EvalSetup setup = load_eval_setup(config_);
  LoadedDataset data = load_dataset();
  if (data.train.empty()) throw DataError("training split is empty");

  double box_threshold = config_.get_double("explain.box_threshold", 0.95);
  double alpha = config_.get_double("explain.overlay_alpha", 0.5);
  int k = static_cast<int>(config_.get_int("explain.k", 10));

  // The query image: a file path, or "synthetic:a,b" for a generated
  // composite of two training classes' distinctive parts.
  std::string spec = config_.get_string("explain.image", "");
  Image query;
  if (spec.empty()) {
    if (config_.get_string("dataset.kind", "synthetic") != "synthetic")
      throw ConfigError("explain.image is required for folder datasets");
    int classes = static_cast<int>(config_.get_int("dataset.classes", 4));
    spec = classes >= 3 ? "synthetic:0,2" : "synthetic:0,1";
  }
  if (spec.rfind("synthetic:", 0) == 0) {
    std::string arg = spec.substr(10);
    size_t comma = arg.find(',');
    if (comma == std::string::npos)
      throw ConfigError("explain.image synthetic spec needs two classes, e.g. synthetic:0,2");
    SyntheticConfig sc;
    sc.classes = static_cast<int>(config_.get_int("dataset.classes", 4));
    sc.resolution = static_cast<int>(config_.get_int("dataset.resolution", 64));
    sc.seed = static_cast<uint64_t>(config_.get_int("dataset.seed", 7));
    sc.noise = config_.get_double("dataset.noise", 12.0);
    sc.part_size = static_cast<int>(config_.get_int("dataset.part_size", 0));
    query = synthetic_unseen_composite(sc, std::stoi(arg.substr(0, comma)),
                                       std::stoi(arg.substr(comma + 1)), sc.seed + 99);
  } else {
    if (!fs::exists(spec)) throw ConfigError("explain.image not found: " + spec);
    query = read_image(spec);
    if (query.width != data.resolution || query.height != data.resolution) {
      query = resize_bilinear(query, data.resolution, data.resolution);
    }
  }

  std::vector<EvalSample> train_samples = to_eval_samples(data.train);
  ExplainContext ctx(setup.model, train_samples);
  UnseenExplanation result =
      ctx.explain_unseen(to_input_tensor(query), k, box_threshold);

  write_png((fs::path(out) / "input.png").string(), query);
  json jentries = json::array();
  for (size_t r = 0; r < result.entries.size(); ++r) {
    const ExplanationEntry& e = result.entries[r];
    char name[96];
    std::snprintf(name, sizeof(name), "rank_%02d_word_%03d.png", int(r), e.word_id);
    write_png((fs::path(out) / name).string(),
              render_overlay_with_box(query, e.heatmap, e.box, alpha));
    char gname[96];
    std::snprintf(gname, sizeof(gname), "rank_%02d_word_%03d_source.png", int(r),
                  e.word_id);
    const Image& src = data.train[size_t(e.global.sample_index)].image;
    write_png((fs::path(out) / gname).string(),
              render_overlay_with_box(src, e.global.heatmap, e.global.box, alpha));
    jentries.push_back({{"rank", int(r)},
                        {"word_id", e.word_id},
                        {"score", e.score},
                        {"file", name},
                        {"source_file", gname},
                        {"box", box_json(e.box)},
                        {"provenance_class", e.provenance_class},
                        {"provenance_class_name",
                         e.provenance_class >= 0
                             ? data.class_names[size_t(e.provenance_class)]
                             : ""},
                        {"provenance_image_id", e.provenance_image_id}});
  }
  json j = {{"query", spec},
            {"out_of_vocabulary", result.out_of_vocabulary},
            {"note", "query category is outside the training vocabulary; "
                     "the predicted class is the nearest in-vocabulary label"},
            {"predicted_class", result.predicted_class},
            {"predicted_class_name",
             data.class_names[size_t(result.predicted_class)]},
            {"entries", jentries}};
  write_text((fs::path(out) / "index.json").string(), j.dump(2) + "\n");
  write_run_manifest(out, "explain-unseen",
                     {{"lvw_checkpoint_sha256", setup.checkpoint_hash_hex}},
                     {{"index", (fs::path(out) / "index.json").string()}});
  return out;
}

std::string Experiment::run_synth() {
  std::string out = output_dir("dataset");
  DirLock lock(out);
  if (config_.get_string("dataset.kind", "synthetic") != "synthetic")
    throw ConfigError("synth requires dataset.kind = synthetic");
  SyntheticConfig sc;
  sc.classes = static_cast<int>(config_.get_int("dataset.classes", 4));
  sc.train_per_class = static_cast<int>(config_.get_int("dataset.train_per_class", 50));
  sc.test_per_class = static_cast<int>(config_.get_int("dataset.test_per_class", 25));
  sc.resolution = static_cast<int>(config_.get_int("dataset.resolution", 64));
  sc.seed = static_cast<uint64_t>(config_.get_int("dataset.seed", 7));
  sc.noise = config_.get_double("dataset.noise", 12.0);
  sc.part_size = static_cast<int>(config_.get_int("dataset.part_size", 0));
  materialize_synthetic(sc, out);
  DatasetManifest manifest = ingest(out);
  write_text((fs::path(out) / "manifest.txt").string(), manifest.canonical_text());
  write_run_manifest(out, "synth", {},
                     {{"dataset_root", out},
                      {"manifest_sha256", sha256_hex(manifest.canonical_text())}});
  return out;
}

}  // namespace lvw
