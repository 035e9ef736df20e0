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

#include "core/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "core/errors.hpp"
#include "core/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace lvw {

namespace {

json meta_to_json(const CheckpointMeta& meta) {
  json cfg = json::object();
  for (const auto& [k, v] : meta.config) cfg[k] = v;
  return json{{"kind", meta.kind},
              {"epoch", meta.epoch},
              {"stage", meta.stage},
              {"rng_state", meta.rng_state},
              {"config", cfg},
              {"class_names", meta.class_names}};
}

CheckpointMeta meta_from_json(const json& j) {
  CheckpointMeta meta;
  meta.kind = j.value("kind", "");
  meta.epoch = j.value("epoch", 0);
  meta.stage = j.value("stage", "");
  meta.rng_state = j.value("rng_state", "");
  if (j.contains("config")) {
    for (auto& [k, v] : j.at("config").items()) meta.config[k] = v.get<std::string>();
  }
  if (j.contains("class_names")) {
    meta.class_names = j.at("class_names").get<std::vector<std::string>>();
  }
  return meta;
}

void write_tensors(const std::string& dir, const std::vector<ParamRef>& params,
                   json& tensors_out) {
  fs::create_directories(fs::path(dir) / "tensors");
  for (const auto& p : params) {
    std::string file = p.name + ".bin";
    write_tensor_file((fs::path(dir) / "tensors" / file).string(), *p.value);
    tensors_out[p.name] = {{"file", file}, {"shape", p.value->shape()}};
  }
}

void read_tensors(const std::string& dir, const json& manifest,
                  const std::vector<ParamRef>& params) {
  const json& tensors = manifest.at("tensors");
  for (const auto& p : params) {
    if (!tensors.contains(p.name))
      throw DataError("checkpoint missing tensor: " + p.name);
    std::string file = tensors.at(p.name).at("file").get<std::string>();
    Tensor t = read_tensor_file((fs::path(dir) / "tensors" / file).string());
    if (!t.same_shape(*p.value)) {
      throw DataError("checkpoint tensor " + p.name + " has shape " + t.shape_str() +
                      ", expected " + p.value->shape_str());
    }
    *p.value = std::move(t);
  }
}

void write_manifest(const std::string& dir, const json& j) {
  fs::create_directories(dir);
  std::ofstream out(fs::path(dir) / "manifest.json");
  if (!out) throw IoError("cannot write checkpoint manifest in " + dir);
  out << j.dump(2) << "\n";
}

json read_manifest(const std::string& dir) {
  fs::path path = fs::path(dir) / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("no checkpoint manifest at " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("corrupt checkpoint manifest at " + path.string() + ": " + e.what());
  }
  if (j.value("format_version", 0) != 1)
    throw DataError("unsupported checkpoint format version in " + dir);
  return j;
}

}  // namespace

void save_lvw_checkpoint(const std::string& dir, LvwModel& model,
                         const CheckpointMeta& meta) {
  json j = meta_to_json(meta);
  j["format_version"] = 1;
  j["kind"] = "lvw";
  const LvwConfig& c = model.config();
  j["arch"] = {{"input_resolution", c.input_resolution},
               {"in_channels", c.trunk.in_channels},
               {"trunk_channels", c.trunk.channels},
               {"feature_channels", c.feature_channels},
               {"num_classes", c.num_classes},
               {"words_per_class", c.words_per_class},
               {"use_sigmoid_head", c.use_sigmoid_head},
               {"activation_eps", c.activation_eps}};
  json prov = json::array();
  for (const auto& p : model.provenance()) {
    prov.push_back({{"projected", p.projected},
                    {"image_id", p.image_id},
                    {"row", p.row},
                    {"col", p.col},
                    {"class_id", p.class_id}});
  }
  j["provenance"] = prov;
  json tensors = json::object();
  write_tensors(dir, model.params(), tensors);
  j["tensors"] = tensors;
  write_manifest(dir, j);
}

LvwModel load_lvw_checkpoint(const std::string& dir, CheckpointMeta* meta) {
  json j = read_manifest(dir);
  if (j.value("kind", "") != "lvw") throw DataError("not an lvw checkpoint: " + dir);
  const json& a = j.at("arch");
  LvwConfig c;
  c.input_resolution = a.at("input_resolution").get<int>();
  c.trunk.in_channels = a.at("in_channels").get<int>();
  c.trunk.channels = a.at("trunk_channels").get<std::vector<int>>();
  c.feature_channels = a.at("feature_channels").get<int>();
  c.num_classes = a.at("num_classes").get<int>();
  c.words_per_class = a.at("words_per_class").get<int>();
  c.use_sigmoid_head = a.at("use_sigmoid_head").get<bool>();
  c.activation_eps = a.at("activation_eps").get<double>();
  LvwModel model(c);
  read_tensors(dir, j, model.params());
  if (j.contains("provenance")) {
    const json& prov = j.at("provenance");
    if (static_cast<int>(prov.size()) != model.num_words())
      throw DataError("checkpoint provenance count mismatch in " + dir);
    for (int i = 0; i < model.num_words(); ++i) {
      const json& p = prov[size_t(i)];
      WordProvenance wp;
      wp.projected = p.at("projected").get<bool>();
      wp.image_id = p.at("image_id").get<std::string>();
      wp.row = p.at("row").get<int>();
      wp.col = p.at("col").get<int>();
      wp.class_id = p.at("class_id").get<int>();
      model.provenance()[size_t(i)] = wp;
    }
  }
  if (meta) *meta = meta_from_json(j);
  return model;
}

void save_base_checkpoint(const std::string& dir, BaseModel& model,
                          const CheckpointMeta& meta) {
  json j = meta_to_json(meta);
  j["format_version"] = 1;
  j["kind"] = "base";
  const BaseConfig& c = model.config();
  j["arch"] = {{"input_resolution", c.input_resolution},
               {"in_channels", c.trunk.in_channels},
               {"trunk_channels", c.trunk.channels},
               {"num_classes", c.num_classes}};
  json tensors = json::object();
  write_tensors(dir, model.params(), tensors);
  j["tensors"] = tensors;
  write_manifest(dir, j);
}

BaseModel load_base_checkpoint(const std::string& dir, CheckpointMeta* meta) {
  json j = read_manifest(dir);
  if (j.value("kind", "") != "base") throw DataError("not a base checkpoint: " + dir);
  const json& a = j.at("arch");
  BaseConfig c;
  c.input_resolution = a.at("input_resolution").get<int>();
  c.trunk.in_channels = a.at("in_channels").get<int>();
  c.trunk.channels = a.at("trunk_channels").get<std::vector<int>>();
  c.num_classes = a.at("num_classes").get<int>();
  BaseModel model(c);
  read_tensors(dir, j, model.params());
  if (meta) *meta = meta_from_json(j);
  return model;
}

std::string checkpoint_hash(const std::string& dir) {
  std::vector<std::string> files = {"manifest.json"};
  fs::path tdir = fs::path(dir) / "tensors";
  if (fs::exists(tdir)) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(tdir)) {
      names.push_back("tensors/" + e.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    files.insert(files.end(), names.begin(), names.end());
  }
  Sha256 h;
  for (const auto& f : files) {
    h.update(f);
    std::ifstream in(fs::path(dir) / f, std::ios::binary);
    if (!in) throw DataError("checkpoint file unreadable: " + f);
    std::vector<char> buf(1 << 16);
    while (in) {
      in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      h.update(buf.data(), static_cast<size_t>(in.gcount()));
    }
  }
  return h.hex_digest();
}

}  // namespace lvw
