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

#ifndef LVW_CORE_CONFIG_HPP_
#define LVW_CORE_CONFIG_HPP_

#include <map>
#include <string>
#include <vector>

namespace lvw {

// Flat key/value configuration with dotted keys, e.g.
//
//   dataset.kind = synthetic
//   train.epochs = 60        # comment
//
// Values are stored as strings; typed getters parse on demand. Unknown keys
// are rejected at load time so typos fail fast.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text);

  // CLI-style override; validates the key name.
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<int64_t> get_int_list(const std::string& key,
                                    const std::vector<int64_t>& fallback) const;
  std::vector<double> get_double_list(const std::string& key,
                                      const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Canonical "key = value\n" dump, keys sorted; used in run manifests and
  // config hashing.
  std::string canonical_text() const;

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace lvw

#endif  // LVW_CORE_CONFIG_HPP_
