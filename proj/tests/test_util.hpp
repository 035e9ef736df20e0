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

#ifndef LVW_TESTS_TEST_UTIL_HPP_
#define LVW_TESTS_TEST_UTIL_HPP_

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"

namespace lvw::test {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Central-difference gradient check. builder() must construct the graph from
// scratch on the nodes it is given; inputs become gradient-carrying leaves
// for the analytic pass and perturbed constants for the numeric passes.
// Returns the largest relative error over `checks` randomly chosen entries
// of every input (all entries when checks <= 0).
inline double max_grad_rel_error(
    const std::function<NodePtr(const std::vector<NodePtr>&)>& builder,
    const std::vector<Tensor>& inputs, double h, int checks, Rng& rng) {
  std::vector<NodePtr> leaves;
  leaves.reserve(inputs.size());
  for (const auto& t : inputs) leaves.push_back(leaf(t));
  NodePtr root = builder(leaves);
  backward(root);

  auto value_with = [&](size_t which, int64_t entry, double delta) {
    std::vector<NodePtr> consts;
    consts.reserve(inputs.size());
    for (size_t i = 0; i < inputs.size(); ++i) {
      Tensor t = inputs[i];
      if (i == which) t[entry] += delta;
      consts.push_back(constant(std::move(t)));
    }
    return builder(consts)->value[0];
  };

  double worst = 0.0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    std::vector<int64_t> entries;
    if (checks <= 0 || checks >= inputs[i].size()) {
      for (int64_t e = 0; e < inputs[i].size(); ++e) entries.push_back(e);
    } else {
      for (int c = 0; c < checks; ++c) entries.push_back(rng.uniform_int(inputs[i].size()));
    }
    for (int64_t e : entries) {
      double numeric = (value_with(i, e, h) - value_with(i, e, -h)) / (2.0 * h);
      double analytic = leaves[i]->grad_allocated ? leaves[i]->grad[e] : 0.0;
      double denom = std::max({std::fabs(numeric), std::fabs(analytic), 1e-4});
      worst = std::max(worst, std::fabs(numeric - analytic) / denom);
    }
  }
  return worst;
}

// Unique temp directory under the build tree for filesystem tests.
inline std::string temp_dir(const std::string& tag) {
  static int counter = 0;
  std::string dir = (std::filesystem::temp_directory_path() /
                     ("lvw_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                      std::to_string(counter++)))
                        .string();
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  return ca == cb;
}

}  // namespace lvw::test

#endif  // LVW_TESTS_TEST_UTIL_HPP_
