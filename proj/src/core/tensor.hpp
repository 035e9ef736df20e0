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

#ifndef LVW_CORE_TENSOR_HPP_
#define LVW_CORE_TENSOR_HPP_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace lvw {

// Dense row-major tensor of doubles. Feature maps use CHW order: shape
// {channels, height, width}. Kept deliberately minimal; hot loops index the
// raw buffer directly.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  Tensor(std::initializer_list<int> shape);

  static Tensor zeros(std::vector<int> shape);
  static Tensor full(std::vector<int> shape, double value);

  const std::vector<int>& shape() const { return shape_; }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // 2-d and 3-d accessors; no bounds checks.
  double& at2(int i, int j) { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  double at2(int i, int j) const { return data_[static_cast<size_t>(i) * shape_[1] + j]; }
  double& at3(int c, int i, int j) {
    return data_[(static_cast<size_t>(c) * shape_[1] + i) * shape_[2] + j];
  }
  double at3(int c, int i, int j) const {
    return data_[(static_cast<size_t>(c) * shape_[1] + i) * shape_[2] + j];
  }

  void fill(double value);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double min() const;
  double max() const;
  double sum() const;

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

int64_t shape_size(const std::vector<int>& shape);

// Self-describing binary tensor blob (magic, rank, dims, raw doubles);
// little-endian, used for checkpoint and cache storage.
void write_tensor_file(const std::string& path, const Tensor& t);
Tensor read_tensor_file(const std::string& path);

}  // namespace lvw

#endif  // LVW_CORE_TENSOR_HPP_
