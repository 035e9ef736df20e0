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

#ifndef LVW_CORE_AUTODIFF_HPP_
#define LVW_CORE_AUTODIFF_HPP_

#include <functional>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

namespace lvw {

// Reverse-mode automatic differentiation over small per-sample graphs. Each
// op builds a Node holding the forward value and a closure that pushes
// gradients to its parents. Graphs are rebuilt per sample per step; sizes
// here are small enough that simplicity wins over graph reuse.
struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  bool grad_allocated = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (!grad_allocated) {
      grad = Tensor(value.shape());
      grad_allocated = true;
    }
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

NodePtr constant(Tensor value);
NodePtr leaf(Tensor value);  // gradient-carrying input (parameter view)

// Seeds d(root)/d(root) = 1 and runs reverse-mode accumulation. Root must be
// scalar (shape {1}).
void backward(const NodePtr& root);

// --- primitive ops -----------------------------------------------------

// x: [Cin,H,W], w: [Cout,Cin,kh,kw], b: [Cout]; stride 1, zero padding.
NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, int pad);
NodePtr relu(const NodePtr& x);
NodePtr maxpool2(const NodePtr& x);          // 2x2, stride 2; dims must be even
NodePtr global_avg_pool(const NodePtr& x);   // [C,H,W] -> [C]
// x: [n], w: [n,m], optional b: [m] -> [m]
NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b);
NodePtr linear_nobias(const NodePtr& x, const NodePtr& w);

// --- visual-words ops ---------------------------------------------------

// Scales every 1x1xD patch of z to unit L2 norm (zero patches stay zero).
// Conditions the feature space so patch distances live in [0, 4].
NodePtr patch_l2_normalize(const NodePtr& z, double eps = 1e-12);
// z: [D,H,W], words: [M,D] -> [M,H,W]; entry (m,p) is the squared L2
// distance between word m and the 1x1 patch of z at p.
NodePtr distance_grids(const NodePtr& z, const NodePtr& words);
// Elementwise log((d2 + 1) / (d2 + eps)); monotone decreasing in d2.
NodePtr log_activation(const NodePtr& d2, double eps);
NodePtr spatial_max(const NodePtr& grids);   // [M,H,W] -> [M]
NodePtr min_over_all(const NodePtr& grids);  // [M,H,W] -> scalar
// Select sub-grids by fixed indices (selection itself is not differentiated).
NodePtr gather_grids(const NodePtr& grids, std::vector<int> indices);
NodePtr max_over_grids(const NodePtr& grids);  // [k,H,W] -> [H,W], pointwise
NodePtr minmax_norm(const NodePtr& map);       // [H,W] -> [H,W] in [0,1]

// --- losses --------------------------------------------------------------

// Sum over entries of (x - target)^2; target is a constant.
NodePtr squared_error_sum(const NodePtr& x, const Tensor& target);
NodePtr softmax_cross_entropy(const NodePtr& logits, int label);
// Head-with-sigmoid convention: probabilities sigmoid(z) renormalized to a
// distribution; loss is -log of the renormalized target probability.
NodePtr sigmoid_cross_entropy(const NodePtr& logits, int label);
NodePtr l1_norm(const NodePtr& x);

// --- scalar algebra -------------------------------------------------------

NodePtr weighted_sum(const std::vector<NodePtr>& scalars,
                     const std::vector<double>& coeffs);
NodePtr select(const NodePtr& v, int index);  // vector entry as scalar node

}  // namespace lvw

#endif  // LVW_CORE_AUTODIFF_HPP_
