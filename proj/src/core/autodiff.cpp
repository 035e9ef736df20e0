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

#include "core/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "core/errors.hpp"

namespace lvw {

namespace {

NodePtr make_node(Tensor value, std::vector<NodePtr> parents) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->requires_grad) {
      n->requires_grad = true;
      break;
    }
  }
  return n;
}

}  // namespace

NodePtr constant(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

NodePtr leaf(Tensor value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->requires_grad = true;
  return n;
}

void backward(const NodePtr& root) {
  if (!root) throw ArgumentError("backward: null root");
  if (root->value.size() != 1) throw ArgumentError("backward: root must be scalar");

  // Iterative post-order DFS; reversed order processes every node before its
  // parents.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  struct Frame {
    Node* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      Node* p = f.node->parents[f.next_parent++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root->ensure_grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->requires_grad && n->backward_fn && n->grad_allocated) {
      n->backward_fn(*n);
    }
  }
}

// ---------------------------------------------------------------------------
// convolution and pooling
// ---------------------------------------------------------------------------

NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, int pad) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  const Tensor& bv = b->value;
  if (xv.rank() != 3 || wv.rank() != 4 || bv.rank() != 1)
    throw ArgumentError("conv2d: bad tensor ranks");
  int cin = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
  int cout = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
  if (wv.dim(1) != cin) throw ArgumentError("conv2d: channel mismatch");
  if (bv.dim(0) != cout) throw ArgumentError("conv2d: bias size mismatch");
  int oh = h + 2 * pad - kh + 1;
  int ow = wd + 2 * pad - kw + 1;
  if (oh <= 0 || ow <= 0) throw ArgumentError("conv2d: kernel larger than padded input");

  Tensor out({cout, oh, ow});
  for (int oc = 0; oc < cout; ++oc) {
    double bias = bv[oc];
    double* plane = out.data() + size_t(oc) * oh * ow;
    std::fill(plane, plane + size_t(oh) * ow, bias);
    for (int ic = 0; ic < cin; ++ic) {
      const double* in_plane = xv.data() + size_t(ic) * h * wd;
      for (int ky = 0; ky < kh; ++ky) {
        for (int kx = 0; kx < kw; ++kx) {
          double wgt = wv.data()[((size_t(oc) * cin + ic) * kh + ky) * kw + kx];
          if (wgt == 0.0) continue;
          int y_lo = std::max(0, pad - ky);
          int y_hi = std::min(oh, h + pad - ky);
          int x_lo = std::max(0, pad - kx);
          int x_hi = std::min(ow, wd + pad - kx);
          for (int y = y_lo; y < y_hi; ++y) {
            const double* in_row = in_plane + size_t(y + ky - pad) * wd + (x_lo + kx - pad);
            double* out_row = plane + size_t(y) * ow + x_lo;
            for (int xx = 0; xx < x_hi - x_lo; ++xx) out_row[xx] += wgt * in_row[xx];
          }
        }
      }
    }
  }

  auto node = make_node(std::move(out), {x, w, b});
  Node* xn = x.get();
  Node* wn = w.get();
  Node* bn = b.get();
  node->backward_fn = [xn, wn, bn, cin, h, wd, cout, kh, kw, oh, ow, pad](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& xv = xn->value;
    const Tensor& wv = wn->value;
    if (bn->requires_grad) {
      Tensor& gb = bn->ensure_grad();
      for (int oc = 0; oc < cout; ++oc) {
        const double* gp = g.data() + size_t(oc) * oh * ow;
        double acc = 0.0;
        for (int i = 0; i < oh * ow; ++i) acc += gp[i];
        gb[oc] += acc;
      }
    }
    if (wn->requires_grad) {
      Tensor& gw = wn->ensure_grad();
      for (int oc = 0; oc < cout; ++oc) {
        const double* gp = g.data() + size_t(oc) * oh * ow;
        for (int ic = 0; ic < cin; ++ic) {
          const double* in_plane = xv.data() + size_t(ic) * h * wd;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              int y_lo = std::max(0, pad - ky);
              int y_hi = std::min(oh, h + pad - ky);
              int x_lo = std::max(0, pad - kx);
              int x_hi = std::min(ow, wd + pad - kx);
              double acc = 0.0;
              for (int y = y_lo; y < y_hi; ++y) {
                const double* in_row =
                    in_plane + size_t(y + ky - pad) * wd + (x_lo + kx - pad);
                const double* g_row = gp + size_t(y) * ow + x_lo;
                for (int xx = 0; xx < x_hi - x_lo; ++xx) acc += g_row[xx] * in_row[xx];
              }
              gw.data()[((size_t(oc) * cin + ic) * kh + ky) * kw + kx] += acc;
            }
          }
        }
      }
    }
    if (xn->requires_grad) {
      Tensor& gx = xn->ensure_grad();
      for (int oc = 0; oc < cout; ++oc) {
        const double* gp = g.data() + size_t(oc) * oh * ow;
        for (int ic = 0; ic < cin; ++ic) {
          double* gx_plane = gx.data() + size_t(ic) * h * wd;
          for (int ky = 0; ky < kh; ++ky) {
            for (int kx = 0; kx < kw; ++kx) {
              double wgt = wv.data()[((size_t(oc) * cin + ic) * kh + ky) * kw + kx];
              if (wgt == 0.0) continue;
              int y_lo = std::max(0, pad - ky);
              int y_hi = std::min(oh, h + pad - ky);
              int x_lo = std::max(0, pad - kx);
              int x_hi = std::min(ow, wd + pad - kx);
              for (int y = y_lo; y < y_hi; ++y) {
                double* gx_row = gx_plane + size_t(y + ky - pad) * wd + (x_lo + kx - pad);
                const double* g_row = gp + size_t(y) * ow + x_lo;
                for (int xx = 0; xx < x_hi - x_lo; ++xx) gx_row[xx] += wgt * g_row[xx];
              }
            }
          }
        }
      }
    }
  };
  return node;
}

NodePtr relu(const NodePtr& x) {
  Tensor out = x->value;
  for (int64_t i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  auto node = make_node(std::move(out), {x});
  Node* xn = x.get();
  node->backward_fn = [xn](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int64_t i = 0; i < self.value.size(); ++i) {
      if (self.value[i] > 0.0) gx[i] += self.grad[i];
    }
  };
  return node;
}

NodePtr maxpool2(const NodePtr& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3) throw ArgumentError("maxpool2 expects [C,H,W]");
  int c = xv.dim(0), h = xv.dim(1), w = xv.dim(2);
  if (h % 2 != 0 || w % 2 != 0) throw ArgumentError("maxpool2: odd spatial dims");
  int oh = h / 2, ow = w / 2;
  Tensor out({c, oh, ow});
  auto argmax = std::make_shared<std::vector<int64_t>>(size_t(c) * oh * ow);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < oh; ++y) {
      for (int xx = 0; xx < ow; ++xx) {
        int64_t base = (size_t(ch) * h + 2 * y) * w + 2 * xx;
        int64_t best = base;
        double bv = xv[base];
        const int64_t cand[3] = {base + 1, base + w, base + w + 1};
        for (int64_t idx : cand) {
          if (xv[idx] > bv) {
            bv = xv[idx];
            best = idx;
          }
        }
        out.at3(ch, y, xx) = bv;
        (*argmax)[(size_t(ch) * oh + y) * ow + xx] = best;
      }
    }
  }
  auto node = make_node(std::move(out), {x});
  Node* xn = x.get();
  node->backward_fn = [xn, argmax](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int64_t i = 0; i < self.value.size(); ++i) gx[(*argmax)[size_t(i)]] += self.grad[i];
  };
  return node;
}

NodePtr global_avg_pool(const NodePtr& x) {
  const Tensor& xv = x->value;
  if (xv.rank() != 3) throw ArgumentError("global_avg_pool expects [C,H,W]");
  int c = xv.dim(0), hw = xv.dim(1) * xv.dim(2);
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) {
    const double* p = xv.data() + size_t(ch) * hw;
    double acc = 0.0;
    for (int i = 0; i < hw; ++i) acc += p[i];
    out[ch] = acc / hw;
  }
  auto node = make_node(std::move(out), {x});
  Node* xn = x.get();
  node->backward_fn = [xn, c, hw](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int ch = 0; ch < c; ++ch) {
      double g = self.grad[ch] / hw;
      double* p = gx.data() + size_t(ch) * hw;
      for (int i = 0; i < hw; ++i) p[i] += g;
    }
  };
  return node;
}

namespace {

NodePtr linear_impl(const NodePtr& x, const NodePtr& w, const NodePtr* b) {
  const Tensor& xv = x->value;
  const Tensor& wv = w->value;
  if (xv.rank() != 1 || wv.rank() != 2 || wv.dim(0) != xv.dim(0))
    throw ArgumentError("linear: shape mismatch");
  int n = xv.dim(0), m = wv.dim(1);
  Tensor out({m});
  if (b) {
    if ((*b)->value.dim(0) != m) throw ArgumentError("linear: bias size mismatch");
    for (int j = 0; j < m; ++j) out[j] = (*b)->value[j];
  }
  for (int i = 0; i < n; ++i) {
    double xi = xv[i];
    const double* wrow = wv.data() + size_t(i) * m;
    for (int j = 0; j < m; ++j) out[j] += xi * wrow[j];
  }
  std::vector<NodePtr> parents = {x, w};
  if (b) parents.push_back(*b);
  auto node = make_node(std::move(out), std::move(parents));
  Node* xn = x.get();
  Node* wn = w.get();
  Node* bn = b ? b->get() : nullptr;
  node->backward_fn = [xn, wn, bn, n, m](Node& self) {
    const Tensor& g = self.grad;
    if (bn && bn->requires_grad) {
      Tensor& gb = bn->ensure_grad();
      for (int j = 0; j < m; ++j) gb[j] += g[j];
    }
    if (wn->requires_grad) {
      Tensor& gw = wn->ensure_grad();
      for (int i = 0; i < n; ++i) {
        double xi = xn->value[i];
        double* grow = gw.data() + size_t(i) * m;
        for (int j = 0; j < m; ++j) grow[j] += xi * g[j];
      }
    }
    if (xn->requires_grad) {
      Tensor& gx = xn->ensure_grad();
      for (int i = 0; i < n; ++i) {
        const double* wrow = wn->value.data() + size_t(i) * m;
        double acc = 0.0;
        for (int j = 0; j < m; ++j) acc += wrow[j] * g[j];
        gx[i] += acc;
      }
    }
  };
  return node;
}

}  // namespace

NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
  return linear_impl(x, w, &b);
}

NodePtr linear_nobias(const NodePtr& x, const NodePtr& w) {
  return linear_impl(x, w, nullptr);
}

// ---------------------------------------------------------------------------
// visual-words ops
// ---------------------------------------------------------------------------

NodePtr patch_l2_normalize(const NodePtr& z, double eps) {
  const Tensor& zv = z->value;
  if (zv.rank() != 3) throw ArgumentError("patch_l2_normalize expects [D,H,W]");
  int d = zv.dim(0), hw = zv.dim(1) * zv.dim(2);
  Tensor out(zv.shape());
  auto norms = std::make_shared<std::vector<double>>(size_t(hw), 0.0);
  for (int p = 0; p < hw; ++p) {
    double n2 = 0.0;
    for (int ch = 0; ch < d; ++ch) {
      double v = zv[int64_t(ch) * hw + p];
      n2 += v * v;
    }
    double n = std::sqrt(n2);
    (*norms)[size_t(p)] = n;
    if (n > eps) {
      double inv = 1.0 / n;
      for (int ch = 0; ch < d; ++ch) {
        out[int64_t(ch) * hw + p] = zv[int64_t(ch) * hw + p] * inv;
      }
    }
  }
  auto node = make_node(std::move(out), {z});
  Node* zn = z.get();
  node->backward_fn = [zn, norms, d, hw, eps](Node& self) {
    if (!zn->requires_grad) return;
    Tensor& gz = zn->ensure_grad();
    const Tensor& g = self.grad;
    for (int p = 0; p < hw; ++p) {
      double n = (*norms)[size_t(p)];
      if (n <= eps) continue;
      double dot = 0.0;
      for (int ch = 0; ch < d; ++ch) {
        dot += g[int64_t(ch) * hw + p] * self.value[int64_t(ch) * hw + p];
      }
      double inv = 1.0 / n;
      for (int ch = 0; ch < d; ++ch) {
        int64_t i = int64_t(ch) * hw + p;
        gz[i] += (g[i] - dot * self.value[i]) * inv;
      }
    }
  };
  return node;
}

NodePtr distance_grids(const NodePtr& z, const NodePtr& words) {
  const Tensor& zv = z->value;
  const Tensor& wv = words->value;
  if (zv.rank() != 3 || wv.rank() != 2) throw ArgumentError("distance_grids: bad ranks");
  int d = zv.dim(0), h = zv.dim(1), w = zv.dim(2), m = wv.dim(0);
  if (wv.dim(1) != d) throw ArgumentError("distance_grids: depth mismatch");
  int hw = h * w;
  Tensor out({m, h, w});
  for (int j = 0; j < m; ++j) {
    double* grid = out.data() + size_t(j) * hw;
    const double* word = wv.data() + size_t(j) * d;
    for (int ch = 0; ch < d; ++ch) {
      const double* plane = zv.data() + size_t(ch) * hw;
      double wc = word[ch];
      for (int p = 0; p < hw; ++p) {
        double diff = plane[p] - wc;
        grid[p] += diff * diff;
      }
    }
  }
  auto node = make_node(std::move(out), {z, words});
  Node* zn = z.get();
  Node* wn = words.get();
  node->backward_fn = [zn, wn, d, hw, m](Node& self) {
    const Tensor& g = self.grad;
    const Tensor& zv = zn->value;
    const Tensor& wv = wn->value;
    bool need_z = zn->requires_grad, need_w = wn->requires_grad;
    if (!need_z && !need_w) return;
    Tensor* gz = need_z ? &zn->ensure_grad() : nullptr;
    Tensor* gw = need_w ? &wn->ensure_grad() : nullptr;
    for (int j = 0; j < m; ++j) {
      const double* grid_g = g.data() + size_t(j) * hw;
      const double* word = wv.data() + size_t(j) * d;
      double* gword = need_w ? gw->data() + size_t(j) * d : nullptr;
      for (int ch = 0; ch < d; ++ch) {
        const double* plane = zv.data() + size_t(ch) * hw;
        double* gplane = need_z ? gz->data() + size_t(ch) * hw : nullptr;
        double wc = word[ch];
        double acc_w = 0.0;
        for (int p = 0; p < hw; ++p) {
          double t = 2.0 * grid_g[p] * (plane[p] - wc);
          if (need_z) gplane[p] += t;
          acc_w -= t;
        }
        if (need_w) gword[ch] += acc_w;
      }
    }
  };
  return node;
}

NodePtr log_activation(const NodePtr& d2, double eps) {
  if (eps <= 0.0) throw ArgumentError("log_activation: eps must be positive");
  Tensor out = d2->value;
  for (int64_t i = 0; i < out.size(); ++i) {
    double x = out[i];
    if (!std::isfinite(x)) throw NumericError("log_activation: non-finite distance");
    out[i] = std::log((x + 1.0) / (x + eps));
  }
  auto node = make_node(std::move(out), {d2});
  Node* xn = d2.get();
  node->backward_fn = [xn, eps](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int64_t i = 0; i < self.value.size(); ++i) {
      double x = xn->value[i];
      gx[i] += self.grad[i] * (1.0 / (x + 1.0) - 1.0 / (x + eps));
    }
  };
  return node;
}

NodePtr spatial_max(const NodePtr& grids) {
  const Tensor& gv = grids->value;
  if (gv.rank() != 3) throw ArgumentError("spatial_max expects [M,H,W]");
  int m = gv.dim(0), hw = gv.dim(1) * gv.dim(2);
  Tensor out({m});
  auto argmax = std::make_shared<std::vector<int>>(size_t(m));
  for (int j = 0; j < m; ++j) {
    const double* grid = gv.data() + size_t(j) * hw;
    int best = 0;
    for (int p = 1; p < hw; ++p) {
      if (grid[p] > grid[best]) best = p;
    }
    out[j] = grid[best];
    (*argmax)[size_t(j)] = best;
  }
  auto node = make_node(std::move(out), {grids});
  Node* xn = grids.get();
  node->backward_fn = [xn, argmax, hw](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int64_t j = 0; j < self.value.size(); ++j) {
      gx[j * hw + (*argmax)[size_t(j)]] += self.grad[j];
    }
  };
  return node;
}

NodePtr min_over_all(const NodePtr& grids) {
  const Tensor& gv = grids->value;
  if (gv.size() == 0) throw ArgumentError("min_over_all on empty tensor");
  int64_t best = 0;
  for (int64_t i = 1; i < gv.size(); ++i) {
    if (gv[i] < gv[best]) best = i;
  }
  Tensor out({1});
  out[0] = gv[best];
  auto node = make_node(std::move(out), {grids});
  Node* xn = grids.get();
  node->backward_fn = [xn, best](Node& self) {
    if (!xn->requires_grad) return;
    xn->ensure_grad()[best] += self.grad[0];
  };
  return node;
}

NodePtr gather_grids(const NodePtr& grids, std::vector<int> indices) {
  const Tensor& gv = grids->value;
  if (gv.rank() != 3) throw ArgumentError("gather_grids expects [M,H,W]");
  int m = gv.dim(0), h = gv.dim(1), w = gv.dim(2), hw = h * w;
  int k = static_cast<int>(indices.size());
  if (k == 0) throw ArgumentError("gather_grids: empty index list");
  for (int idx : indices) {
    if (idx < 0 || idx >= m) throw ArgumentError("gather_grids: index out of range");
  }
  Tensor out({k, h, w});
  for (int i = 0; i < k; ++i) {
    std::copy_n(gv.data() + size_t(indices[size_t(i)]) * hw, hw,
                out.data() + size_t(i) * hw);
  }
  auto node = make_node(std::move(out), {grids});
  Node* xn = grids.get();
  auto idx = std::make_shared<std::vector<int>>(std::move(indices));
  node->backward_fn = [xn, idx, hw, k](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int i = 0; i < k; ++i) {
      const double* src = self.grad.data() + size_t(i) * hw;
      double* dst = gx.data() + size_t((*idx)[size_t(i)]) * hw;
      for (int p = 0; p < hw; ++p) dst[p] += src[p];
    }
  };
  return node;
}

NodePtr max_over_grids(const NodePtr& grids) {
  const Tensor& gv = grids->value;
  if (gv.rank() != 3) throw ArgumentError("max_over_grids expects [k,H,W]");
  int k = gv.dim(0), h = gv.dim(1), w = gv.dim(2), hw = h * w;
  Tensor out({h, w});
  auto winner = std::make_shared<std::vector<int>>(size_t(hw), 0);
  std::copy_n(gv.data(), hw, out.data());
  for (int i = 1; i < k; ++i) {
    const double* grid = gv.data() + size_t(i) * hw;
    for (int p = 0; p < hw; ++p) {
      if (grid[p] > out[p]) {  // strict: ties stay with the earlier grid
        out[p] = grid[p];
        (*winner)[size_t(p)] = i;
      }
    }
  }
  auto node = make_node(std::move(out), {grids});
  Node* xn = grids.get();
  node->backward_fn = [xn, winner, hw](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    for (int p = 0; p < hw; ++p) {
      gx[size_t((*winner)[size_t(p)]) * hw + p] += self.grad[p];
    }
  };
  return node;
}

NodePtr minmax_norm(const NodePtr& map) {
  const Tensor& mv = map->value;
  if (mv.size() == 0) throw ArgumentError("minmax_norm on empty tensor");
  int64_t imin = 0, imax = 0;
  for (int64_t i = 1; i < mv.size(); ++i) {
    if (mv[i] < mv[imin]) imin = i;
    if (mv[i] > mv[imax]) imax = i;
  }
  double lo = mv[imin], hi = mv[imax];
  bool degenerate = hi - lo <= 0.0;
  Tensor out(mv.shape());
  if (!degenerate) {
    double inv = 1.0 / (hi - lo);
    for (int64_t i = 0; i < mv.size(); ++i) out[i] = (mv[i] - lo) * inv;
  }
  auto node = make_node(std::move(out), {map});
  Node* xn = map.get();
  node->backward_fn = [xn, imin, imax, degenerate](Node& self) {
    if (!xn->requires_grad || degenerate) return;
    const Tensor& g = self.grad;
    Tensor& gx = xn->ensure_grad();
    double denom = xn->value[imax] - xn->value[imin];
    double sum_g = 0.0, sum_gy = 0.0;
    for (int64_t i = 0; i < g.size(); ++i) {
      sum_g += g[i];
      sum_gy += g[i] * self.value[i];
    }
    for (int64_t i = 0; i < g.size(); ++i) gx[i] += g[i] / denom;
    gx[imin] += (sum_gy - sum_g) / denom;
    gx[imax] -= sum_gy / denom;
  };
  return node;
}

// ---------------------------------------------------------------------------
// losses
// ---------------------------------------------------------------------------

NodePtr squared_error_sum(const NodePtr& x, const Tensor& target) {
  const Tensor& xv = x->value;
  if (!xv.same_shape(target)) throw ArgumentError("squared_error_sum: shape mismatch");
  double acc = 0.0;
  for (int64_t i = 0; i < xv.size(); ++i) {
    double d = xv[i] - target[i];
    acc += d * d;
  }
  Tensor out({1});
  out[0] = acc;
  auto node = make_node(std::move(out), {x});
  Node* xn = x.get();
  auto tgt = std::make_shared<Tensor>(target);
  node->backward_fn = [xn, tgt](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    double g = self.grad[0];
    for (int64_t i = 0; i < xn->value.size(); ++i) {
      gx[i] += g * 2.0 * (xn->value[i] - (*tgt)[i]);
    }
  };
  return node;
}

NodePtr softmax_cross_entropy(const NodePtr& logits, int label) {
  const Tensor& zv = logits->value;
  if (zv.rank() != 1) throw ArgumentError("softmax_cross_entropy expects a vector");
  int c = zv.dim(0);
  if (label < 0 || label >= c) throw ArgumentError("softmax_cross_entropy: label out of range");
  double zmax = zv.max();
  double sum = 0.0;
  for (int i = 0; i < c; ++i) sum += std::exp(zv[i] - zmax);
  double lse = zmax + std::log(sum);
  Tensor out({1});
  out[0] = lse - zv[label];
  auto node = make_node(std::move(out), {logits});
  Node* zn = logits.get();
  node->backward_fn = [zn, label, lse, c](Node& self) {
    if (!zn->requires_grad) return;
    Tensor& gz = zn->ensure_grad();
    double g = self.grad[0];
    for (int i = 0; i < c; ++i) {
      double p = std::exp(zn->value[i] - lse);
      gz[i] += g * (p - (i == label ? 1.0 : 0.0));
    }
  };
  return node;
}

NodePtr sigmoid_cross_entropy(const NodePtr& logits, int label) {
  const Tensor& zv = logits->value;
  if (zv.rank() != 1) throw ArgumentError("sigmoid_cross_entropy expects a vector");
  int c = zv.dim(0);
  if (label < 0 || label >= c) throw ArgumentError("sigmoid_cross_entropy: label out of range");
  auto probs = std::make_shared<Tensor>(std::vector<int>{c});
  double sum = 0.0;
  for (int i = 0; i < c; ++i) {
    double q = 1.0 / (1.0 + std::exp(-zv[i]));
    (*probs)[i] = q;
    sum += q;
  }
  Tensor out({1});
  out[0] = std::log(sum) - std::log((*probs)[label]);
  auto node = make_node(std::move(out), {logits});
  Node* zn = logits.get();
  node->backward_fn = [zn, probs, label, sum, c](Node& self) {
    if (!zn->requires_grad) return;
    Tensor& gz = zn->ensure_grad();
    double g = self.grad[0];
    for (int i = 0; i < c; ++i) {
      double q = (*probs)[i];
      double dq_dz = q * (1.0 - q);
      double d = dq_dz / sum;
      if (i == label) d -= (1.0 - q);
      gz[i] += g * d;
    }
  };
  return node;
}

NodePtr l1_norm(const NodePtr& x) {
  double acc = 0.0;
  for (int64_t i = 0; i < x->value.size(); ++i) acc += std::fabs(x->value[i]);
  Tensor out({1});
  out[0] = acc;
  auto node = make_node(std::move(out), {x});
  Node* xn = x.get();
  node->backward_fn = [xn](Node& self) {
    if (!xn->requires_grad) return;
    Tensor& gx = xn->ensure_grad();
    double g = self.grad[0];
    for (int64_t i = 0; i < xn->value.size(); ++i) {
      double v = xn->value[i];
      gx[i] += g * (v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0));
    }
  };
  return node;
}

NodePtr select(const NodePtr& v, int index) {
  if (index < 0 || index >= v->value.size())
    throw ArgumentError("select: index out of range");
  Tensor out({1});
  out[0] = v->value[index];
  auto node = make_node(std::move(out), {v});
  Node* vn = v.get();
  node->backward_fn = [vn, index](Node& self) {
    if (!vn->requires_grad) return;
    vn->ensure_grad()[index] += self.grad[0];
  };
  return node;
}

NodePtr weighted_sum(const std::vector<NodePtr>& scalars,
                     const std::vector<double>& coeffs) {
  if (scalars.empty() || scalars.size() != coeffs.size())
    throw ArgumentError("weighted_sum: size mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < scalars.size(); ++i) {
    if (scalars[i]->value.size() != 1) throw ArgumentError("weighted_sum: non-scalar term");
    acc += coeffs[i] * scalars[i]->value[0];
  }
  Tensor out({1});
  out[0] = acc;
  auto node = make_node(std::move(out), scalars);
  auto cs = std::make_shared<std::vector<double>>(coeffs);
  std::vector<Node*> raw;
  raw.reserve(scalars.size());
  for (const auto& s : scalars) raw.push_back(s.get());
  node->backward_fn = [raw, cs](Node& self) {
    double g = self.grad[0];
    for (size_t i = 0; i < raw.size(); ++i) {
      if (raw[i]->requires_grad) raw[i]->ensure_grad()[0] += g * (*cs)[i];
    }
  };
  return node;
}

}  // namespace lvw
