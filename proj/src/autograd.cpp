// Copyright 2026 The gebdkit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gebd/autograd.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace gebd::ag {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

namespace {

bool any_grad(const std::vector<Var>& xs) {
  for (const auto& x : xs)
    if (x.requires_grad()) return true;
  return false;
}

// Assemble an op node. `parents` keeps only gradient-carrying inputs (the
// traversal set); the closure captures whatever it needs itself.
Var make_op(Tensor value, const std::vector<Var>& inputs,
            std::function<void(const Tensor&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  for (const auto& in : inputs) {
    if (in.requires_grad()) {
      n->requires_grad = true;
      n->parents.push_back(in.node());
    }
  }
  if (n->requires_grad) n->backward_fn = std::move(backward);
  return Var(n);
}

}  // namespace

void Var::backward() const {
  GEBD_CHECK_ARG(n_ != nullptr, "backward() on undefined Var");
  GEBD_CHECK_ARG(n_->value.numel() == 1, "backward() needs a scalar root");
  if (!n_->requires_grad) return;

  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(n_.get(), 0);
  visited.insert(n_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  n_->grad_ref()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad_ready) node->backward_fn(node->grad);
  }
}

// ---------------- elementwise ----------------

Var add(const Var& a, const Var& b) {
  GEBD_CHECK_ARG(a.val().same_shape(b.val()), "add: shape mismatch");
  Tensor out = a.val();
  out.add_(b.val());
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) an->grad_ref().add_(g);
    if (bn->requires_grad) bn->grad_ref().add_(g);
  });
}

Var sub(const Var& a, const Var& b) {
  GEBD_CHECK_ARG(a.val().same_shape(b.val()), "sub: shape mismatch");
  Tensor out = a.val();
  const double* bd = b.val().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] -= bd[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) an->grad_ref().add_(g);
    if (bn->requires_grad) {
      Tensor& gb = bn->grad_ref();
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  GEBD_CHECK_ARG(a.val().same_shape(b.val()), "mul: shape mismatch");
  Tensor out = a.val();
  const double* bd = b.val().data();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] *= bd[i];
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) {
      Tensor& ga = an->grad_ref();
      const double* bv = bn->value.data();
      for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * bv[i];
    }
    if (bn->requires_grad) {
      Tensor& gb = bn->grad_ref();
      const double* av = an->value.data();
      for (int64_t i = 0; i < g.numel(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var add_n(const std::vector<Var>& xs) {
  GEBD_CHECK_ARG(!xs.empty(), "add_n: empty input");
  Tensor out = xs[0].val();
  for (size_t k = 1; k < xs.size(); ++k) {
    GEBD_CHECK_ARG(out.same_shape(xs[k].val()), "add_n: shape mismatch");
    out.add_(xs[k].val());
  }
  std::vector<NodePtr> nodes;
  for (const auto& x : xs) nodes.push_back(x.node());
  return make_op(std::move(out), xs, [nodes](const Tensor& g) {
    for (const auto& n : nodes)
      if (n->requires_grad) n->grad_ref().add_(g);
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.val();
  out.scale_(s);
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, s](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += s * g[i];
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] += s;
  auto an = a.node();
  return make_op(std::move(out), {a},
                 [an](const Tensor& g) { an->grad_ref().add_(g); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var relu(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
  auto an = a.node();
  return make_op(std::move(out), {a}, [an](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    const double* av = an->value.data();
    for (int64_t i = 0; i < g.numel(); ++i)
      if (av[i] > 0.0) ga[i] += g[i];
  });
}

Var sigmoid(const Var& a) {
  Tensor out = a.val();
  for (int64_t i = 0; i < out.numel(); ++i) {
    double v = out[i];
    out[i] = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  Tensor saved = out;
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, saved](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i] * saved[i] * (1.0 - saved[i]);
  });
}

// ---------------- linear algebra ----------------

Var matmul(const Var& a, const Var& b) {
  GEBD_CHECK_ARG(a.shape().size() == 2 && b.shape().size() == 2 && a.shape()[1] == b.shape()[0],
                 "matmul: bad shapes");
  int64_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  Tensor out({m, n});
  CMapMat A(a.val().data(), m, k), B(b.val().data(), k, n);
  MapMat(out.data(), m, n) = A * B;
  auto an = a.node(), bn = b.node();
  return make_op(std::move(out), {a, b}, [an, bn, m, k, n](const Tensor& g) {
    CMapMat G(g.data(), m, n);
    if (an->requires_grad) {
      CMapMat B(bn->value.data(), k, n);
      MapMat(an->grad_ref().data(), m, k).noalias() += G * B.transpose();
    }
    if (bn->requires_grad) {
      CMapMat A(an->value.data(), m, k);
      MapMat(bn->grad_ref().data(), k, n).noalias() += A.transpose() * G;
    }
  });
}

Var linear(const Var& x, const Var& w, const Var& b) {
  GEBD_CHECK_ARG(x.shape().size() == 2 && w.shape().size() == 2 && x.shape()[1] == w.shape()[1],
                 "linear: bad shapes");
  int64_t n = x.shape()[0], din = x.shape()[1], dout = w.shape()[0];
  Tensor out({n, dout});
  CMapMat X(x.val().data(), n, din), W(w.val().data(), dout, din);
  MapMat O(out.data(), n, dout);
  O.noalias() = X * W.transpose();
  if (b.defined()) {
    GEBD_CHECK_ARG(b.numel() == dout, "linear: bias size mismatch");
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < dout; ++j) out.at2(i, j) += b.val()[j];
  }
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  auto xn = x.node(), wn = w.node();
  auto bnode = b.defined() ? b.node() : nullptr;
  return make_op(std::move(out), inputs, [xn, wn, bnode, n, din, dout](const Tensor& g) {
    CMapMat G(g.data(), n, dout);
    if (xn->requires_grad) {
      CMapMat W(wn->value.data(), dout, din);
      MapMat(xn->grad_ref().data(), n, din).noalias() += G * W;
    }
    if (wn->requires_grad) {
      CMapMat X(xn->value.data(), n, din);
      MapMat(wn->grad_ref().data(), dout, din).noalias() += G.transpose() * X;
    }
    if (bnode && bnode->requires_grad) {
      Tensor& gb = bnode->grad_ref();
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < dout; ++j) gb[j] += g.at2(i, j);
    }
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.val()[i];
  auto an = a.node();
  return make_op(Tensor::scalar(s), {a}, [an](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g[0];
  });
}

Var mean_all(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Var mean_rows(const Var& a) {
  GEBD_CHECK_ARG(a.shape().size() == 2, "mean_rows: expects (N,D)");
  int64_t n = a.shape()[0], d = a.shape()[1];
  Tensor out({d});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < d; ++j) out[j] += a.val().at2(i, j);
  out.scale_(1.0 / static_cast<double>(n));
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, n, d](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    double inv = 1.0 / static_cast<double>(n);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < d; ++j) ga.at2(i, j) += g[j] * inv;
  });
}

Var row(const Var& a, int64_t i) {
  GEBD_CHECK_ARG(a.shape().size() == 2 && i >= 0 && i < a.shape()[0], "row: bad index");
  int64_t d = a.shape()[1];
  Tensor out({d});
  for (int64_t j = 0; j < d; ++j) out[j] = a.val().at2(i, j);
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, i, d](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    for (int64_t j = 0; j < d; ++j) ga.at2(i, j) += g[j];
  });
}

Var dot(const Var& a, const Var& b) {
  GEBD_CHECK_ARG(a.numel() == b.numel(), "dot: size mismatch");
  double s = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) s += a.val()[i] * b.val()[i];
  auto an = a.node(), bn = b.node();
  return make_op(Tensor::scalar(s), {a, b}, [an, bn](const Tensor& g) {
    if (an->requires_grad) {
      Tensor& ga = an->grad_ref();
      for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g[0] * bn->value[i];
    }
    if (bn->requires_grad) {
      Tensor& gb = bn->grad_ref();
      for (int64_t i = 0; i < gb.numel(); ++i) gb[i] += g[0] * an->value[i];
    }
  });
}

Var reshape(const Var& a, Shape s) {
  Tensor out = a.val().reshaped(std::move(s));
  auto an = a.node();
  return make_op(std::move(out), {a}, [an](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
  });
}

Var concat0(const std::vector<Var>& xs) {
  GEBD_CHECK_ARG(!xs.empty(), "concat0: empty input");
  Shape s = xs[0].shape();
  int64_t inner = xs[0].numel() / std::max<int64_t>(1, s[0]);
  int64_t total0 = 0;
  for (const auto& x : xs) {
    GEBD_CHECK_ARG(x.shape().size() == s.size(), "concat0: rank mismatch");
    for (size_t k = 1; k < s.size(); ++k)
      GEBD_CHECK_ARG(x.shape()[k] == s[k], "concat0: inner shape mismatch");
    total0 += x.shape()[0];
  }
  Shape os = s;
  os[0] = total0;
  Tensor out(os);
  int64_t off = 0;
  for (const auto& x : xs) {
    for (int64_t i = 0; i < x.numel(); ++i) out[off + i] = x.val()[i];
    off += x.numel();
  }
  std::vector<NodePtr> nodes;
  std::vector<int64_t> sizes;
  for (const auto& x : xs) {
    nodes.push_back(x.node());
    sizes.push_back(x.numel());
  }
  (void)inner;
  return make_op(std::move(out), xs, [nodes, sizes](const Tensor& g) {
    int64_t off = 0;
    for (size_t k = 0; k < nodes.size(); ++k) {
      if (nodes[k]->requires_grad) {
        Tensor& gk = nodes[k]->grad_ref();
        for (int64_t i = 0; i < sizes[k]; ++i) gk[i] += g[off + i];
      }
      off += sizes[k];
    }
  });
}

Var concat_flat(const std::vector<Var>& xs) {
  std::vector<Var> flat;
  flat.reserve(xs.size());
  for (const auto& x : xs) flat.push_back(reshape(x, {x.numel()}));
  return concat0(flat);
}

Var logsumexp(const Var& a) {
  GEBD_CHECK_ARG(a.shape().size() == 1 && a.numel() > 0, "logsumexp: expects nonempty 1D");
  double m = a.val()[0];
  for (int64_t i = 1; i < a.numel(); ++i) m = std::max(m, a.val()[i]);
  double z = 0.0;
  for (int64_t i = 0; i < a.numel(); ++i) z += std::exp(a.val()[i] - m);
  double out = m + std::log(z);
  auto an = a.node();
  return make_op(Tensor::scalar(out), {a}, [an, m, z](const Tensor& g) {
    Tensor& ga = an->grad_ref();
    for (int64_t i = 0; i < ga.numel(); ++i) ga[i] += g[0] * std::exp(an->value[i] - m) / z;
  });
}

Var normalize_l2(const Var& a) {
  GEBD_CHECK_ARG(a.shape().size() == 1, "normalize_l2: expects 1D");
  double n = a.val().norm2();
  GEBD_CHECK_ARG(n > 1e-12, "normalize_l2: cannot normalize a (near) zero vector");
  Tensor out = a.val();
  out.scale_(1.0 / n);
  Tensor saved = out;
  auto an = a.node();
  return make_op(std::move(out), {a}, [an, saved, n](const Tensor& g) {
    double gu = 0.0;
    for (int64_t i = 0; i < g.numel(); ++i) gu += g[i] * saved[i];
    Tensor& ga = an->grad_ref();
    for (int64_t i = 0; i < g.numel(); ++i) ga[i] += (g[i] - saved[i] * gu) / n;
  });
}

Var matvec_const(const Tensor& m, const Var& v) {
  GEBD_CHECK_ARG(m.shape().size() == 2 && v.shape().size() == 1 && m.shape()[1] == v.numel(),
                 "matvec_const: bad shapes");
  int64_t rows = m.shape()[0], d = m.shape()[1];
  Tensor out({rows});
  for (int64_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (int64_t j = 0; j < d; ++j) s += m.at2(i, j) * v.val()[j];
    out[i] = s;
  }
  auto vn = v.node();
  Tensor mc = m;
  return make_op(std::move(out), {v}, [vn, mc, rows, d](const Tensor& g) {
    Tensor& gv = vn->grad_ref();
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < d; ++j) gv[j] += g[i] * mc.at2(i, j);
  });
}

Var bce_with_logits(const Var& logit, double target) {
  GEBD_CHECK_ARG(logit.numel() == 1, "bce_with_logits: scalar logit expected");
  double z = logit.val()[0];
  double loss = std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::fabs(z)));
  auto ln = logit.node();
  return make_op(Tensor::scalar(loss), {logit}, [ln, z, target](const Tensor& g) {
    double sig = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    ln->grad_ref()[0] += g[0] * (sig - target);
  });
}

// ---------------- conv-net ops ----------------

namespace {

inline int64_t conv_out(int64_t in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void im2col(const double* x, int64_t c, int64_t h, int64_t w, int kh, int kw, int stride, int pad,
            int64_t ho, int64_t wo, double* col) {
  // col is (c*kh*kw, ho*wo) row-major
  for (int64_t ch = 0; ch < c; ++ch) {
    const double* xc = x + ch * h * w;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        double* crow = col + ((ch * kh + i) * kw + j) * ho * wo;
        for (int64_t y = 0; y < ho; ++y) {
          int64_t yy = y * stride - pad + i;
          if (yy < 0 || yy >= h) {
            for (int64_t xx = 0; xx < wo; ++xx) crow[y * wo + xx] = 0.0;
            continue;
          }
          for (int64_t xo = 0; xo < wo; ++xo) {
            int64_t xx = xo * stride - pad + j;
            crow[y * wo + xo] = (xx >= 0 && xx < w) ? xc[yy * w + xx] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int64_t c, int64_t h, int64_t w, int kh, int kw, int stride,
                int pad, int64_t ho, int64_t wo, double* x) {
  for (int64_t ch = 0; ch < c; ++ch) {
    double* xc = x + ch * h * w;
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const double* crow = col + ((ch * kh + i) * kw + j) * ho * wo;
        for (int64_t y = 0; y < ho; ++y) {
          int64_t yy = y * stride - pad + i;
          if (yy < 0 || yy >= h) continue;
          for (int64_t xo = 0; xo < wo; ++xo) {
            int64_t xx = xo * stride - pad + j;
            if (xx >= 0 && xx < w) xc[yy * w + xx] += crow[y * wo + xo];
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  GEBD_CHECK_ARG(x.shape().size() == 4 && w.shape().size() == 4, "conv2d: expects 4D x and w");
  int64_t n = x.shape()[0], cin = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  int64_t cout = w.shape()[0];
  GEBD_CHECK_ARG(w.shape()[1] == cin, "conv2d: channel mismatch");
  int kh = static_cast<int>(w.shape()[2]), kw = static_cast<int>(w.shape()[3]);
  int64_t ho = conv_out(h, kh, stride, pad), wo = conv_out(wd, kw, stride, pad);
  GEBD_CHECK_ARG(ho >= 1 && wo >= 1, "conv2d: output collapses to zero size");

  int64_t ksz = cin * kh * kw, osz = ho * wo;
  Tensor out({n, cout, ho, wo});
  std::vector<double> col(static_cast<size_t>(ksz * osz));
  CMapMat W(w.val().data(), cout, ksz);
  for (int64_t s = 0; s < n; ++s) {
    im2col(x.val().data() + s * cin * h * wd, cin, h, wd, kh, kw, stride, pad, ho, wo, col.data());
    CMapMat C(col.data(), ksz, osz);
    MapMat O(out.data() + s * cout * osz, cout, osz);
    O.noalias() = W * C;
  }
  if (b.defined()) {
    GEBD_CHECK_ARG(b.numel() == cout, "conv2d: bias size mismatch");
    for (int64_t s = 0; s < n; ++s)
      for (int64_t c = 0; c < cout; ++c) {
        double bv = b.val()[c];
        double* o = out.data() + (s * cout + c) * osz;
        for (int64_t i = 0; i < osz; ++i) o[i] += bv;
      }
  }

  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  return make_op(std::move(out), inputs,
                 [xn, wn, bn, n, cin, h, wd, cout, kh, kw, stride, pad, ho, wo, ksz,
                  osz](const Tensor& g) {
                   std::vector<double> col(static_cast<size_t>(ksz * osz));
                   std::vector<double> dcol(static_cast<size_t>(ksz * osz));
                   CMapMat W(wn->value.data(), cout, ksz);
                   for (int64_t s = 0; s < n; ++s) {
                     CMapMat G(g.data() + s * cout * osz, cout, osz);
                     if (wn->requires_grad) {
                       im2col(xn->value.data() + s * cin * h * wd, cin, h, wd, kh, kw, stride, pad,
                              ho, wo, col.data());
                       CMapMat C(col.data(), ksz, osz);
                       MapMat(wn->grad_ref().data(), cout, ksz).noalias() += G * C.transpose();
                     }
                     if (xn->requires_grad) {
                       MapMat DC(dcol.data(), ksz, osz);
                       DC.noalias() = W.transpose() * G;
                       col2im_add(dcol.data(), cin, h, wd, kh, kw, stride, pad, ho, wo,
                                  xn->grad_ref().data() + s * cin * h * wd);
                     }
                   }
                   if (bn && bn->requires_grad) {
                     Tensor& gb = bn->grad_ref();
                     for (int64_t s = 0; s < n; ++s)
                       for (int64_t c = 0; c < cout; ++c) {
                         const double* gp = g.data() + (s * cout + c) * osz;
                         double acc = 0.0;
                         for (int64_t i = 0; i < osz; ++i) acc += gp[i];
                         gb[c] += acc;
                       }
                   }
                 });
}

Var depthwise_conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad) {
  GEBD_CHECK_ARG(x.shape().size() == 4 && w.shape().size() == 4 && w.shape()[1] == 1,
                 "depthwise_conv2d: w must be (C,1,kh,kw)");
  int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], wd = x.shape()[3];
  GEBD_CHECK_ARG(w.shape()[0] == c, "depthwise_conv2d: channel mismatch");
  int kh = static_cast<int>(w.shape()[2]), kw = static_cast<int>(w.shape()[3]);
  int64_t ho = conv_out(h, kh, stride, pad), wo = conv_out(wd, kw, stride, pad);
  Tensor out({n, c, ho, wo});
  for (int64_t s = 0; s < n; ++s)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* xc = x.val().data() + (s * c + ch) * h * wd;
      const double* wc = w.val().data() + ch * kh * kw;
      double bv = b.defined() ? b.val()[ch] : 0.0;
      double* oc = out.data() + (s * c + ch) * ho * wo;
      for (int64_t y = 0; y < ho; ++y)
        for (int64_t xo = 0; xo < wo; ++xo) {
          double acc = bv;
          for (int i = 0; i < kh; ++i) {
            int64_t yy = y * stride - pad + i;
            if (yy < 0 || yy >= h) continue;
            for (int j = 0; j < kw; ++j) {
              int64_t xx = xo * stride - pad + j;
              if (xx >= 0 && xx < wd) acc += wc[i * kw + j] * xc[yy * wd + xx];
            }
          }
          oc[y * wo + xo] = acc;
        }
    }
  std::vector<Var> inputs{x, w};
  if (b.defined()) inputs.push_back(b);
  auto xn = x.node(), wn = w.node();
  auto bn = b.defined() ? b.node() : nullptr;
  return make_op(
      std::move(out), inputs,
      [xn, wn, bn, n, c, h, wd, kh, kw, stride, pad, ho, wo](const Tensor& g) {
        for (int64_t s = 0; s < n; ++s)
          for (int64_t ch = 0; ch < c; ++ch) {
            const double* gc = g.data() + (s * c + ch) * ho * wo;
            const double* xc = xn->value.data() + (s * c + ch) * h * wd;
            const double* wc = wn->value.data() + ch * kh * kw;
            double* dxc =
                xn->requires_grad ? xn->grad_ref().data() + (s * c + ch) * h * wd : nullptr;
            double* dwc = wn->requires_grad ? wn->grad_ref().data() + ch * kh * kw : nullptr;
            for (int64_t y = 0; y < ho; ++y)
              for (int64_t xo = 0; xo < wo; ++xo) {
                double gv = gc[y * wo + xo];
                if (gv == 0.0) continue;
                for (int i = 0; i < kh; ++i) {
                  int64_t yy = y * stride - pad + i;
                  if (yy < 0 || yy >= h) continue;
                  for (int j = 0; j < kw; ++j) {
                    int64_t xx = xo * stride - pad + j;
                    if (xx < 0 || xx >= wd) continue;
                    if (dwc) dwc[i * kw + j] += gv * xc[yy * wd + xx];
                    if (dxc) dxc[yy * wd + xx] += gv * wc[i * kw + j];
                  }
                }
              }
            if (bn && bn->requires_grad) {
              double acc = 0.0;
              for (int64_t i = 0; i < ho * wo; ++i) acc += gc[i];
              bn->grad_ref()[ch] += acc;
            }
          }
      });
}

Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps) {
  GEBD_CHECK_ARG(x.shape().size() == 4, "group_norm: expects (N,C,H,W)");
  int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  GEBD_CHECK_ARG(groups >= 1 && c % groups == 0, "group_norm: C not divisible by groups");
  GEBD_CHECK_ARG(gamma.numel() == c && beta.numel() == c, "group_norm: affine size mismatch");
  int64_t cg = c / groups, m = cg * h * w, hw = h * w;

  Tensor out({n, c, h, w});
  std::vector<double> mu(static_cast<size_t>(n * groups)), istd(static_cast<size_t>(n * groups));
  for (int64_t s = 0; s < n; ++s)
    for (int64_t g0 = 0; g0 < groups; ++g0) {
      const double* xg = x.val().data() + (s * c + g0 * cg) * hw;
      double sum = 0.0, sq = 0.0;
      for (int64_t i = 0; i < m; ++i) {
        sum += xg[i];
        sq += xg[i] * xg[i];
      }
      double mean = sum / static_cast<double>(m);
      double var = sq / static_cast<double>(m) - mean * mean;
      if (var < 0.0) var = 0.0;
      double is = 1.0 / std::sqrt(var + eps);
      mu[s * groups + g0] = mean;
      istd[s * groups + g0] = is;
      for (int64_t cc = 0; cc < cg; ++cc) {
        int64_t ch = g0 * cg + cc;
        double ga = gamma.val()[ch], be = beta.val()[ch];
        const double* xc = x.val().data() + (s * c + ch) * hw;
        double* oc = out.data() + (s * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) oc[i] = ga * (xc[i] - mean) * is + be;
      }
    }

  auto xn = x.node(), gn = gamma.node(), bn = beta.node();
  return make_op(
      std::move(out), {x, gamma, beta},
      [xn, gn, bn, n, c, h, w, groups, cg, m, hw, mu, istd](const Tensor& g) {
        for (int64_t s = 0; s < n; ++s)
          for (int64_t g0 = 0; g0 < groups; ++g0) {
            double mean = mu[s * groups + g0], is = istd[s * groups + g0];
            // s1 = sum(dy*gamma), s2 = sum(dy*gamma*xhat) over the group
            double s1 = 0.0, s2 = 0.0;
            for (int64_t cc = 0; cc < cg; ++cc) {
              int64_t ch = g0 * cg + cc;
              double ga = gn->value[ch];
              const double* gc = g.data() + (s * c + ch) * hw;
              const double* xc = xn->value.data() + (s * c + ch) * hw;
              for (int64_t i = 0; i < hw; ++i) {
                double xhat = (xc[i] - mean) * is;
                s1 += gc[i] * ga;
                s2 += gc[i] * ga * xhat;
              }
            }
            for (int64_t cc = 0; cc < cg; ++cc) {
              int64_t ch = g0 * cg + cc;
              double ga = gn->value[ch];
              const double* gc = g.data() + (s * c + ch) * hw;
              const double* xc = xn->value.data() + (s * c + ch) * hw;
              double* dxc =
                  xn->requires_grad ? xn->grad_ref().data() + (s * c + ch) * hw : nullptr;
              double dga = 0.0, dbe = 0.0;
              for (int64_t i = 0; i < hw; ++i) {
                double xhat = (xc[i] - mean) * is;
                if (dxc)
                  dxc[i] += is * (gc[i] * ga - s1 / static_cast<double>(m) -
                                  xhat * s2 / static_cast<double>(m));
                dga += gc[i] * xhat;
                dbe += gc[i];
              }
              if (gn->requires_grad) gn->grad_ref()[ch] += dga;
              if (bn->requires_grad) bn->grad_ref()[ch] += dbe;
            }
          }
      });
}

Var maxpool2d(const Var& x, int k, int stride, int pad) {
  GEBD_CHECK_ARG(x.shape().size() == 4, "maxpool2d: expects (N,C,H,W)");
  int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
  int64_t ho = conv_out(h, k, stride, pad), wo = conv_out(w, k, stride, pad);
  Tensor out({n, c, ho, wo});
  std::vector<int64_t> arg(static_cast<size_t>(n * c * ho * wo));
  for (int64_t s = 0; s < n; ++s)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* xc = x.val().data() + (s * c + ch) * h * w;
      for (int64_t y = 0; y < ho; ++y)
        for (int64_t xo = 0; xo < wo; ++xo) {
          double best = -std::numeric_limits<double>::infinity();
          int64_t bi = -1;
          for (int i = 0; i < k; ++i) {
            int64_t yy = y * stride - pad + i;
            if (yy < 0 || yy >= h) continue;
            for (int j = 0; j < k; ++j) {
              int64_t xx = xo * stride - pad + j;
              if (xx < 0 || xx >= w) continue;
              double v = xc[yy * w + xx];
              if (v > best) {
                best = v;
                bi = yy * w + xx;
              }
            }
          }
          GEBD_CHECK(bi >= 0, "maxpool2d: empty window");
          int64_t oi = ((s * c + ch) * ho + y) * wo + xo;
          out[oi] = best;
          arg[static_cast<size_t>(oi)] = (s * c + ch) * h * w + bi;
        }
    }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, arg](const Tensor& g) {
    Tensor& gx = xn->grad_ref();
    for (int64_t i = 0; i < g.numel(); ++i) gx[arg[static_cast<size_t>(i)]] += g[i];
  });
}

Var global_avg_pool(const Var& x) {
  GEBD_CHECK_ARG(x.shape().size() == 4, "global_avg_pool: expects (N,C,H,W)");
  int64_t n = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  Tensor out({n, c});
  for (int64_t s = 0; s < n; ++s)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* xc = x.val().data() + (s * c + ch) * hw;
      double acc = 0.0;
      for (int64_t i = 0; i < hw; ++i) acc += xc[i];
      out.at2(s, ch) = acc / static_cast<double>(hw);
    }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, n, c, hw](const Tensor& g) {
    Tensor& gx = xn->grad_ref();
    for (int64_t s = 0; s < n; ++s)
      for (int64_t ch = 0; ch < c; ++ch) {
        double gv = g.at2(s, ch) / static_cast<double>(hw);
        double* gc = gx.data() + (s * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) gc[i] += gv;
      }
  });
}

Var temporal_shift(const Var& x, int64_t n_shift) {
  GEBD_CHECK_ARG(x.shape().size() == 4, "temporal_shift: expects (T,C,H,W)");
  int64_t t = x.shape()[0], c = x.shape()[1], hw = x.shape()[2] * x.shape()[3];
  GEBD_CHECK_ARG(t >= 1, "temporal_shift: empty sequence");
  GEBD_CHECK_ARG(n_shift >= 0 && 2 * n_shift <= c, "temporal_shift: shift group exceeds channels");
  Tensor out({t, c, x.shape()[2], x.shape()[3]});
  auto src = [&](int64_t tt, int64_t ch) { return x.val().data() + (tt * c + ch) * hw; };
  for (int64_t tt = 0; tt < t; ++tt)
    for (int64_t ch = 0; ch < c; ++ch) {
      double* o = out.data() + (tt * c + ch) * hw;
      if (ch < n_shift) {  // from t-1
        if (tt == 0)
          std::fill(o, o + hw, 0.0);
        else
          std::copy(src(tt - 1, ch), src(tt - 1, ch) + hw, o);
      } else if (ch < 2 * n_shift) {  // from t+1
        if (tt == t - 1)
          std::fill(o, o + hw, 0.0);
        else
          std::copy(src(tt + 1, ch), src(tt + 1, ch) + hw, o);
      } else {
        std::copy(src(tt, ch), src(tt, ch) + hw, o);
      }
    }
  auto xn = x.node();
  return make_op(std::move(out), {x}, [xn, t, c, hw, n_shift](const Tensor& g) {
    Tensor& gx = xn->grad_ref();
    for (int64_t tt = 0; tt < t; ++tt)
      for (int64_t ch = 0; ch < c; ++ch) {
        double* dst = gx.data() + (tt * c + ch) * hw;
        if (ch < n_shift) {  // out[tt+1] read x[tt]
          if (tt + 1 < t) {
            const double* gp = g.data() + ((tt + 1) * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] += gp[i];
          }
        } else if (ch < 2 * n_shift) {  // out[tt-1] read x[tt]
          if (tt - 1 >= 0) {
            const double* gp = g.data() + ((tt - 1) * c + ch) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] += gp[i];
          }
        } else {
          const double* gp = g.data() + (tt * c + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) dst[i] += gp[i];
        }
      }
  });
}

// ---------------- motion ops ----------------

Var correlation_volume(const Var& f0, const Var& f1, int l) {
  GEBD_CHECK_ARG(f0.shape().size() == 3 && f0.val().same_shape(f1.val()),
                 "correlation_volume: feature maps must be (C,H,W) and equal-shaped");
  GEBD_CHECK_ARG(l >= 1, "correlation_volume: displacement radius must be >= 1");
  int64_t c = f0.shape()[0], h = f0.shape()[1], w = f0.shape()[2];
  int64_t p = 2 * l + 1;
  Tensor out({h, w, p, p});
  double inv_c = 1.0 / static_cast<double>(c);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t i = 0; i < p; ++i) {
        int64_t yy = y + i - l;
        if (yy < 0 || yy >= h) continue;  // stays zero
        for (int64_t j = 0; j < p; ++j) {
          int64_t xx = x + j - l;
          if (xx < 0 || xx >= w) continue;
          double acc = 0.0;
          for (int64_t ch = 0; ch < c; ++ch)
            acc += f0.val()[(ch * h + y) * w + x] * f1.val()[(ch * h + yy) * w + xx];
          out[((y * w + x) * p + i) * p + j] = acc * inv_c;
        }
      }
  auto an = f0.node(), bn = f1.node();
  return make_op(std::move(out), {f0, f1}, [an, bn, c, h, w, p, l, inv_c](const Tensor& g) {
    for (int64_t y = 0; y < h; ++y)
      for (int64_t x = 0; x < w; ++x)
        for (int64_t i = 0; i < p; ++i) {
          int64_t yy = y + i - l;
          if (yy < 0 || yy >= h) continue;
          for (int64_t j = 0; j < p; ++j) {
            int64_t xx = x + j - l;
            if (xx < 0 || xx >= w) continue;
            double gv = g[((y * w + x) * p + i) * p + j] * inv_c;
            if (gv == 0.0) continue;
            for (int64_t ch = 0; ch < c; ++ch) {
              if (an->requires_grad)
                an->grad_ref()[(ch * h + y) * w + x] += gv * bn->value[(ch * h + yy) * w + xx];
              if (bn->requires_grad)
                bn->grad_ref()[(ch * h + yy) * w + xx] += gv * an->value[(ch * h + y) * w + x];
            }
          }
        }
  });
}

Var kernel_soft_argmax(const Var& vol, double softmax_temperature, double kernel_sigma) {
  GEBD_CHECK_ARG(vol.shape().size() == 4 && vol.shape()[2] == vol.shape()[3],
                 "kernel_soft_argmax: expects (H,W,P,P)");
  GEBD_CHECK_ARG(softmax_temperature > 0.0 && kernel_sigma > 0.0,
                 "kernel_soft_argmax: temperature and sigma must be positive");
  int64_t h = vol.shape()[0], w = vol.shape()[1], p = vol.shape()[2];
  GEBD_CHECK_ARG(p % 2 == 1, "kernel_soft_argmax: neighborhood side must be odd");
  int64_t l = (p - 1) / 2, pp = p * p;
  Tensor out({2, h, w});
  std::vector<double> weights(static_cast<size_t>(h * w * pp));
  std::vector<int32_t> pstar(static_cast<size_t>(h * w));
  double inv2s2 = 1.0 / (2.0 * kernel_sigma * kernel_sigma);
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double* s = vol.val().data() + (y * w + x) * pp;
      // hard argmax, first on ties in row-major order
      int64_t best = 0;
      for (int64_t q = 1; q < pp; ++q)
        if (s[q] > s[best]) best = q;
      pstar[static_cast<size_t>(y * w + x)] = static_cast<int32_t>(best);
      int64_t bi = best / p, bj = best % p;
      double zmax = -std::numeric_limits<double>::infinity();
      std::vector<double> z(static_cast<size_t>(pp));
      for (int64_t i = 0; i < p; ++i)
        for (int64_t j = 0; j < p; ++j) {
          double d2 = static_cast<double>((i - bi) * (i - bi) + (j - bj) * (j - bj));
          double gmod = std::exp(-d2 * inv2s2);
          double zq = gmod * s[i * p + j] / softmax_temperature;
          z[static_cast<size_t>(i * p + j)] = zq;
          zmax = std::max(zmax, zq);
        }
      double zsum = 0.0;
      for (int64_t q = 0; q < pp; ++q) {
        double e = std::exp(z[static_cast<size_t>(q)] - zmax);
        weights[static_cast<size_t>((y * w + x) * pp + q)] = e;
        zsum += e;
      }
      double dy = 0.0, dx = 0.0;
      for (int64_t q = 0; q < pp; ++q) {
        double wq = weights[static_cast<size_t>((y * w + x) * pp + q)] / zsum;
        weights[static_cast<size_t>((y * w + x) * pp + q)] = wq;
        dy += wq * static_cast<double>(q / p - l);
        dx += wq * static_cast<double>(q % p - l);
      }
      out[(0 * h + y) * w + x] = dy;
      out[(1 * h + y) * w + x] = dx;
    }
  Tensor saved_out = out;
  auto vn = vol.node();
  double tau = softmax_temperature;
  return make_op(std::move(out), {vol},
                 [vn, weights, pstar, saved_out, h, w, p, pp, l, tau, inv2s2](const Tensor& g) {
                   Tensor& gv = vn->grad_ref();
                   for (int64_t y = 0; y < h; ++y)
                     for (int64_t x = 0; x < w; ++x) {
                       double g0 = g[(0 * h + y) * w + x], g1 = g[(1 * h + y) * w + x];
                       if (g0 == 0.0 && g1 == 0.0) continue;
                       double ody = saved_out[(0 * h + y) * w + x];
                       double odx = saved_out[(1 * h + y) * w + x];
                       int64_t best = pstar[static_cast<size_t>(y * w + x)];
                       int64_t bi = best / p, bj = best % p;
                       for (int64_t q = 0; q < pp; ++q) {
                         double wq = weights[static_cast<size_t>((y * w + x) * pp + q)];
                         if (wq == 0.0) continue;
                         int64_t i = q / p, j = q % p;
                         double d2 =
                             static_cast<double>((i - bi) * (i - bi) + (j - bj) * (j - bj));
                         double gmod = std::exp(-d2 * inv2s2);
                         double contrib = g0 * (static_cast<double>(i - l) - ody) +
                                          g1 * (static_cast<double>(j - l) - odx);
                         gv[(y * w + x) * pp + q] += wq * contrib * gmod / tau;
                       }
                     }
                 });
}

Var confidence_map(const Var& vol) {
  GEBD_CHECK_ARG(vol.shape().size() == 4 && vol.shape()[2] == vol.shape()[3],
                 "confidence_map: expects (H,W,P,P)");
  int64_t h = vol.shape()[0], w = vol.shape()[1], pp = vol.shape()[2] * vol.shape()[3];
  Tensor out({1, h, w});
  std::vector<int64_t> arg(static_cast<size_t>(h * w));
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x) {
      const double* s = vol.val().data() + (y * w + x) * pp;
      int64_t best = 0;
      for (int64_t q = 1; q < pp; ++q)
        if (s[q] > s[best]) best = q;
      out[y * w + x] = s[best];
      arg[static_cast<size_t>(y * w + x)] = (y * w + x) * pp + best;
    }
  auto vn = vol.node();
  return make_op(std::move(out), {vol}, [vn, arg](const Tensor& g) {
    Tensor& gv = vn->grad_ref();
    for (int64_t i = 0; i < g.numel(); ++i) gv[arg[static_cast<size_t>(i)]] += g[i];
  });
}

}  // namespace gebd::ag
