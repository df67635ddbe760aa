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

#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "gebd/tensor.hpp"

namespace gebd::ag {

// Tape-based reverse-mode autodiff over Tensor. Graphs are built dynamically;
// ops whose inputs carry no gradient produce detached constants, so the key
// (momentum) tower runs graph-free by construction.

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily, same shape as value
  bool requires_grad = false;
  bool grad_ready = false;
  std::vector<NodePtr> parents;
  // Receives d(loss)/d(this->value), accumulates into parents' grads.
  std::function<void(const Tensor&)> backward_fn;

  Tensor& grad_ref() {
    if (!grad_ready) {
      grad = Tensor::zeros(value.shape());
      grad_ready = true;
    }
    return grad;
  }
};

class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  static Var constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return Var(n);
  }
  static Var param(Tensor t) {
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    return Var(n);
  }

  bool defined() const { return n_ != nullptr; }
  const Tensor& val() const { return n_->value; }
  Tensor& mutable_value() const { return n_->value; }  // parameter updates only
  bool requires_grad() const { return n_ && n_->requires_grad; }
  const Tensor& grad() const { return n_->grad; }
  bool has_grad() const { return n_ && n_->grad_ready; }
  void zero_grad() const {
    if (n_) {
      n_->grad_ready = false;
      n_->grad = Tensor();
    }
  }
  NodePtr node() const { return n_; }

  const Shape& shape() const { return n_->value.shape(); }
  int64_t numel() const { return n_->value.numel(); }

  Var detached() const { return constant(n_->value); }

  // Reverse pass from a scalar root. Frees nothing; the graph lives as long
  // as Vars referencing it do.
  void backward() const;

 private:
  NodePtr n_;
};

// --- elementwise / linear algebra ---
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var add_n(const std::vector<Var>& xs);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var neg(const Var& a);
Var relu(const Var& a);
Var sigmoid(const Var& a);
Var matmul(const Var& a, const Var& b);             // (m,k)x(k,n)
Var linear(const Var& x, const Var& w, const Var& b);  // x:(N,Din) w:(Dout,Din) b:(Dout)|undefined
Var sum(const Var& a);                              // -> scalar
Var mean_all(const Var& a);                         // -> scalar
Var mean_rows(const Var& a);                        // (N,D) -> (D)
Var row(const Var& a, int64_t i);                   // (N,D) -> (D)
Var dot(const Var& a, const Var& b);                // vectors -> scalar
Var reshape(const Var& a, Shape s);
Var concat0(const std::vector<Var>& xs);            // concat along axis 0
Var concat_flat(const std::vector<Var>& xs);        // flatten + concat -> 1D
Var logsumexp(const Var& a);                        // 1D -> scalar, stable
Var normalize_l2(const Var& a);                     // 1D; throws on ~zero norm
Var matvec_const(const Tensor& m, const Var& v);    // (N,D)x(D) -> (N), m constant
Var bce_with_logits(const Var& logit, double target);  // scalar logit

// --- conv-net ops (x is (N,C,H,W)) ---
Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var depthwise_conv2d(const Var& x, const Var& w, const Var& b, int stride, int pad);
Var group_norm(const Var& x, const Var& gamma, const Var& beta, int groups, double eps = 1e-5);
Var maxpool2d(const Var& x, int k, int stride, int pad);
Var global_avg_pool(const Var& x);  // (N,C,H,W) -> (N,C)

// Channel shift along the leading time axis of (T,C,H,W): the first
// n_shift channels take values from t-1, the next n_shift from t+1,
// boundary slots zero-filled, remaining channels pass through.
Var temporal_shift(const Var& x, int64_t n_shift);

// --- motion ops ---
// scores(x,p) = (1/C) * sum_c f0(c,x) * f1(c,x+p), zero outside; (H,W,P,P), P=2l+1.
Var correlation_volume(const Var& f0, const Var& f1, int l);
// Kernel soft-argmax over the displacement neighborhood -> (2,H,W) as (dy,dx).
// Hard argmax (row-major first on ties) is treated as a constant; gradients
// flow through the softmax weights only.
Var kernel_soft_argmax(const Var& vol, double softmax_temperature, double kernel_sigma);
// Max score over displacements -> (1,H,W).
Var confidence_map(const Var& vol);

}  // namespace gebd::ag
