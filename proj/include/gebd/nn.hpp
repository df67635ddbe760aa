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

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "gebd/autograd.hpp"
#include "gebd/common.hpp"
#include "gebd/tensor.hpp"

namespace gebd::nn {

using ag::Var;

// Named parameter registry. Registration order is the canonical iteration
// order; two stores built by the same code path always enumerate identically,
// which checkpointing and momentum mirroring rely on.
class ParamStore {
 public:
  Var add(const std::string& name, Tensor init) {
    GEBD_CHECK_ARG(!index_.count(name), "duplicate parameter name: " + name);
    Var v = Var::param(std::move(init));
    index_[name] = params_.size();
    params_.emplace_back(name, v);
    return v;
  }

  // Registers an existing parameter under this store without copying it; the
  // node stays shared, so updates through either store are visible in both.
  Var add_shared(const std::string& name, const Var& v) {
    GEBD_CHECK_ARG(!index_.count(name), "duplicate parameter name: " + name);
    index_[name] = params_.size();
    params_.emplace_back(name, v);
    return v;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }

  Var get(const std::string& name) const {
    auto it = index_.find(name);
    GEBD_CHECK_ARG(it != index_.end(), "unknown parameter: " + name);
    return params_[it->second].second;
  }

  size_t size() const { return params_.size(); }
  const std::vector<std::pair<std::string, Var>>& entries() const { return params_; }

  void zero_grad() const {
    for (const auto& [name, v] : params_) v.zero_grad();
  }

  void set_requires_grad(bool rg) const {
    for (const auto& [name, v] : params_) v.node()->requires_grad = rg;
  }

  int64_t total_numel() const {
    int64_t n = 0;
    for (const auto& [name, v] : params_) n += v.numel();
    return n;
  }

  // dst <- m*dst + (1-m)*src, matched by name; shapes must agree.
  static void momentum_update(const ParamStore& dst, const ParamStore& src, double m) {
    GEBD_CHECK_ARG(dst.size() == src.size(), "momentum_update: store size mismatch");
    for (size_t i = 0; i < dst.params_.size(); ++i) {
      const auto& [dn, dv] = dst.params_[i];
      const auto& [sn, sv] = src.params_[i];
      GEBD_CHECK_ARG(dn == sn, "momentum_update: parameter name mismatch at " + dn);
      dv.mutable_value().lerp_(sv.val(), m);
    }
  }

  static void copy_values(const ParamStore& dst, const ParamStore& src) {
    momentum_update(dst, src, 0.0);
  }

 private:
  std::vector<std::pair<std::string, Var>> params_;
  std::map<std::string, size_t> index_;
};

// ---------------- initializers ----------------

inline Tensor he_normal(const Shape& shape, int64_t fan_in, Rng& rng) {
  Tensor t(shape);
  double std = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.normal() * std;
  return t;
}

// ---------------- layers ----------------

struct Conv2d {
  Var w, b;
  int stride = 1, pad = 0;
  Var operator()(const Var& x) const { return ag::conv2d(x, w, b, stride, pad); }
};

inline Conv2d make_conv2d(ParamStore& ps, const std::string& prefix, int64_t cin, int64_t cout,
                          int k, int stride, int pad, bool bias, Rng& rng) {
  Conv2d c;
  c.w = ps.add(prefix + ".weight", he_normal({cout, cin, k, k}, cin * k * k, rng));
  if (bias) c.b = ps.add(prefix + ".bias", Tensor::zeros({cout}));
  c.stride = stride;
  c.pad = pad;
  return c;
}

struct DepthwiseConv2d {
  Var w, b;
  int stride = 1, pad = 0;
  Var operator()(const Var& x) const { return ag::depthwise_conv2d(x, w, b, stride, pad); }
};

inline DepthwiseConv2d make_depthwise_conv2d(ParamStore& ps, const std::string& prefix, int64_t c,
                                             int k, int stride, int pad, bool bias, Rng& rng) {
  DepthwiseConv2d d;
  d.w = ps.add(prefix + ".weight", he_normal({c, 1, k, k}, k * k, rng));
  if (bias) d.b = ps.add(prefix + ".bias", Tensor::zeros({c}));
  d.stride = stride;
  d.pad = pad;
  return d;
}

struct GroupNorm {
  Var gamma, beta;
  int groups = 1;
  Var operator()(const Var& x) const { return ag::group_norm(x, gamma, beta, groups); }
};

// Channel groups of 8 where divisible; norm stays valid for any batch size,
// including single-clip inference.
inline int pick_groups(int64_t c) {
  for (int g : {8, 4, 2})
    if (c % g == 0 && c >= 2 * g) return g;
  return 1;
}

inline GroupNorm make_group_norm(ParamStore& ps, const std::string& prefix, int64_t c) {
  GroupNorm g;
  g.gamma = ps.add(prefix + ".gamma", Tensor::full({c}, 1.0));
  g.beta = ps.add(prefix + ".beta", Tensor::zeros({c}));
  g.groups = pick_groups(c);
  return g;
}

struct Linear {
  Var w, b;
  Var operator()(const Var& x) const { return ag::linear(x, w, b); }
};

inline Linear make_linear(ParamStore& ps, const std::string& prefix, int64_t din, int64_t dout,
                          bool bias, Rng& rng) {
  Linear l;
  l.w = ps.add(prefix + ".weight", he_normal({dout, din}, din, rng));
  if (bias) l.b = ps.add(prefix + ".bias", Tensor::zeros({dout}));
  return l;
}

// ---------------- optimizer ----------------

// SGD with classical momentum and a warmup + cosine learning-rate schedule.
// lr(t) = base*(t+1)/warmup for t < warmup, then the cosine half-wave down to
// zero at total_steps.
class SgdOptimizer {
 public:
  SgdOptimizer(const ParamStore& ps, double base_lr, double momentum, double weight_decay,
               int64_t warmup_steps, int64_t total_steps)
      : base_lr_(base_lr),
        momentum_(momentum),
        weight_decay_(weight_decay),
        warmup_(warmup_steps),
        total_(total_steps) {
    GEBD_CHECK_ARG(total_steps >= 1, "optimizer: total_steps must be >= 1");
    GEBD_CHECK_ARG(warmup_steps >= 0 && warmup_steps <= total_steps,
                   "optimizer: warmup must lie within total_steps");
    for (const auto& [name, v] : ps.entries()) {
      params_.push_back(v);
      names_.push_back(name);
      velocity_.emplace_back(Tensor::zeros(v.shape()));
    }
  }

  double lr_at(int64_t step) const {
    if (warmup_ > 0 && step < warmup_)
      return base_lr_ * static_cast<double>(step + 1) / static_cast<double>(warmup_);
    if (total_ == warmup_) return base_lr_;
    double prog = static_cast<double>(step - warmup_) / static_cast<double>(total_ - warmup_);
    return 0.5 * base_lr_ * (1.0 + std::cos(3.14159265358979323846 * prog));
  }

  int64_t step_count() const { return step_; }

  void step() {
    double lr = lr_at(step_);
    for (size_t i = 0; i < params_.size(); ++i) {
      const Var& p = params_[i];
      Tensor g = p.has_grad() ? p.grad() : Tensor::zeros(p.shape());
      if (weight_decay_ != 0.0) {
        const Tensor& w = p.val();
        for (int64_t k = 0; k < g.numel(); ++k) g[k] += weight_decay_ * w[k];
      }
      Tensor& v = velocity_[i];
      for (int64_t k = 0; k < g.numel(); ++k) v[k] = momentum_ * v[k] + g[k];
      Tensor& w = params_[i].mutable_value();
      for (int64_t k = 0; k < g.numel(); ++k) w[k] -= lr * v[k];
    }
    ++step_;
  }

  const std::vector<std::string>& names() const { return names_; }
  std::vector<Tensor>& velocity() { return velocity_; }
  const std::vector<Tensor>& velocity() const { return velocity_; }
  void set_step(int64_t s) { step_ = s; }

 private:
  std::vector<Var> params_;
  std::vector<std::string> names_;
  std::vector<Tensor> velocity_;
  double base_lr_, momentum_, weight_decay_;
  int64_t warmup_, total_;
  int64_t step_ = 0;
};

}  // namespace gebd::nn
