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

#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <vector>

#include "gebd/common.hpp"

namespace gebd {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

// Dense row-major double tensor with value semantics. All training math in
// this project runs in 64-bit so finite-difference checks share the
// production code path.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), 0.0) {
    GEBD_CHECK_ARG(shape_numel(shape_) >= 0, "negative tensor shape");
  }
  Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    GEBD_CHECK_ARG(static_cast<int64_t>(data_.size()) == shape_numel(shape_),
                   "tensor data size does not match shape " + shape_str(shape_));
  }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
  }
  static Tensor scalar(double v) { return Tensor({1}, {v}); }

  const Shape& shape() const { return shape_; }
  int64_t dim(size_t i) const { return shape_.at(i); }
  size_t ndim() const { return shape_.size(); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  double item() const {
    GEBD_CHECK_ARG(numel() == 1, "item() on non-scalar tensor");
    return data_[0];
  }

  Tensor reshaped(Shape s) const {
    GEBD_CHECK_ARG(shape_numel(s) == numel(), "reshape changes element count");
    return Tensor(std::move(s), data_);
  }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  // 4D accessors for (N,C,H,W)-style layouts; hot loops index flat instead.
  double& at4(int64_t a, int64_t b, int64_t c, int64_t d) {
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
  double at4(int64_t a, int64_t b, int64_t c, int64_t d) const {
    return data_[static_cast<size_t>(((a * shape_[1] + b) * shape_[2] + c) * shape_[3] + d)];
  }
  double& at3(int64_t a, int64_t b, int64_t c) {
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  double at3(int64_t a, int64_t b, int64_t c) const {
    return data_[static_cast<size_t>((a * shape_[1] + b) * shape_[2] + c)];
  }
  double& at2(int64_t a, int64_t b) { return data_[static_cast<size_t>(a * shape_[1] + b)]; }
  double at2(int64_t a, int64_t b) const { return data_[static_cast<size_t>(a * shape_[1] + b)]; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  void add_(const Tensor& o) {
    GEBD_CHECK_ARG(same_shape(o), "add_: shape mismatch");
    for (int64_t i = 0; i < numel(); ++i) data_[i] += o.data_[i];
  }
  void scale_(double a) {
    for (auto& v : data_) v *= a;
  }
  // this = m*this + (1-m)*o  (momentum mix)
  void lerp_(const Tensor& o, double m) {
    GEBD_CHECK_ARG(same_shape(o), "lerp_: shape mismatch");
    for (int64_t i = 0; i < numel(); ++i) data_[i] = m * data_[i] + (1.0 - m) * o.data_[i];
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
  }
  double norm2() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }
  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace gebd
