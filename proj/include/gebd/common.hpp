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

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace gebd {

enum class ErrorCode {
  invalid_argument,
  io_error,
  config_error,
  runtime_error,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

#define GEBD_CHECK(cond, msg)                                             \
  do {                                                                    \
    if (!(cond)) throw ::gebd::Error(::gebd::ErrorCode::runtime_error, (msg)); \
  } while (0)

#define GEBD_CHECK_ARG(cond, msg)                                            \
  do {                                                                       \
    if (!(cond)) throw ::gebd::Error(::gebd::ErrorCode::invalid_argument, (msg)); \
  } while (0)

#define GEBD_CHECK_IO(cond, msg)                                        \
  do {                                                                  \
    if (!(cond)) throw ::gebd::Error(::gebd::ErrorCode::io_error, (msg)); \
  } while (0)

#define GEBD_CHECK_CFG(cond, msg)                                            \
  do {                                                                       \
    if (!(cond)) throw ::gebd::Error(::gebd::ErrorCode::config_error, (msg)); \
  } while (0)

// Stable 64-bit FNV-1a. Stage seeds are derived as fnv1a64(root_seed ":" stage),
// so stages can be rerun independently of each other.
inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline uint64_t derive_seed(uint64_t root, const std::string& stage) {
  return fnv1a64(std::to_string(root) + ":" + stage);
}

// Deterministic PRNG (splitmix64 core). std::random distributions are
// implementation-defined, so all sampling goes through this.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire multiply-shift; deterministic.
  uint64_t uniform_int(uint64_t n) {
    GEBD_CHECK_ARG(n > 0, "uniform_int requires n > 0");
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < n) {
      uint64_t t = (-n) % n;
      while (lo < t) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = uniform(-1.0, 1.0);
      v = uniform(-1.0, 1.0);
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Fork a stream for a named sub-task without disturbing this one.
  Rng fork(const std::string& tag) const {
    return Rng(fnv1a64(std::to_string(state_) + "/" + tag));
  }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Deterministic work splitter: results are identical for any worker count
// because each index writes its own slot.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn);

}  // namespace gebd
