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

#include "gebd/common.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace gebd {

// Static work split: worker k owns indices [k*n/W, (k+1)*n/W). The partition
// depends only on (n, workers), never on timing, so results that are reduced
// in index order stay reproducible for any fixed worker count.
void parallel_for(int64_t n, int workers, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (workers < 1) workers = 1;
  if (workers == 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int w = static_cast<int>(std::min<int64_t>(workers, n));
  std::vector<std::thread> threads;
  threads.reserve(static_cast<size_t>(w));
  std::atomic<bool> failed{false};
  for (int k = 0; k < w; ++k) {
    int64_t lo = n * k / w, hi = n * (k + 1) / w;
    threads.emplace_back([lo, hi, &fn, &failed] {
      try {
        for (int64_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        failed.store(true);
      }
    });
  }
  for (auto& t : threads) t.join();
  GEBD_CHECK(!failed.load(), "parallel_for: a worker task threw");
}

}  // namespace gebd
