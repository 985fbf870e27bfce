// Copyright 2026 The FedClip Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDCLIP_SRC_PARALLEL_H_
#define FEDCLIP_SRC_PARALLEL_H_

#include <algorithm>
#include <thread>
#include <vector>

namespace fedclip::internal {

// Calls fn(i) for i in [0, n) on up to `threads` workers, striding indices.
// Callers write results into per-index slots, so completion order is
// irrelevant.
template <typename Fn>
void ParallelFor(int n, int threads, Fn&& fn) {
  const int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (int i = w; i < n; i += workers) fn(i);
    });
  }
}

}  // namespace fedclip::internal

#endif  // FEDCLIP_SRC_PARALLEL_H_
