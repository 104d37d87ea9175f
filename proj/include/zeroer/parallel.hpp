// Copyright 2026 The ZeroER Authors.
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

#include <cstddef>
#include <functional>

namespace zeroer {

// Process-wide cap on worker threads. 0 means hardware concurrency.
void set_thread_count(std::size_t n);
std::size_t thread_count();

// Runs fn(begin, end) over contiguous chunks of [0, n). Chunks are disjoint,
// so callers that only write to their own indices stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn,
                  std::size_t min_chunk = 1024);

}  // namespace zeroer
