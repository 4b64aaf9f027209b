// Copyright (c) 2026 The DLU Authors. All Rights Reserved.
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
#include <cstdint>
#include <functional>

namespace dlu {

// Upper bound on worker threads used by operators. 0 means "unset": the
// DLU_THREADS environment variable is consulted, then hardware concurrency.
void set_max_threads(int n);
int max_threads();

// Runs body(i) for every i in [0, count). Work is split into contiguous
// chunks; each index is handled by exactly one thread, so results never
// depend on the thread count as long as body(i) only writes state owned by i.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body,
                  std::size_t grain = 1);

// RAII override of the thread cap, restored on destruction.
class ThreadCapScope {
 public:
  explicit ThreadCapScope(int n);
  ~ThreadCapScope();
  ThreadCapScope(const ThreadCapScope&) = delete;
  ThreadCapScope& operator=(const ThreadCapScope&) = delete;

 private:
  int previous_;
};

}  // namespace dlu
