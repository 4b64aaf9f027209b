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

#include "dlu/flop_counter.hpp"

namespace dlu {
namespace {
thread_local FlopTally* t_active = nullptr;
}  // namespace

std::uint64_t FlopTally::softmax_vectors() const {
  std::uint64_t total = 0;
  for (const auto& [dim, count] : softmax_by_dim) total += count;
  return total;
}

FlopCounterScope::FlopCounterScope(FlopTally& tally) : previous_(t_active) {
  t_active = &tally;
}

FlopCounterScope::~FlopCounterScope() { t_active = previous_; }

namespace detail {

void count_flops(std::uint64_t flops) {
  if (t_active != nullptr) t_active->flops += flops;
}

void count_softmax(std::uint64_t vectors, int dim) {
  if (t_active != nullptr) t_active->softmax_by_dim[dim] += vectors;
}

}  // namespace detail
}  // namespace dlu
