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

#include <cstdint>
#include <map>

namespace dlu {

// Operation tally collected while a FlopCounterScope is active on the
// calling thread. Multiply-adds count as 2 FLOPs; a bias add counts as one
// multiply-add. Softmax evaluations are tallied separately, keyed by vector
// length, so they can be reported symbolically.
struct FlopTally {
  std::uint64_t flops = 0;
  std::map<int, std::uint64_t> softmax_by_dim;

  std::uint64_t softmax_vectors() const;
};

class FlopCounterScope {
 public:
  explicit FlopCounterScope(FlopTally& tally);
  ~FlopCounterScope();
  FlopCounterScope(const FlopCounterScope&) = delete;
  FlopCounterScope& operator=(const FlopCounterScope&) = delete;

 private:
  FlopTally* previous_;
};

namespace detail {
void count_flops(std::uint64_t flops);
void count_softmax(std::uint64_t vectors, int dim);
}  // namespace detail

}  // namespace dlu
