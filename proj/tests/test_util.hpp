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

#include "dlu/tensor_ops.hpp"
#include "dlu/upsampling.hpp"

namespace testutil {

inline void randomize(dlu::Rng& rng, dlu::ConvSpec& s, double stddev) {
  dlu::random_gaussian_weights(rng, s, stddev);
  for (auto& b : s.bias) b = rng.normal(0.0, stddev);
}

// Parameters with visibly non-uniform kernels and O(1) offsets, some of
// which push sampling positions past the border.
inline dlu::DluParams random_dlu(const dlu::UpsampleConfig& cfg, dlu::Rng& rng,
                                 double offset_std = 0.5) {
  auto p = dlu::DluParams::zeros(cfg);
  randomize(rng, p.compressor, 0.5);
  randomize(rng, p.space_generator, 0.5);
  randomize(rng, p.offset_predictor, offset_std);
  return p;
}

inline dlu::CarafeParams random_carafe(const dlu::UpsampleConfig& cfg, dlu::Rng& rng) {
  auto p = dlu::CarafeParams::zeros(cfg);
  randomize(rng, p.compressor, 0.5);
  randomize(rng, p.kernel_generator, 0.5);
  return p;
}

inline dlu::Tensor random_input(dlu::Rng& rng, dlu::Shape s) {
  return dlu::random_uniform<double>(rng, s, -1.0, 1.0);
}

// Normalized source field with strictly positive entries.
inline dlu::KernelField random_source(dlu::Rng& rng, dlu::Shape s) {
  return {dlu::channel_softmax(dlu::random_gaussian<double>(rng, s, 0.0, 1.5)), true};
}

inline bool interior(int i, int j, int sigma, int r, int h, int w) {
  const int y = i / sigma, x = j / sigma;
  return y - r >= 0 && y + r < h && x - r >= 0 && x + r < w;
}

}  // namespace testutil
