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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dlu/rng.hpp"
#include "dlu/tensor.hpp"

namespace dlu {

// One "same"-padded, stride-1 convolution layer: weights (out, in, k, k)
// plus one bias per output channel. k must be odd.
template <typename T>
struct BasicConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 1;
  BasicTensor<T> weights;
  std::vector<T> bias;

  // Zero weights and bias with validated geometry.
  static BasicConvSpec zeros(int in_channels, int out_channels, int kernel_size);

  int padding() const { return (kernel_size - 1) / 2; }
  std::size_t trainable_count() const {
    return (static_cast<std::size_t>(in_channels) * kernel_size * kernel_size + 1) *
           static_cast<std::size_t>(out_channels);
  }
  // Throws ConfigError/ShapeError when geometry and storage disagree.
  void validate() const;

  template <typename U>
  BasicConvSpec<U> cast() const {
    return {in_channels, out_channels, kernel_size, weights.template cast<U>(),
            std::vector<U>(bias.begin(), bias.end())};
  }
};

using ConvSpec = BasicConvSpec<double>;
using ConvSpecF = BasicConvSpec<float>;

// Cross-correlation (no kernel flip) with zero padding (k-1)/2 on both
// spatial axes; output is (n, out_channels, h, w).
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvSpec<T>& spec);

// Softmax over the channel axis at every (n, y, x), max-subtracted.
template <typename T>
BasicTensor<T> channel_softmax(const BasicTensor<T>& input);

// (n, c, h, w) -> (n, c/s^2, s*h, s*w). Channel g*s^2 + b lands at output
// position (s*y + b/s, s*x + b%s) of channel g (row-major sub-blocks).
template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& input, int sigma);

// Exact inverse of pixel_shuffle.
template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& input, int sigma);

// Interpolation stencil for one sample point. Coordinates are clamped to
// the grid first; then with x0 = floor(x), x1 = ceil(x), wx = x1 - x (and
// likewise for y) the sample is
//   wy * (wx * f(x0, y0) + (1 - wx) * f(x1, y0))
//     + (1 - wy) * (wx * f(x0, y1) + (1 - wx) * f(x1, y1)).
template <typename T>
struct BilinearTap {
  int x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  T wx = 1, wy = 1;
  bool x_clamped = false;  // the raw coordinate lay outside [0, w-1]
  bool y_clamped = false;
};

template <typename T>
BilinearTap<T> bilinear_tap(T x, T y, int width, int height) {
  BilinearTap<T> tap;
  const T max_x = static_cast<T>(width - 1);
  const T max_y = static_cast<T>(height - 1);
  tap.x_clamped = x < T{0} || x > max_x;
  tap.y_clamped = y < T{0} || y > max_y;
  const T cx = std::clamp(x, T{0}, max_x);
  const T cy = std::clamp(y, T{0}, max_y);
  const T fx = std::floor(cx);
  const T fy = std::floor(cy);
  const T gx = std::ceil(cx);
  const T gy = std::ceil(cy);
  tap.x0 = static_cast<int>(fx);
  tap.x1 = static_cast<int>(gx);
  tap.y0 = static_cast<int>(fy);
  tap.y1 = static_cast<int>(gy);
  tap.wx = gx - cx;
  tap.wy = gy - cy;
  return tap;
}

// Per-channel bilinear sample of batch item n at (x, y) in grid units
// (x along width, y along height). Total: out-of-range points are clamped.
template <typename T>
std::vector<T> bilinear_sample(const BasicTensor<T>& field, int n, T x, T y);

// Seeded initializers.
template <typename T>
BasicTensor<T> random_gaussian(Rng& rng, Shape shape, double mean, double stddev);

template <typename T>
BasicTensor<T> random_uniform(Rng& rng, Shape shape, double lo, double hi);

// Fills spec.weights from U(-a, a), a = sqrt(6 / (fan_in + fan_out)) with
// fan_in = in*k^2 and fan_out = out*k^2; bias is reset to zero.
template <typename T>
void random_xavier(Rng& rng, BasicConvSpec<T>& spec);

// N(0, stddev^2) weights, zero bias.
template <typename T>
void random_gaussian_weights(Rng& rng, BasicConvSpec<T>& spec, double stddev);

}  // namespace dlu
