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

#include "dlu/tensor_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dlu/flop_counter.hpp"
#include "dlu/parallel.hpp"

namespace dlu {

template <typename T>
BasicConvSpec<T> BasicConvSpec<T>::zeros(int in_channels, int out_channels,
                                         int kernel_size) {
  BasicConvSpec spec;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  spec.kernel_size = kernel_size;
  if (in_channels <= 0 || out_channels <= 0 || kernel_size <= 0) {
    throw ConfigError("conv: channels and kernel size must be positive");
  }
  spec.weights = BasicTensor<T>({out_channels, in_channels, kernel_size, kernel_size});
  spec.bias.assign(static_cast<std::size_t>(out_channels), T{0});
  spec.validate();
  return spec;
}

template <typename T>
void BasicConvSpec<T>::validate() const {
  if (kernel_size <= 0 || kernel_size % 2 == 0) {
    throw ConfigError("conv: kernel size must be odd, got " + std::to_string(kernel_size));
  }
  const Shape expected{out_channels, in_channels, kernel_size, kernel_size};
  if (weights.shape() != expected) {
    throw ShapeError("conv: weights " + weights.shape().str() + ", expected " +
                     expected.str());
  }
  if (bias.size() != static_cast<std::size_t>(out_channels)) {
    throw ShapeError("conv: bias length " + std::to_string(bias.size()) +
                     ", expected " + std::to_string(out_channels));
  }
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicConvSpec<T>& spec) {
  spec.validate();
  if (input.c() != spec.in_channels) {
    throw ShapeError("conv2d: input has " + std::to_string(input.c()) +
                     " channels, layer expects " + std::to_string(spec.in_channels));
  }
  const int n = input.n(), h = input.h(), w = input.w();
  const int k = spec.kernel_size, pad = spec.padding();
  const int cin = spec.in_channels, cout = spec.out_channels;
  BasicTensor<T> out({n, cout, h, w});
  detail::count_flops(2ull * (static_cast<std::uint64_t>(cin) * k * k + 1) * cout *
                      static_cast<std::uint64_t>(n) * h * w);

  // Each task owns one output plane; per-element accumulation order is
  // bias, then (ic, ky, kx) ascending.
  parallel_for(static_cast<std::size_t>(n) * cout, [&](std::size_t task) {
    const int b = static_cast<int>(task / cout);
    const int oc = static_cast<int>(task % cout);
    T* dst = out.plane(b, oc);
    std::fill(dst, dst + static_cast<std::size_t>(h) * w, spec.bias[oc]);
    for (int ic = 0; ic < cin; ++ic) {
      const T* src = input.plane(b, ic);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y_begin = std::max(0, -dy);
        const int y_end = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x_begin = std::max(0, -dx);
          const int x_end = std::min(w, w - dx);
          const T wgt = spec.weights(oc, ic, ky, kx);
          for (int y = y_begin; y < y_end; ++y) {
            T* drow = dst + static_cast<std::size_t>(y) * w;
            const T* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x_begin; x < x_end; ++x) drow[x] += wgt * srow[x];
          }
        }
      }
    }
  });
  require_finite(out, "conv2d");
  return out;
}

template <typename T>
BasicTensor<T> channel_softmax(const BasicTensor<T>& input) {
  const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
  BasicTensor<T> out(input.shape());
  const std::size_t hw = static_cast<std::size_t>(h) * w;
  detail::count_softmax(static_cast<std::uint64_t>(n) * hw, c);
  parallel_for(static_cast<std::size_t>(n) * hw, [&](std::size_t task) {
    const int b = static_cast<int>(task / hw);
    const std::size_t p = task % hw;
    const T* src = input.plane(b, 0) + p;
    T* dst = out.plane(b, 0) + p;
    T peak = src[0];
    for (int ch = 1; ch < c; ++ch) peak = std::max(peak, src[ch * hw]);
    T total = 0;
    for (int ch = 0; ch < c; ++ch) {
      const T e = std::exp(src[ch * hw] - peak);
      dst[ch * hw] = e;
      total += e;
    }
    for (int ch = 0; ch < c; ++ch) dst[ch * hw] /= total;
  }, 64);
  require_finite(out, "channel_softmax");
  return out;
}

namespace {

void require_ratio(int sigma, std::string_view op) {
  if (sigma < 1) {
    throw ConfigError(std::string(op) + ": sigma must be >= 1, got " + std::to_string(sigma));
  }
}

}  // namespace

template <typename T>
BasicTensor<T> pixel_shuffle(const BasicTensor<T>& input, int sigma) {
  require_ratio(sigma, "pixel_shuffle");
  const int s2 = sigma * sigma;
  if (input.c() % s2 != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(input.c()) +
                     " channels not divisible by sigma^2 = " + std::to_string(s2));
  }
  const int n = input.n(), groups = input.c() / s2, h = input.h(), w = input.w();
  BasicTensor<T> out({n, groups, h * sigma, w * sigma});
  for (int b = 0; b < n; ++b) {
    for (int g = 0; g < groups; ++g) {
      for (int s = 0; s < s2; ++s) {
        const int oy = s / sigma, ox = s % sigma;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            out(b, g, sigma * y + oy, sigma * x + ox) = input(b, g * s2 + s, y, x);
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> pixel_unshuffle(const BasicTensor<T>& input, int sigma) {
  require_ratio(sigma, "pixel_unshuffle");
  if (input.h() % sigma != 0 || input.w() % sigma != 0) {
    throw ShapeError("pixel_unshuffle: spatial dims of " + input.shape().str() +
                     " not divisible by sigma");
  }
  const int s2 = sigma * sigma;
  const int n = input.n(), groups = input.c(), h = input.h() / sigma, w = input.w() / sigma;
  BasicTensor<T> out({n, groups * s2, h, w});
  for (int b = 0; b < n; ++b) {
    for (int g = 0; g < groups; ++g) {
      for (int s = 0; s < s2; ++s) {
        const int oy = s / sigma, ox = s % sigma;
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            out(b, g * s2 + s, y, x) = input(b, g, sigma * y + oy, sigma * x + ox);
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
std::vector<T> bilinear_sample(const BasicTensor<T>& field, int n, T x, T y) {
  if (n < 0 || n >= field.n()) throw ShapeError("bilinear_sample: batch index out of range");
  const auto tap = bilinear_tap(x, y, field.w(), field.h());
  std::vector<T> out(static_cast<std::size_t>(field.c()));
  for (int ch = 0; ch < field.c(); ++ch) {
    const T top = tap.wx * field(n, ch, tap.y0, tap.x0) + (1 - tap.wx) * field(n, ch, tap.y0, tap.x1);
    const T bot = tap.wx * field(n, ch, tap.y1, tap.x0) + (1 - tap.wx) * field(n, ch, tap.y1, tap.x1);
    out[ch] = tap.wy * top + (1 - tap.wy) * bot;
  }
  return out;
}

template <typename T>
BasicTensor<T> random_gaussian(Rng& rng, Shape shape, double mean, double stddev) {
  if (!(stddev > 0.0)) throw ConfigError("random_gaussian: stddev must be positive");
  BasicTensor<T> out(shape);
  for (auto& v : out.data()) v = static_cast<T>(rng.normal(mean, stddev));
  return out;
}

template <typename T>
BasicTensor<T> random_uniform(Rng& rng, Shape shape, double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("random_uniform: empty interval");
  BasicTensor<T> out(shape);
  for (auto& v : out.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return out;
}

template <typename T>
void random_xavier(Rng& rng, BasicConvSpec<T>& spec) {
  spec.validate();
  const double k2 = static_cast<double>(spec.kernel_size) * spec.kernel_size;
  const double fan_in = spec.in_channels * k2;
  const double fan_out = spec.out_channels * k2;
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  spec.weights = random_uniform<T>(rng, spec.weights.shape(), -bound, bound);
  std::fill(spec.bias.begin(), spec.bias.end(), T{0});
}

template <typename T>
void random_gaussian_weights(Rng& rng, BasicConvSpec<T>& spec, double stddev) {
  spec.validate();
  spec.weights = random_gaussian<T>(rng, spec.weights.shape(), 0.0, stddev);
  std::fill(spec.bias.begin(), spec.bias.end(), T{0});
}

#define DLU_INSTANTIATE(T)                                                        \
  template struct BasicConvSpec<T>;                                               \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicConvSpec<T>&); \
  template BasicTensor<T> channel_softmax(const BasicTensor<T>&);                 \
  template BasicTensor<T> pixel_shuffle(const BasicTensor<T>&, int);              \
  template BasicTensor<T> pixel_unshuffle(const BasicTensor<T>&, int);            \
  template std::vector<T> bilinear_sample(const BasicTensor<T>&, int, T, T);      \
  template BasicTensor<T> random_gaussian(Rng&, Shape, double, double);           \
  template BasicTensor<T> random_uniform(Rng&, Shape, double, double);            \
  template void random_xavier(Rng&, BasicConvSpec<T>&);                           \
  template void random_gaussian_weights(Rng&, BasicConvSpec<T>&, double);

DLU_INSTANTIATE(float)
DLU_INSTANTIATE(double)
#undef DLU_INSTANTIATE

}  // namespace dlu
