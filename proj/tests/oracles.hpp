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


// Scalar reference implementations. They share only the tensor container with
// the library and are written straight from the operator definitions.

#pragma once

#include <algorithm>
#include <cmath>

#include "dlu/tensor.hpp"
#include "dlu/tensor_ops.hpp"
#include "dlu/upsampling.hpp"

namespace oracle {

using dlu::Tensor;

inline double at_padded(const Tensor& t, int b, int c, int y, int x) {
  if (y < 0 || y >= t.h() || x < 0 || x >= t.w()) return 0.0;
  return t(b, c, y, x);
}

inline Tensor conv2d(const Tensor& in, const dlu::ConvSpec& s) {
  const int p = (s.kernel_size - 1) / 2;
  Tensor out({in.n(), s.out_channels, in.h(), in.w()});
  for (int b = 0; b < in.n(); ++b)
    for (int oc = 0; oc < s.out_channels; ++oc)
      for (int y = 0; y < in.h(); ++y)
        for (int x = 0; x < in.w(); ++x) {
          double acc = s.bias[oc];
          for (int ic = 0; ic < s.in_channels; ++ic)
            for (int ky = 0; ky < s.kernel_size; ++ky)
              for (int kx = 0; kx < s.kernel_size; ++kx) {
                const int yy = y + ky - p, xx = x + kx - p;
                if (yy < 0 || yy >= in.h() || xx < 0 || xx >= in.w()) continue;
                acc += s.weights(oc, ic, ky, kx) * in(b, ic, yy, xx);
              }
          out(b, oc, y, x) = acc;
        }
  return out;
}

inline Tensor softmax(const Tensor& in) {
  Tensor out(in.shape());
  for (int b = 0; b < in.n(); ++b)
    for (int y = 0; y < in.h(); ++y)
      for (int x = 0; x < in.w(); ++x) {
        double m = in(b, 0, y, x);
        for (int c = 1; c < in.c(); ++c) m = std::max(m, in(b, c, y, x));
        double z = 0.0;
        for (int c = 0; c < in.c(); ++c) z += std::exp(in(b, c, y, x) - m);
        for (int c = 0; c < in.c(); ++c) out(b, c, y, x) = std::exp(in(b, c, y, x) - m) / z;
      }
  return out;
}

inline Tensor pixel_shuffle(const Tensor& in, int sigma) {
  const int groups = in.c() / (sigma * sigma);
  Tensor out({in.n(), groups, in.h() * sigma, in.w() * sigma});
  for (int b = 0; b < in.n(); ++b)
    for (int g = 0; g < groups; ++g)
      for (int s = 0; s < sigma * sigma; ++s)
        for (int y = 0; y < in.h(); ++y)
          for (int x = 0; x < in.w(); ++x)
            out(b, g, sigma * y + s / sigma, sigma * x + s % sigma) =
                in(b, g * sigma * sigma + s, y, x);
  return out;
}

inline Tensor nearest(const Tensor& in, int sigma) {
  Tensor out({in.n(), in.c(), in.h() * sigma, in.w() * sigma});
  for (int b = 0; b < in.n(); ++b)
    for (int c = 0; c < in.c(); ++c)
      for (int i = 0; i < out.h(); ++i)
        for (int j = 0; j < out.w(); ++j) out(b, c, i, j) = in(b, c, i / sigma, j / sigma);
  return out;
}

// Four-term bilinear blend with weights (ceil - coordinate), coordinates clamped.
inline double bilinear(const Tensor& f, int b, int c, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(f.w() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(f.h() - 1));
  const int x0 = static_cast<int>(std::floor(x)), x1 = static_cast<int>(std::ceil(x));
  const int y0 = static_cast<int>(std::floor(y)), y1 = static_cast<int>(std::ceil(y));
  const double wx = std::ceil(x) - x, wy = std::ceil(y) - y;
  return wx * wy * f(b, c, y0, x0) + (1 - wx) * wy * f(b, c, y0, x1) +
         wx * (1 - wy) * f(b, c, y1, x0) + (1 - wx) * (1 - wy) * f(b, c, y1, x1);
}

inline Tensor bilinear_upsample(const Tensor& in, int sigma) {
  Tensor out({in.n(), in.c(), in.h() * sigma, in.w() * sigma});
  for (int b = 0; b < in.n(); ++b)
    for (int c = 0; c < in.c(); ++c)
      for (int i = 0; i < out.h(); ++i)
        for (int j = 0; j < out.w(); ++j)
          out(b, c, i, j) =
              bilinear(in, b, c, (j + 0.5) / sigma - 0.5, (i + 0.5) / sigma - 0.5);
  return out;
}

// kernels: (n, k*k, sigma h, sigma w)
inline Tensor reassemble(const Tensor& in, const Tensor& kernels, int sigma, int k) {
  const int r = (k - 1) / 2;
  Tensor out({in.n(), in.c(), in.h() * sigma, in.w() * sigma});
  for (int b = 0; b < in.n(); ++b)
    for (int c = 0; c < in.c(); ++c)
      for (int i = 0; i < out.h(); ++i)
        for (int j = 0; j < out.w(); ++j) {
          double acc = 0.0;
          for (int u = -r; u <= r; ++u)
            for (int v = -r; v <= r; ++v) {
              const int y = i / sigma + u, x = j / sigma + v;
              if (y < 0 || y >= in.h() || x < 0 || x >= in.w()) continue;
              acc += kernels(b, (u + r) * k + (v + r), i, j) * in(b, c, y, x);
            }
          out(b, c, i, j) = acc;
        }
  return out;
}

inline Tensor carafe_kernels(const Tensor& in, const dlu::CarafeParams& p,
                             const dlu::UpsampleConfig& cfg) {
  return softmax(pixel_shuffle(conv2d(conv2d(in, p.compressor), p.kernel_generator), cfg.sigma));
}

inline Tensor carafe(const Tensor& in, const dlu::CarafeParams& p, const dlu::UpsampleConfig& cfg) {
  return reassemble(in, carafe_kernels(in, p, cfg), cfg.sigma, cfg.k_up);
}

// Offsets for output (i, j): channel pair (2s, 2s+1) of the raw prediction at
// (i / sigma, j / sigma), s the row-major sub-position.
inline Tensor dlu_offsets(const Tensor& raw, int sigma) {
  Tensor out({raw.n(), 2, raw.h() * sigma, raw.w() * sigma});
  for (int b = 0; b < raw.n(); ++b)
    for (int i = 0; i < out.h(); ++i)
      for (int j = 0; j < out.w(); ++j) {
        const int s = (i % sigma) * sigma + j % sigma;
        out(b, 0, i, j) = raw(b, 2 * s, i / sigma, j / sigma);
        out(b, 1, i, j) = raw(b, 2 * s + 1, i / sigma, j / sigma);
      }
  return out;
}

inline Tensor expand(const Tensor& source, const Tensor& offsets, int sigma) {
  Tensor out({source.n(), source.c(), source.h() * sigma, source.w() * sigma});
  for (int b = 0; b < source.n(); ++b)
    for (int t = 0; t < source.c(); ++t)
      for (int i = 0; i < out.h(); ++i)
        for (int j = 0; j < out.w(); ++j)
          out(b, t, i, j) = bilinear(source, b, t, j / sigma + offsets(b, 0, i, j),
                                     i / sigma + offsets(b, 1, i, j));
  return out;
}

inline Tensor dlu_kernels(const Tensor& in, const dlu::DluParams& p, const dlu::UpsampleConfig& cfg) {
  const Tensor m = conv2d(in, p.compressor);
  const Tensor source = softmax(conv2d(m, p.space_generator));
  const Tensor offsets = dlu_offsets(conv2d(m, p.offset_predictor), cfg.sigma);
  return expand(source, offsets, cfg.sigma);
}

inline Tensor dlu(const Tensor& in, const dlu::DluParams& p, const dlu::UpsampleConfig& cfg) {
  return reassemble(in, dlu_kernels(in, p, cfg), cfg.sigma, cfg.k_up);
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

}  // namespace oracle
