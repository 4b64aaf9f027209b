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

#include "dlu/upsampling.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "dlu/flop_counter.hpp"
#include "dlu/parallel.hpp"

namespace dlu {

void UpsampleConfig::validate() const {
  if (sigma < 1) throw ConfigError("sigma must be >= 1, got " + std::to_string(sigma));
  if (k_up < 1 || k_up % 2 == 0) {
    throw ConfigError("k_up must be odd and >= 1, got " + std::to_string(k_up));
  }
  if (k_encoder < 1 || k_encoder % 2 == 0) {
    throw ConfigError("k_encoder must be odd and >= 1, got " + std::to_string(k_encoder));
  }
  if (c_mid < 1 || c_in < 1) throw ConfigError("channel counts must be positive");
}

std::string UpsampleConfig::str() const {
  std::ostringstream os;
  os << "sigma=" << sigma << " k_up=" << k_up << " k_encoder=" << k_encoder
     << " c_mid=" << c_mid << " c_in=" << c_in;
  return os.str();
}

namespace {

void require_layer(const auto& spec, int in, int out, int k, const char* name) {
  spec.validate();
  if (spec.in_channels != in || spec.out_channels != out || spec.kernel_size != k) {
    throw ShapeError(std::string(name) + ": layer geometry (" +
                     std::to_string(spec.in_channels) + "->" +
                     std::to_string(spec.out_channels) + ", k=" +
                     std::to_string(spec.kernel_size) + ") does not match config");
  }
}

template <typename T>
void require_input(const BasicTensor<T>& input, const UpsampleConfig& config, const char* op) {
  require_valid_shape(input.shape(), op);
  if (input.c() != config.c_in) {
    throw ShapeError(std::string(op) + ": input has " + std::to_string(input.c()) +
                     " channels, config expects " + std::to_string(config.c_in));
  }
}

}  // namespace

template <typename T>
BasicCarafeParams<T> BasicCarafeParams<T>::zeros(const UpsampleConfig& config) {
  config.validate();
  const int s2 = config.sigma * config.sigma;
  return {BasicConvSpec<T>::zeros(config.c_in, config.c_mid, 1),
          BasicConvSpec<T>::zeros(config.c_mid, s2 * config.taps(), config.k_encoder)};
}

template <typename T>
void BasicCarafeParams<T>::validate(const UpsampleConfig& config) const {
  config.validate();
  const int s2 = config.sigma * config.sigma;
  require_layer(compressor, config.c_in, config.c_mid, 1, "carafe compressor");
  require_layer(kernel_generator, config.c_mid, s2 * config.taps(), config.k_encoder,
                "carafe kernel_generator");
}

template <typename T>
BasicDluParams<T> BasicDluParams<T>::zeros(const UpsampleConfig& config) {
  config.validate();
  const int s2 = config.sigma * config.sigma;
  return {BasicConvSpec<T>::zeros(config.c_in, config.c_mid, 1),
          BasicConvSpec<T>::zeros(config.c_mid, config.taps(), config.k_encoder),
          BasicConvSpec<T>::zeros(config.c_mid, 2 * s2, config.k_encoder)};
}

template <typename T>
void BasicDluParams<T>::validate(const UpsampleConfig& config) const {
  config.validate();
  const int s2 = config.sigma * config.sigma;
  require_layer(compressor, config.c_in, config.c_mid, 1, "dlu compressor");
  require_layer(space_generator, config.c_mid, config.taps(), config.k_encoder,
                "dlu space_generator");
  require_layer(offset_predictor, config.c_mid, 2 * s2, config.k_encoder,
                "dlu offset_predictor");
}

template <typename T>
BasicTensor<T> nearest_upsample(const BasicTensor<T>& input, int sigma) {
  if (sigma < 1) throw ConfigError("nearest_upsample: sigma must be >= 1");
  const int n = input.n(), c = input.c(), oh = input.h() * sigma, ow = input.w() * sigma;
  BasicTensor<T> out({n, c, oh, ow});
  for (int b = 0; b < n; ++b) {
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < oh; ++i) {
        for (int j = 0; j < ow; ++j) out(b, ch, i, j) = input(b, ch, i / sigma, j / sigma);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& input, int sigma) {
  if (sigma < 1) throw ConfigError("bilinear_upsample: sigma must be >= 1");
  const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
  const int oh = h * sigma, ow = w * sigma;
  BasicTensor<T> out({n, c, oh, ow});
  // One bilinear blend is 9 FLOPs: 4 weight products, 3 adds, 2 weight complements.
  detail::count_flops(9ull * static_cast<std::uint64_t>(n) * c * oh * ow);
  const T inv = T{1} / static_cast<T>(sigma);
  parallel_for(static_cast<std::size_t>(n) * c, [&](std::size_t task) {
    const int b = static_cast<int>(task / c);
    const int ch = static_cast<int>(task % c);
    for (int i = 0; i < oh; ++i) {
      const T sy = (static_cast<T>(i) + T{0.5}) * inv - T{0.5};
      for (int j = 0; j < ow; ++j) {
        const T sx = (static_cast<T>(j) + T{0.5}) * inv - T{0.5};
        const auto tap = bilinear_tap(sx, sy, w, h);
        const T top = tap.wx * input(b, ch, tap.y0, tap.x0) +
                      (1 - tap.wx) * input(b, ch, tap.y0, tap.x1);
        const T bot = tap.wx * input(b, ch, tap.y1, tap.x0) +
                      (1 - tap.wx) * input(b, ch, tap.y1, tap.x1);
        out(b, ch, i, j) = tap.wy * top + (1 - tap.wy) * bot;
      }
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> reassemble(const BasicTensor<T>& input, const BasicKernelField<T>& kernels,
                          const UpsampleConfig& config) {
  config.validate();
  const int sigma = config.sigma, k = config.k_up, r = config.radius();
  const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
  const int oh = h * sigma, ow = w * sigma;
  const auto& kt = kernels.kernels;
  if (kt.c() != config.taps()) {
    throw ShapeError("reassemble: kernel field has " + std::to_string(kt.c()) +
                     " channels, expected k_up^2 = " + std::to_string(config.taps()));
  }
  if (kt.n() != n || kt.h() != oh || kt.w() != ow) {
    throw ShapeError("reassemble: kernel field " + kt.shape().str() +
                     " does not match upsampled input " + Shape{n, config.taps(), oh, ow}.str());
  }
  BasicTensor<T> out({n, c, oh, ow});
  detail::count_flops(2ull * config.taps() * static_cast<std::uint64_t>(n) * c * oh * ow);
  const std::size_t kplane = static_cast<std::size_t>(oh) * ow;

  // Tasks own output rows. Each row is accumulated tap by tap, so every output
  // still sums its taps in (u, v) row-major order.
  parallel_for(static_cast<std::size_t>(n) * oh, [&](std::size_t task) {
    const int b = static_cast<int>(task / oh);
    const int i = static_cast<int>(task % oh);
    const int cy = i / sigma;
    const T* krow = kt.plane(b, 0) + static_cast<std::size_t>(i) * ow;
    for (int ch = 0; ch < c; ++ch) {
      const T* src = input.plane(b, ch);
      T* acc = out.plane(b, ch) + static_cast<std::size_t>(i) * ow;
      for (int u = -r; u <= r; ++u) {
        const int y = cy + u;
        if (y < 0 || y >= h) continue;
        const T* srow = src + static_cast<std::size_t>(y) * w;
        for (int v = -r; v <= r; ++v) {
          const T* kv = krow + static_cast<std::size_t>((u + r) * k + (v + r)) * kplane;
          const int x_lo = std::max(0, v), x_hi = std::min(w, w + v);
          for (int x = x_lo; x < x_hi; ++x) {
            const T s = srow[x];
            const int j0 = (x - v) * sigma;
            for (int q = 0; q < sigma; ++q) acc[j0 + q] += kv[j0 + q] * s;
          }
        }
      }
    }
  });
  require_finite(out, "reassemble");
  return out;
}

template <typename T>
BasicKernelField<T> carafe_generate_kernels(const BasicTensor<T>& input,
                                            const BasicCarafeParams<T>& params,
                                            const UpsampleConfig& config) {
  params.validate(config);
  require_input(input, config, "carafe_generate_kernels");
  const auto compressed = conv2d(input, params.compressor);
  const auto logits = conv2d(compressed, params.kernel_generator);
  return {channel_softmax(pixel_shuffle(logits, config.sigma)), true};
}

template <typename T>
BasicTensor<T> carafe_forward(const BasicTensor<T>& input, const BasicCarafeParams<T>& params,
                              const UpsampleConfig& config) {
  return reassemble(input, carafe_generate_kernels(input, params, config), config);
}

template <typename T>
BasicOffsetField<T> shuffle_offsets(const BasicTensor<T>& raw, int sigma) {
  if (sigma < 1) throw ConfigError("shuffle_offsets: sigma must be >= 1");
  const int s2 = sigma * sigma;
  if (raw.c() != 2 * s2) {
    throw ShapeError("shuffle_offsets: expected " + std::to_string(2 * s2) +
                     " channels, got " + std::to_string(raw.c()));
  }
  const int n = raw.n(), h = raw.h(), w = raw.w();
  BasicTensor<T> out({n, 2, h * sigma, w * sigma});
  for (int b = 0; b < n; ++b) {
    for (int s = 0; s < s2; ++s) {
      const int oy = s / sigma, ox = s % sigma;
      for (int axis = 0; axis < 2; ++axis) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            out(b, axis, sigma * y + oy, sigma * x + ox) = raw(b, 2 * s + axis, y, x);
          }
        }
      }
    }
  }
  return {std::move(out)};
}

template <typename T>
BasicTensor<T> unshuffle_offsets(const BasicTensor<T>& offsets, int sigma) {
  if (sigma < 1) throw ConfigError("unshuffle_offsets: sigma must be >= 1");
  if (offsets.c() != 2 || offsets.h() % sigma != 0 || offsets.w() % sigma != 0) {
    throw ShapeError("unshuffle_offsets: bad offset field " + offsets.shape().str());
  }
  const int s2 = sigma * sigma;
  const int n = offsets.n(), h = offsets.h() / sigma, w = offsets.w() / sigma;
  BasicTensor<T> raw({n, 2 * s2, h, w});
  for (int b = 0; b < n; ++b) {
    for (int s = 0; s < s2; ++s) {
      const int oy = s / sigma, ox = s % sigma;
      for (int axis = 0; axis < 2; ++axis) {
        for (int y = 0; y < h; ++y) {
          for (int x = 0; x < w; ++x) {
            raw(b, 2 * s + axis, y, x) = offsets(b, axis, sigma * y + oy, sigma * x + ox);
          }
        }
      }
    }
  }
  return raw;
}

template <typename T>
BasicKernelField<T> expand_kernel_space(const BasicKernelField<T>& source,
                                        const BasicOffsetField<T>& offsets,
                                        const UpsampleConfig& config) {
  config.validate();
  if (!source.normalized) {
    throw ContractError("expand_kernel_space: source kernel space must be normalized");
  }
  const auto& src = source.kernels;
  const auto& off = offsets.offsets;
  const int sigma = config.sigma;
  const int n = src.n(), taps = src.c(), h = src.h(), w = src.w();
  if (taps != config.taps()) {
    throw ShapeError("expand_kernel_space: source has " + std::to_string(taps) +
                     " channels, expected " + std::to_string(config.taps()));
  }
  const Shape off_shape{n, 2, h * sigma, w * sigma};
  if (off.shape() != off_shape) {
    throw ShapeError("expand_kernel_space: offsets " + off.shape().str() + ", expected " +
                     off_shape.str());
  }
  const int oh = h * sigma, ow = w * sigma;
  BasicTensor<T> out({n, taps, oh, ow});
  detail::count_flops(9ull * taps * static_cast<std::uint64_t>(n) * oh * ow);
  parallel_for(static_cast<std::size_t>(n) * oh, [&](std::size_t task) {
    const int b = static_cast<int>(task / oh);
    const int i = static_cast<int>(task % oh);
    for (int j = 0; j < ow; ++j) {
      const T x = static_cast<T>(j / sigma) + off(b, 0, i, j);
      const T y = static_cast<T>(i / sigma) + off(b, 1, i, j);
      const auto tap = bilinear_tap(x, y, w, h);
      for (int t = 0; t < taps; ++t) {
        const T top = tap.wx * src(b, t, tap.y0, tap.x0) + (1 - tap.wx) * src(b, t, tap.y0, tap.x1);
        const T bot = tap.wx * src(b, t, tap.y1, tap.x0) + (1 - tap.wx) * src(b, t, tap.y1, tap.x1);
        out(b, t, i, j) = tap.wy * top + (1 - tap.wy) * bot;
      }
    }
  });
  require_finite(out, "expand_kernel_space");
  return {std::move(out), true};
}

template <typename T>
BasicDluTrace<T> dlu_trace(const BasicTensor<T>& input, const BasicDluParams<T>& params,
                           const UpsampleConfig& config) {
  params.validate(config);
  require_input(input, config, "dlu");
  BasicDluTrace<T> trace;
  trace.compressed = conv2d(input, params.compressor);
  trace.source = {channel_softmax(conv2d(trace.compressed, params.space_generator)), true};
  trace.raw_offsets = conv2d(trace.compressed, params.offset_predictor);
  trace.offsets = shuffle_offsets(trace.raw_offsets, config.sigma);
  trace.expanded = expand_kernel_space(trace.source, trace.offsets, config);
  return trace;
}

template <typename T>
BasicDluKernels<T> dlu_generate_kernels(const BasicTensor<T>& input,
                                        const BasicDluParams<T>& params,
                                        const UpsampleConfig& config) {
  auto trace = dlu_trace(input, params, config);
  return {std::move(trace.expanded), std::move(trace.offsets), std::move(trace.source)};
}

template <typename T>
BasicTensor<T> dlu_forward(const BasicTensor<T>& input, const BasicDluParams<T>& params,
                           const UpsampleConfig& config) {
  return reassemble(input, dlu_generate_kernels(input, params, config).expanded, config);
}

#define DLU_INSTANTIATE(T)                                                                   \
  template struct BasicCarafeParams<T>;                                                      \
  template struct BasicDluParams<T>;                                                         \
  template BasicTensor<T> nearest_upsample(const BasicTensor<T>&, int);                      \
  template BasicTensor<T> bilinear_upsample(const BasicTensor<T>&, int);                     \
  template BasicTensor<T> reassemble(const BasicTensor<T>&, const BasicKernelField<T>&,      \
                                     const UpsampleConfig&);                                 \
  template BasicKernelField<T> carafe_generate_kernels(                                      \
      const BasicTensor<T>&, const BasicCarafeParams<T>&, const UpsampleConfig&);            \
  template BasicTensor<T> carafe_forward(const BasicTensor<T>&, const BasicCarafeParams<T>&, \
                                         const UpsampleConfig&);                             \
  template BasicOffsetField<T> shuffle_offsets(const BasicTensor<T>&, int);                  \
  template BasicTensor<T> unshuffle_offsets(const BasicTensor<T>&, int);                     \
  template BasicKernelField<T> expand_kernel_space(                                          \
      const BasicKernelField<T>&, const BasicOffsetField<T>&, const UpsampleConfig&);        \
  template BasicDluTrace<T> dlu_trace(const BasicTensor<T>&, const BasicDluParams<T>&,       \
                                      const UpsampleConfig&);                                \
  template BasicDluKernels<T> dlu_generate_kernels(                                          \
      const BasicTensor<T>&, const BasicDluParams<T>&, const UpsampleConfig&);               \
  template BasicTensor<T> dlu_forward(const BasicTensor<T>&, const BasicDluParams<T>&,       \
                                      const UpsampleConfig&);

DLU_INSTANTIATE(float)
DLU_INSTANTIATE(double)
#undef DLU_INSTANTIATE

}  // namespace dlu
