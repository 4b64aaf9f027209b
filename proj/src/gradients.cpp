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

#include "dlu/gradients.hpp"

#include <algorithm>
#include <mutex>
#include <string>

#include "dlu/parallel.hpp"

namespace dlu {
namespace {

std::mutex g_fault_mutex;
std::string g_fault_op;

bool fault_active(std::string_view op) {
  std::lock_guard lock(g_fault_mutex);
  return !g_fault_op.empty() && g_fault_op == op;
}

template <typename T>
void negate(BasicTensor<T>& t) {
  for (auto& v : t.data()) v = -v;
}

template <typename T>
void negate(BasicConvSpec<T>& spec) {
  negate(spec.weights);
  for (auto& v : spec.bias) v = -v;
}

template <typename T>
void require_same(const Shape& got, const Shape& expected, const char* what) {
  if (got != expected) {
    throw ShapeError(std::string(what) + ": gradient shape " + got.str() + ", expected " +
                     expected.str());
  }
}

}  // namespace

namespace testing {

void inject_gradient_sign_fault(std::string_view op) {
  std::lock_guard lock(g_fault_mutex);
  g_fault_op = std::string(op);
}

std::string injected_gradient_sign_fault() {
  std::lock_guard lock(g_fault_mutex);
  return g_fault_op;
}

}  // namespace testing

template <typename T>
bool BasicGradBundle<T>::all_finite() const {
  if (!d_input.all_finite() || !d_offsets.all_finite()) return false;
  for (const auto& p : d_params) {
    if (!p.weights.all_finite()) return false;
    for (T b : p.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

template <typename T>
ConvBackward<T> conv2d_backward(const BasicTensor<T>& input, const BasicConvSpec<T>& spec,
                                const BasicTensor<T>& d_output) {
  spec.validate();
  if (input.c() != spec.in_channels) throw ShapeError("conv2d_backward: channel mismatch");
  const int n = input.n(), h = input.h(), w = input.w();
  const int k = spec.kernel_size, pad = spec.padding();
  const int cin = spec.in_channels, cout = spec.out_channels;
  require_same<T>(d_output.shape(), {n, cout, h, w}, "conv2d_backward");

  ConvBackward<T> result{BasicTensor<T>(input.shape()),
                         BasicConvSpec<T>::zeros(cin, cout, k)};
  auto& d_spec = result.d_spec;

  parallel_for(static_cast<std::size_t>(cout), [&](std::size_t task) {
    const int oc = static_cast<int>(task);
    T acc = 0;
    for (int b = 0; b < n; ++b) {
      const T* g = d_output.plane(b, oc);
      for (std::size_t p = 0; p < static_cast<std::size_t>(h) * w; ++p) acc += g[p];
    }
    d_spec.bias[oc] = acc;
  });

  parallel_for(static_cast<std::size_t>(cout) * cin, [&](std::size_t task) {
    const int oc = static_cast<int>(task / cin);
    const int ic = static_cast<int>(task % cin);
    for (int ky = 0; ky < k; ++ky) {
      const int dy = ky - pad;
      const int y_begin = std::max(0, -dy), y_end = std::min(h, h - dy);
      for (int kx = 0; kx < k; ++kx) {
        const int dx = kx - pad;
        const int x_begin = std::max(0, -dx), x_end = std::min(w, w - dx);
        T acc = 0;
        for (int b = 0; b < n; ++b) {
          const T* g = d_output.plane(b, oc);
          const T* src = input.plane(b, ic);
          for (int y = y_begin; y < y_end; ++y) {
            const T* grow = g + static_cast<std::size_t>(y) * w;
            const T* srow = src + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x_begin; x < x_end; ++x) acc += grow[x] * srow[x];
          }
        }
        d_spec.weights(oc, ic, ky, kx) = acc;
      }
    }
  });

  // d_input is gathered per input plane, so no two tasks touch the same element.
  auto& d_input = result.d_input;
  parallel_for(static_cast<std::size_t>(n) * cin, [&](std::size_t task) {
    const int b = static_cast<int>(task / cin);
    const int ic = static_cast<int>(task % cin);
    T* dst = d_input.plane(b, ic);
    for (int oc = 0; oc < cout; ++oc) {
      const T* g = d_output.plane(b, oc);
      for (int ky = 0; ky < k; ++ky) {
        const int dy = ky - pad;
        const int y_begin = std::max(0, -dy), y_end = std::min(h, h - dy);
        for (int kx = 0; kx < k; ++kx) {
          const int dx = kx - pad;
          const int x_begin = std::max(0, -dx), x_end = std::min(w, w - dx);
          const T wgt = spec.weights(oc, ic, ky, kx);
          for (int y = y_begin; y < y_end; ++y) {
            const T* grow = g + static_cast<std::size_t>(y) * w;
            T* drow = dst + static_cast<std::size_t>(y + dy) * w + dx;
            for (int x = x_begin; x < x_end; ++x) drow[x] += wgt * grow[x];
          }
        }
      }
    }
  });

  if (fault_active("conv2d")) {
    negate(result.d_input);
    negate(result.d_spec);
  }
  return result;
}

template <typename T>
BasicTensor<T> softmax_backward(const BasicTensor<T>& output, const BasicTensor<T>& d_output) {
  require_same<T>(d_output.shape(), output.shape(), "softmax_backward");
  const int n = output.n(), c = output.c();
  const std::size_t hw = static_cast<std::size_t>(output.h()) * output.w();
  BasicTensor<T> d_input(output.shape());
  parallel_for(static_cast<std::size_t>(n) * hw, [&](std::size_t task) {
    const int b = static_cast<int>(task / hw);
    const std::size_t p = task % hw;
    const T* y = output.plane(b, 0) + p;
    const T* g = d_output.plane(b, 0) + p;
    T* dst = d_input.plane(b, 0) + p;
    T dot = 0;
    for (int ch = 0; ch < c; ++ch) dot += y[ch * hw] * g[ch * hw];
    for (int ch = 0; ch < c; ++ch) dst[ch * hw] = y[ch * hw] * (g[ch * hw] - dot);
  }, 64);
  if (fault_active("softmax")) negate(d_input);
  return d_input;
}

template <typename T>
ReassembleBackward<T> reassemble_backward(const BasicTensor<T>& input,
                                          const BasicKernelField<T>& kernels,
                                          const BasicTensor<T>& d_output,
                                          const UpsampleConfig& config) {
  config.validate();
  const int sigma = config.sigma, k = config.k_up, r = config.radius();
  const int n = input.n(), c = input.c(), h = input.h(), w = input.w();
  const int oh = h * sigma, ow = w * sigma;
  const auto& kt = kernels.kernels;
  require_same<T>(kt.shape(), {n, config.taps(), oh, ow}, "reassemble_backward kernels");
  require_same<T>(d_output.shape(), {n, c, oh, ow}, "reassemble_backward");
  const std::size_t kplane = static_cast<std::size_t>(oh) * ow;

  ReassembleBackward<T> result{BasicTensor<T>(input.shape()), BasicTensor<T>(kt.shape())};

  auto& d_kernels = result.d_kernels;
  parallel_for(static_cast<std::size_t>(n) * oh, [&](std::size_t task) {
    const int b = static_cast<int>(task / oh);
    const int i = static_cast<int>(task % oh);
    const int cy = i / sigma;
    for (int j = 0; j < ow; ++j) {
      const int cx = j / sigma;
      for (int u = -r; u <= r; ++u) {
        const int y = cy + u;
        for (int v = -r; v <= r; ++v) {
          const int x = cx + v;
          T acc = 0;
          if (y >= 0 && y < h && x >= 0 && x < w) {
            for (int ch = 0; ch < c; ++ch) acc += d_output(b, ch, i, j) * input(b, ch, y, x);
          }
          d_kernels(b, (u + r) * k + (v + r), i, j) = acc;
        }
      }
    }
  });

  // Input pixel (y, x) receives from every output pixel whose window
  // centre is (y - u, x - v).
  auto& d_input = result.d_input;
  parallel_for(static_cast<std::size_t>(n) * c, [&](std::size_t task) {
    const int b = static_cast<int>(task / c);
    const int ch = static_cast<int>(task % c);
    const T* g = d_output.plane(b, ch);
    const T* kern = kt.plane(b, 0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        T acc = 0;
        for (int u = -r; u <= r; ++u) {
          const int cy = y - u;
          if (cy < 0 || cy >= h) continue;
          for (int v = -r; v <= r; ++v) {
            const int cx = x - v;
            if (cx < 0 || cx >= w) continue;
            const T* ktap = kern + static_cast<std::size_t>((u + r) * k + (v + r)) * kplane;
            for (int si = 0; si < sigma; ++si) {
              const std::size_t row = static_cast<std::size_t>(cy * sigma + si) * ow;
              for (int sj = 0; sj < sigma; ++sj) {
                const std::size_t idx = row + static_cast<std::size_t>(cx * sigma + sj);
                acc += ktap[idx] * g[idx];
              }
            }
          }
        }
        d_input(b, ch, y, x) = acc;
      }
    }
  });

  if (fault_active("reassemble")) {
    negate(result.d_input);
    negate(result.d_kernels);
  }
  return result;
}

template <typename T>
ExpandBackward<T> expand_backward(const BasicKernelField<T>& source,
                                  const BasicOffsetField<T>& offsets,
                                  const BasicTensor<T>& d_expanded,
                                  const UpsampleConfig& config) {
  config.validate();
  const auto& src = source.kernels;
  const auto& off = offsets.offsets;
  const int sigma = config.sigma;
  const int n = src.n(), taps = src.c(), h = src.h(), w = src.w();
  const int oh = h * sigma, ow = w * sigma;
  require_same<T>(off.shape(), {n, 2, oh, ow}, "expand_backward offsets");
  require_same<T>(d_expanded.shape(), {n, taps, oh, ow}, "expand_backward");

  ExpandBackward<T> result{BasicTensor<T>(src.shape()), BasicTensor<T>(off.shape())};
  const std::size_t opix = static_cast<std::size_t>(oh) * ow;
  std::vector<BilinearTap<T>> stencils(static_cast<std::size_t>(n) * opix);

  auto& d_off = result.d_offsets;
  parallel_for(static_cast<std::size_t>(n) * oh, [&](std::size_t task) {
    const int b = static_cast<int>(task / oh);
    const int i = static_cast<int>(task % oh);
    for (int j = 0; j < ow; ++j) {
      const T x = static_cast<T>(j / sigma) + off(b, 0, i, j);
      const T y = static_cast<T>(i / sigma) + off(b, 1, i, j);
      const auto tap = bilinear_tap(x, y, w, h);
      stencils[static_cast<std::size_t>(b) * opix + static_cast<std::size_t>(i) * ow + j] = tap;

      // Columns / rows spanning the cell used for the derivative.
      int xa = tap.x0, xb = tap.x1, ya = tap.y0, yb = tap.y1;
      bool x_flat = tap.x_clamped, y_flat = tap.y_clamped;
      if (!x_flat && xa == xb) {
        if (xa + 1 < w) ++xb; else x_flat = true;
      }
      if (!y_flat && ya == yb) {
        if (ya + 1 < h) ++yb; else y_flat = true;
      }
      T gx = 0, gy = 0;
      for (int t = 0; t < taps; ++t) {
        const T g = d_expanded(b, t, i, j);
        if (g == T{0}) continue;
        if (!x_flat) {
          const T slope = tap.wy * (src(b, t, tap.y0, xb) - src(b, t, tap.y0, xa)) +
                          (1 - tap.wy) * (src(b, t, tap.y1, xb) - src(b, t, tap.y1, xa));
          gx += g * slope;
        }
        if (!y_flat) {
          const T slope = tap.wx * (src(b, t, yb, tap.x0) - src(b, t, ya, tap.x0)) +
                          (1 - tap.wx) * (src(b, t, yb, tap.x1) - src(b, t, ya, tap.x1));
          gy += g * slope;
        }
      }
      d_off(b, 0, i, j) = gx;
      d_off(b, 1, i, j) = gy;
    }
  });

  // Each (b, t) plane of d_source is owned by one task and visits output
  // pixels in raster order.
  auto& d_src = result.d_source;
  parallel_for(static_cast<std::size_t>(n) * taps, [&](std::size_t task) {
    const int b = static_cast<int>(task / taps);
    const int t = static_cast<int>(task % taps);
    const T* g = d_expanded.plane(b, t);
    for (std::size_t p = 0; p < opix; ++p) {
      const T gv = g[p];
      if (gv == T{0}) continue;
      const auto& tap = stencils[static_cast<std::size_t>(b) * opix + p];
      d_src(b, t, tap.y0, tap.x0) += gv * tap.wy * tap.wx;
      d_src(b, t, tap.y0, tap.x1) += gv * tap.wy * (1 - tap.wx);
      d_src(b, t, tap.y1, tap.x0) += gv * (1 - tap.wy) * tap.wx;
      d_src(b, t, tap.y1, tap.x1) += gv * (1 - tap.wy) * (1 - tap.wx);
    }
  });

  if (fault_active("expand")) {
    negate(result.d_source);
    negate(result.d_offsets);
  }
  return result;
}

template <typename T>
BasicGradBundle<T> dlu_backward(const BasicTensor<T>& input, const BasicDluParams<T>& params,
                                const UpsampleConfig& config, const BasicTensor<T>& d_output) {
  return dlu_backward(dlu_trace(input, params, config), input, params, config, d_output);
}

template <typename T>
BasicGradBundle<T> dlu_backward(const BasicDluTrace<T>& trace, const BasicTensor<T>& input,
                                const BasicDluParams<T>& params, const UpsampleConfig& config,
                                const BasicTensor<T>& d_output) {
  params.validate(config);
  auto reasm = reassemble_backward(input, trace.expanded, d_output, config);
  auto expand = expand_backward(trace.source, trace.offsets, reasm.d_kernels, config);

  const auto d_raw_offsets = unshuffle_offsets(expand.d_offsets, config.sigma);
  auto offset_back = conv2d_backward(trace.compressed, params.offset_predictor, d_raw_offsets);

  const auto d_logits = softmax_backward(trace.source.kernels, expand.d_source);
  auto space_back = conv2d_backward(trace.compressed, params.space_generator, d_logits);

  auto d_compressed = std::move(space_back.d_input);
  add_inplace(d_compressed, offset_back.d_input);
  auto comp_back = conv2d_backward(input, params.compressor, d_compressed);

  BasicGradBundle<T> bundle;
  bundle.d_input = std::move(reasm.d_input);
  add_inplace(bundle.d_input, comp_back.d_input);
  bundle.d_params.push_back(std::move(comp_back.d_spec));
  bundle.d_params.push_back(std::move(space_back.d_spec));
  bundle.d_params.push_back(std::move(offset_back.d_spec));
  bundle.d_offsets = std::move(expand.d_offsets);

  if (fault_active("dlu")) {
    negate(bundle.d_input);
    for (auto& p : bundle.d_params) negate(p);
    negate(bundle.d_offsets);
  }
  return bundle;
}

template <typename T>
BasicGradBundle<T> carafe_backward(const BasicTensor<T>& input,
                                   const BasicCarafeParams<T>& params,
                                   const UpsampleConfig& config,
                                   const BasicTensor<T>& d_output) {
  params.validate(config);
  const auto compressed = conv2d(input, params.compressor);
  const auto logits = conv2d(compressed, params.kernel_generator);
  const BasicKernelField<T> kernels{channel_softmax(pixel_shuffle(logits, config.sigma)), true};

  auto reasm = reassemble_backward(input, kernels, d_output, config);
  const auto d_shuffled = softmax_backward(kernels.kernels, reasm.d_kernels);
  const auto d_logits = pixel_unshuffle(d_shuffled, config.sigma);
  auto gen_back = conv2d_backward(compressed, params.kernel_generator, d_logits);
  auto comp_back = conv2d_backward(input, params.compressor, gen_back.d_input);

  BasicGradBundle<T> bundle;
  bundle.d_input = std::move(reasm.d_input);
  add_inplace(bundle.d_input, comp_back.d_input);
  bundle.d_params.push_back(std::move(comp_back.d_spec));
  bundle.d_params.push_back(std::move(gen_back.d_spec));

  if (fault_active("carafe")) {
    negate(bundle.d_input);
    for (auto& p : bundle.d_params) negate(p);
  }
  return bundle;
}

#define DLU_INSTANTIATE(T)                                                                     \
  template struct BasicGradBundle<T>;                                                          \
  template ConvBackward<T> conv2d_backward(const BasicTensor<T>&, const BasicConvSpec<T>&,     \
                                           const BasicTensor<T>&);                             \
  template BasicTensor<T> softmax_backward(const BasicTensor<T>&, const BasicTensor<T>&);      \
  template ReassembleBackward<T> reassemble_backward(                                          \
      const BasicTensor<T>&, const BasicKernelField<T>&, const BasicTensor<T>&,                \
      const UpsampleConfig&);                                                                  \
  template ExpandBackward<T> expand_backward(const BasicKernelField<T>&,                       \
                                             const BasicOffsetField<T>&,                       \
                                             const BasicTensor<T>&, const UpsampleConfig&);    \
  template BasicGradBundle<T> dlu_backward(const BasicTensor<T>&, const BasicDluParams<T>&,    \
                                           const UpsampleConfig&, const BasicTensor<T>&);      \
  template BasicGradBundle<T> dlu_backward(const BasicDluTrace<T>&, const BasicTensor<T>&,     \
                                           const BasicDluParams<T>&, const UpsampleConfig&,    \
                                           const BasicTensor<T>&);                             \
  template BasicGradBundle<T> carafe_backward(const BasicTensor<T>&,                           \
                                              const BasicCarafeParams<T>&,                     \
                                              const UpsampleConfig&, const BasicTensor<T>&);

DLU_INSTANTIATE(float)
DLU_INSTANTIATE(double)
#undef DLU_INSTANTIATE

}  // namespace dlu
