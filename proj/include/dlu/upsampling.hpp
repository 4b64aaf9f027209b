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

#include <array>
#include <cstddef>
#include <string>

#include "dlu/tensor_ops.hpp"

namespace dlu {

// Hyper-parameters shared by the CARAFE and DLU operators. Defaults are the
// configuration used throughout the detection experiments.
struct UpsampleConfig {
  int sigma = 2;      // upsampling ratio
  int k_up = 5;       // reassembly kernel side
  int k_encoder = 3;  // kernel side of the generator / offset convolutions
  int c_mid = 64;     // channels after the 1x1 compressor
  int c_in = 256;     // input channels

  int radius() const { return (k_up - 1) / 2; }
  int taps() const { return k_up * k_up; }
  // Throws ConfigError for sigma < 1, even kernel sides or empty channels.
  void validate() const;
  std::string str() const;
};

// k_up^2 reassembly weights per spatial location, row-major over the
// (u, v) window: channel (u + r) * k_up + (v + r).
template <typename T>
struct BasicKernelField {
  BasicTensor<T> kernels;
  bool normalized = false;
};

// Per-output-pixel sampling displacement in source-grid pixels.
// Channel 0 is the width-axis offset, channel 1 the height-axis offset.
template <typename T>
struct BasicOffsetField {
  BasicTensor<T> offsets;
};

template <typename T>
struct BasicCarafeParams {
  BasicConvSpec<T> compressor;        // C -> C_m, 1x1
  BasicConvSpec<T> kernel_generator;  // C_m -> sigma^2 k_up^2, k_encoder

  static constexpr std::size_t kLayers = 2;
  static constexpr std::array<const char*, kLayers> kLayerNames{"compressor",
                                                               "kernel_generator"};

  // Zero-filled layers with the geometry implied by config.
  static BasicCarafeParams zeros(const UpsampleConfig& config);
  std::array<BasicConvSpec<T>*, kLayers> layers() { return {&compressor, &kernel_generator}; }
  std::array<const BasicConvSpec<T>*, kLayers> layers() const {
    return {&compressor, &kernel_generator};
  }
  void validate(const UpsampleConfig& config) const;
};

template <typename T>
struct BasicDluParams {
  BasicConvSpec<T> compressor;        // C -> C_m, 1x1
  BasicConvSpec<T> space_generator;   // C_m -> k_up^2, k_encoder
  BasicConvSpec<T> offset_predictor;  // C_m -> 2 sigma^2, k_encoder

  static constexpr std::size_t kLayers = 3;
  static constexpr std::array<const char*, kLayers> kLayerNames{
      "compressor", "space_generator", "offset_predictor"};

  static BasicDluParams zeros(const UpsampleConfig& config);
  std::array<BasicConvSpec<T>*, kLayers> layers() {
    return {&compressor, &space_generator, &offset_predictor};
  }
  std::array<const BasicConvSpec<T>*, kLayers> layers() const {
    return {&compressor, &space_generator, &offset_predictor};
  }
  void validate(const UpsampleConfig& config) const;
};

using KernelField = BasicKernelField<double>;
using OffsetField = BasicOffsetField<double>;
using CarafeParams = BasicCarafeParams<double>;
using DluParams = BasicDluParams<double>;

// output(i, j) = input(floor(i / sigma), floor(j / sigma)).
template <typename T>
BasicTensor<T> nearest_upsample(const BasicTensor<T>& input, int sigma);

// Half-pixel centres: output (i, j) samples the source at
// ((j + 0.5) / sigma - 0.5, (i + 0.5) / sigma - 0.5), clamped.
template <typename T>
BasicTensor<T> bilinear_upsample(const BasicTensor<T>& input, int sigma);

// Dynamic reassembly. Each output pixel (i, j) takes the inner product of
// its kernel with the k_up x k_up neighbourhood of input pixel
// (floor(i / sigma), floor(j / sigma)); taps outside the input read zero.
// The kernel is shared by all channels.
template <typename T>
BasicTensor<T> reassemble(const BasicTensor<T>& input, const BasicKernelField<T>& kernels,
                          const UpsampleConfig& config);

template <typename T>
BasicKernelField<T> carafe_generate_kernels(const BasicTensor<T>& input,
                                            const BasicCarafeParams<T>& params,
                                            const UpsampleConfig& config);

template <typename T>
BasicTensor<T> carafe_forward(const BasicTensor<T>& input, const BasicCarafeParams<T>& params,
                              const UpsampleConfig& config);

// Raw predictor output (n, 2 sigma^2, h, w) -> offset field (n, 2, sigma h, sigma w).
// Channel pair (2s, 2s + 1) becomes (dx, dy) of sub-position s, which sits at
// (sigma y + s / sigma, sigma x + s % sigma), the pixel_shuffle convention.
template <typename T>
BasicOffsetField<T> shuffle_offsets(const BasicTensor<T>& raw, int sigma);

// Inverse of shuffle_offsets (also its adjoint, being a permutation).
template <typename T>
BasicTensor<T> unshuffle_offsets(const BasicTensor<T>& offsets, int sigma);

// Samples one kernel per output pixel from the normalized source space:
// output (i, j) is the bilinear sample at
// (floor(j / sigma) + dx(i, j), floor(i / sigma) + dy(i, j)) across all
// k_up^2 channels. Convex interpolation weights keep every sampled kernel
// normalized, so the result is flagged normalized without re-normalizing.
template <typename T>
BasicKernelField<T> expand_kernel_space(const BasicKernelField<T>& source,
                                        const BasicOffsetField<T>& offsets,
                                        const UpsampleConfig& config);

// All DLU intermediates of one forward pass.
template <typename T>
struct BasicDluTrace {
  BasicTensor<T> compressed;
  BasicKernelField<T> source;    // (n, k_up^2, h, w), normalized
  BasicTensor<T> raw_offsets;    // (n, 2 sigma^2, h, w)
  BasicOffsetField<T> offsets;   // (n, 2, sigma h, sigma w)
  BasicKernelField<T> expanded;  // (n, k_up^2, sigma h, sigma w)
};

template <typename T>
struct BasicDluKernels {
  BasicKernelField<T> expanded;
  BasicOffsetField<T> offsets;
  BasicKernelField<T> source;
};

template <typename T>
BasicDluTrace<T> dlu_trace(const BasicTensor<T>& input, const BasicDluParams<T>& params,
                           const UpsampleConfig& config);

template <typename T>
BasicDluKernels<T> dlu_generate_kernels(const BasicTensor<T>& input,
                                        const BasicDluParams<T>& params,
                                        const UpsampleConfig& config);

template <typename T>
BasicTensor<T> dlu_forward(const BasicTensor<T>& input, const BasicDluParams<T>& params,
                           const UpsampleConfig& config);

}  // namespace dlu
