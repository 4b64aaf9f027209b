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
#include <string>
#include <string_view>

#include <json.hpp>

#include "dlu/upsampling.hpp"

namespace dlu {

enum class Method { nearest, bilinear, deconv, pixel_shuffle_up, carafe, dlu };
enum class CostScope { kernel_gen_only, full_op };

std::string_view to_string(Method method);
std::string_view to_string(CostScope scope);
Method parse_method(std::string_view name);     // throws ConfigError
CostScope parse_scope(std::string_view name);   // throws ConfigError

// Parameter count plus per-input-pixel FLOPs. The softmax cost stays
// symbolic: softmax_count evaluations of softmax_dim-long vectors.
struct CostReport {
  Method method = Method::nearest;
  UpsampleConfig config;
  std::uint64_t params = 0;
  std::uint64_t flops_numeric = 0;
  std::uint64_t softmax_count = 0;
  int softmax_dim = 0;
  CostScope scope = CostScope::full_op;
};

// Closed-form trainable parameter count.
//   carafe:           (C+1)C_m + (C_m k_enc^2 + 1) sigma^2 k_up^2
//   dlu:              (C+1)C_m + (C_m k_enc^2 + 1) k_up^2 + (C_m k_enc^2 + 1) 2 sigma^2
//   deconv:           (C sigma^2 + 1) C          (sigma x sigma kernel, stride sigma)
//   pixel_shuffle_up: (C k_enc^2 + 1) C sigma^2  (k_enc conv to C sigma^2, then shuffle)
//   nearest/bilinear: 0
std::uint64_t param_count(Method method, const UpsampleConfig& config);

// Per-input-pixel FLOPs. kernel_gen_only covers the kernel generation module
// (zero for methods without one); full_op adds the upsampling itself:
//   carafe/dlu reassembly:   2 k_up^2 C sigma^2
//   bilinear:                9 C sigma^2 (9 FLOPs per blended value, as in the DLU expander)
//   deconv:                  2 (C k_enc^2 + 1) C
//   pixel_shuffle_up:        2 (C k_enc^2 + 1) C sigma^2
CostReport flop_count(Method method, const UpsampleConfig& config, CostScope scope);

// Counts every allocated weight and bias scalar.
template <typename T>
std::uint64_t audit_params(const BasicCarafeParams<T>& params);
template <typename T>
std::uint64_t audit_params(const BasicDluParams<T>& params);

struct MeasuredFlops {
  std::uint64_t total_flops = 0;
  std::uint64_t pixels = 0;
  std::uint64_t flops_per_pixel = 0;
  std::uint64_t softmax_per_pixel = 0;
  int softmax_dim = 0;
};

// Runs the operator on a seeded 1 x C x h x w input under a FlopCounterScope
// and normalizes by the input pixel count. deconv and pixel_shuffle_up have
// no operator here and raise ConfigError.
MeasuredFlops measure_flops(Method method, const UpsampleConfig& config, int height = 8,
                            int width = 8, std::uint64_t seed = 1);

// "0", "9K", "35K", "3.7M": values of a million or more get one rounded
// decimal and an M suffix; thousands are truncated to whole K.
std::string display_count(std::uint64_t value);
// Numeric part followed by "+N×(D-D sm)" when softmax terms are present.
std::string display_flops(const CostReport& report);

// Numeric estimate of the symbolic softmax term, flops_per_element FLOPs per
// vector entry. Never folded into flops_numeric.
double softmax_flops_estimate(const CostReport& report, double flops_per_element = 3.0);

nlohmann::json to_json(const CostReport& report);
std::string cost_csv_header();
std::string to_csv_row(const CostReport& report);

}  // namespace dlu
