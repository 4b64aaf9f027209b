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
#include <vector>

#include <json.hpp>

#include "dlu/finite_diff.hpp"
#include "dlu/upsampling.hpp"

namespace dlu {

// Gradient and invariant checks run by `dlu check` and the acceptance suite.
struct CheckSuiteConfig {
  UpsampleConfig config{2, 3, 3, 4, 3};
  int batch = 2;
  int height = 5;
  int width = 5;
  std::uint64_t seed = 1;
  double epsilon = 1e-5;
  std::size_t probes = 200;
  double rel_floor = 1e-3;
  double single_op_tolerance = 1e-6;
  double end_to_end_tolerance = 1e-4;
  int normalization_samples = 1000;  // sampled output locations per property run
};

struct GradientCheck {
  CheckReport report;
  double tolerance = 0.0;
  bool passed = false;
};

struct PropertyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckSuiteResult {
  std::vector<GradientCheck> gradients;
  std::vector<PropertyCheck> properties;

  bool passed() const;
  std::vector<std::string> failures() const;
  nlohmann::json to_json() const;
};

// Individual gradient checks, exposed for the tests.
GradientCheck check_conv2d_gradient(const CheckSuiteConfig& cfg);
GradientCheck check_softmax_gradient(const CheckSuiteConfig& cfg);
GradientCheck check_reassemble_gradient(const CheckSuiteConfig& cfg);
GradientCheck check_expand_gradient(const CheckSuiteConfig& cfg);
GradientCheck check_dlu_gradient(const CheckSuiteConfig& cfg);
GradientCheck check_carafe_gradient(const CheckSuiteConfig& cfg);

// Worst-case deviation of sampled expanded kernels from the simplex, for
// normalized random sources and unbounded random offsets.
struct NormalizationStats {
  std::size_t locations = 0;
  double max_sum_error = 0.0;
  double min_entry = 0.0;
};
NormalizationStats expanded_normalization_stats(const UpsampleConfig& config, int height,
                                                int width, int locations, std::uint64_t seed);

CheckSuiteResult run_check_suite(const CheckSuiteConfig& cfg);

// Offsets whose sampling coordinates stay at least `margin` away from
// integers, so central differences never straddle a bilinear kink.
Tensor kink_free_offsets(Rng& rng, Shape shape, int sigma, double spread, double margin = 1e-3);

// Distance from the closest sampling coordinate to an integer.
double min_kink_distance(const Tensor& offsets, int sigma);

}  // namespace dlu
