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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "dlu/tensor.hpp"

namespace dlu {

struct CheckReport {
  std::string op;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::size_t num_probes = 0;
  double epsilon = 0.0;
  // Denominator floor of the relative error: |a - n| / max(|a|, |n|, rel_floor).
  double rel_floor = 0.0;
};

struct CheckOptions {
  double epsilon = 1e-5;
  std::size_t min_probes = 200;
  std::uint64_t seed = 0x5eed;
  double rel_floor = 1e-6;
};

// Scalar objective of a flat parameter vector.
using Objective = std::function<double(std::span<const double>)>;

// Compares analytic_grad with central differences (f(p + eps) - f(p - eps)) / 2eps
// on a random subset of at least options.min_probes coordinates (all of
// them when the vector is shorter). theta is restored before returning.
CheckReport finite_diff_check(std::string op, const Objective& objective,
                              std::vector<double> theta, std::span<const double> analytic_grad,
                              const CheckOptions& options = {});

// Same, with the objective split into a forward map and a loss on its output.
CheckReport finite_diff_check(std::string op,
                              const std::function<Tensor(std::span<const double>)>& forward_fn,
                              std::vector<double> theta,
                              const std::function<double(const Tensor&)>& loss_fn,
                              std::span<const double> analytic_grad,
                              const CheckOptions& options = {});

nlohmann::json to_json(const CheckReport& report);

}  // namespace dlu
