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

#include "dlu/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dlu/rng.hpp"

namespace dlu {

CheckReport finite_diff_check(std::string op, const Objective& objective,
                              std::vector<double> theta, std::span<const double> analytic_grad,
                              const CheckOptions& options) {
  if (analytic_grad.size() != theta.size()) {
    throw ShapeError("finite_diff_check: gradient length " +
                     std::to_string(analytic_grad.size()) + " vs parameter length " +
                     std::to_string(theta.size()));
  }
  if (!(options.epsilon > 0.0)) throw ConfigError("finite_diff_check: epsilon must be positive");

  std::vector<std::size_t> probes(theta.size());
  std::iota(probes.begin(), probes.end(), std::size_t{0});
  if (probes.size() > options.min_probes) {
    // Partial Fisher-Yates: the first min_probes entries become the sample.
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.min_probes; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(probes.size() - i));
      std::swap(probes[i], probes[j]);
    }
    probes.resize(options.min_probes);
  }

  CheckReport report;
  report.op = std::move(op);
  report.epsilon = options.epsilon;
  report.rel_floor = options.rel_floor;
  report.num_probes = probes.size();
  for (const std::size_t idx : probes) {
    const double saved = theta[idx];
    theta[idx] = saved + options.epsilon;
    const double up = objective(theta);
    theta[idx] = saved - options.epsilon;
    const double down = objective(theta);
    theta[idx] = saved;
    const double numeric = (up - down) / (2.0 * options.epsilon);
    const double analytic = analytic_grad[idx];
    const double abs_err = std::abs(numeric - analytic);
    const double scale = std::max({std::abs(numeric), std::abs(analytic), options.rel_floor});
    report.max_abs_err = std::max(report.max_abs_err, abs_err);
    report.max_rel_err = std::max(report.max_rel_err, abs_err / scale);
  }
  return report;
}

CheckReport finite_diff_check(std::string op,
                              const std::function<Tensor(std::span<const double>)>& forward_fn,
                              std::vector<double> theta,
                              const std::function<double(const Tensor&)>& loss_fn,
                              std::span<const double> analytic_grad,
                              const CheckOptions& options) {
  const Objective objective = [&](std::span<const double> p) { return loss_fn(forward_fn(p)); };
  return finite_diff_check(std::move(op), objective, std::move(theta), analytic_grad, options);
}

nlohmann::json to_json(const CheckReport& report) {
  return {{"op", report.op},
          {"max_abs_err", report.max_abs_err},
          {"max_rel_err", report.max_rel_err},
          {"num_probes", report.num_probes},
          {"epsilon", report.epsilon},
          {"rel_floor", report.rel_floor}};
}

}  // namespace dlu
