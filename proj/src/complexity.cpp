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

#include "dlu/complexity.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "dlu/flop_counter.hpp"
#include "dlu/rng.hpp"

namespace dlu {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::nearest: return "nearest";
    case Method::bilinear: return "bilinear";
    case Method::deconv: return "deconv";
    case Method::pixel_shuffle_up: return "pixel_shuffle_up";
    case Method::carafe: return "carafe";
    case Method::dlu: return "dlu";
  }
  return "unknown";
}

std::string_view to_string(CostScope scope) {
  return scope == CostScope::full_op ? "full_op" : "kernel_gen_only";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::nearest, Method::bilinear, Method::deconv, Method::pixel_shuffle_up,
                   Method::carafe, Method::dlu}) {
    if (name == to_string(m)) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

CostScope parse_scope(std::string_view name) {
  if (name == "full_op") return CostScope::full_op;
  if (name == "kernel_gen_only") return CostScope::kernel_gen_only;
  throw ConfigError("unknown cost scope '" + std::string(name) + "'");
}

namespace {

struct Terms {
  std::uint64_t c, cm, ke2, ku2, s2;
};

Terms terms(const UpsampleConfig& config) {
  config.validate();
  const auto u = [](int v) { return static_cast<std::uint64_t>(v); };
  return {u(config.c_in), u(config.c_mid), u(config.k_encoder) * u(config.k_encoder),
          u(config.k_up) * u(config.k_up), u(config.sigma) * u(config.sigma)};
}

}  // namespace

std::uint64_t param_count(Method method, const UpsampleConfig& config) {
  const auto [c, cm, ke2, ku2, s2] = terms(config);
  const std::uint64_t compressor = (c + 1) * cm;
  const std::uint64_t encoder = cm * ke2 + 1;
  switch (method) {
    case Method::nearest:
    case Method::bilinear: return 0;
    case Method::deconv: return (c * s2 + 1) * c;
    case Method::pixel_shuffle_up: return (c * ke2 + 1) * c * s2;
    case Method::carafe: return compressor + encoder * s2 * ku2;
    case Method::dlu: return compressor + encoder * ku2 + encoder * 2 * s2;
  }
  throw ConfigError("param_count: unknown method");
}

CostReport flop_count(Method method, const UpsampleConfig& config, CostScope scope) {
  const auto [c, cm, ke2, ku2, s2] = terms(config);
  CostReport report;
  report.method = method;
  report.config = config;
  report.scope = scope;
  report.params = param_count(method, config);

  const std::uint64_t compressor = 2 * (c + 1) * cm;
  const std::uint64_t encoder = 2 * (cm * ke2 + 1);
  std::uint64_t kernel_gen = 0;
  std::uint64_t upsample = 0;
  switch (method) {
    case Method::nearest: break;
    case Method::bilinear: upsample = 9 * c * s2; break;
    case Method::deconv: upsample = 2 * (c * ke2 + 1) * c; break;
    case Method::pixel_shuffle_up: upsample = 2 * (c * ke2 + 1) * c * s2; break;
    case Method::carafe:
      kernel_gen = compressor + encoder * s2 * ku2;
      report.softmax_count = s2;
      report.softmax_dim = static_cast<int>(ku2);
      upsample = 2 * ku2 * c * s2;
      break;
    case Method::dlu:
      kernel_gen = compressor + encoder * ku2 + encoder * 2 * s2 + 9 * s2 * ku2;
      report.softmax_count = 1;
      report.softmax_dim = static_cast<int>(ku2);
      upsample = 2 * ku2 * c * s2;
      break;
  }
  report.flops_numeric = scope == CostScope::full_op ? kernel_gen + upsample : kernel_gen;
  return report;
}

template <typename T>
std::uint64_t audit_params(const BasicCarafeParams<T>& params) {
  std::uint64_t total = 0;
  for (const auto* layer : params.layers()) total += layer->weights.size() + layer->bias.size();
  return total;
}

template <typename T>
std::uint64_t audit_params(const BasicDluParams<T>& params) {
  std::uint64_t total = 0;
  for (const auto* layer : params.layers()) total += layer->weights.size() + layer->bias.size();
  return total;
}

template std::uint64_t audit_params(const BasicCarafeParams<float>&);
template std::uint64_t audit_params(const BasicCarafeParams<double>&);
template std::uint64_t audit_params(const BasicDluParams<float>&);
template std::uint64_t audit_params(const BasicDluParams<double>&);

namespace {

template <typename Params>
void randomize(Params& params, Rng& rng) {
  for (auto* layer : params.layers()) {
    layer->weights = random_gaussian<double>(rng, layer->weights.shape(), 0.0, 0.05);
    for (auto& b : layer->bias) b = rng.uniform(-0.1, 0.1);
  }
}

}  // namespace

MeasuredFlops measure_flops(Method method, const UpsampleConfig& config, int height, int width,
                            std::uint64_t seed) {
  config.validate();
  if (height < 1 || width < 1) throw ConfigError("measure_flops: empty input");
  Rng rng(seed);
  const Tensor input = random_uniform<double>(rng, {1, config.c_in, height, width}, 0.0, 1.0);
  FlopTally tally;
  switch (method) {
    case Method::nearest: {
      FlopCounterScope scope(tally);
      (void)nearest_upsample(input, config.sigma);
      break;
    }
    case Method::bilinear: {
      FlopCounterScope scope(tally);
      (void)bilinear_upsample(input, config.sigma);
      break;
    }
    case Method::carafe: {
      auto params = CarafeParams::zeros(config);
      randomize(params, rng);
      FlopCounterScope scope(tally);
      (void)carafe_forward(input, params, config);
      break;
    }
    case Method::dlu: {
      auto params = DluParams::zeros(config);
      randomize(params, rng);
      FlopCounterScope scope(tally);
      (void)dlu_forward(input, params, config);
      break;
    }
    case Method::deconv:
    case Method::pixel_shuffle_up:
      throw ConfigError("measure_flops: no operator implementation for " +
                        std::string(to_string(method)));
  }

  MeasuredFlops out;
  out.total_flops = tally.flops;
  out.pixels = static_cast<std::uint64_t>(height) * width;
  out.flops_per_pixel = tally.flops / out.pixels;
  if (tally.flops % out.pixels != 0) {
    throw ContractError("measure_flops: FLOP total is not a whole number per pixel");
  }
  if (tally.softmax_by_dim.size() > 1) {
    throw ContractError("measure_flops: softmax evaluated over mixed vector lengths");
  }
  if (!tally.softmax_by_dim.empty()) {
    const auto& [dim, count] = *tally.softmax_by_dim.begin();
    out.softmax_dim = dim;
    out.softmax_per_pixel = count / out.pixels;
  }
  return out;
}

std::string display_count(std::uint64_t value) {
  char buf[32];
  if (value >= 1'000'000) {
    // Round half up to one decimal, in integer arithmetic.
    const std::uint64_t tenths = (value + 50'000) / 100'000;
    std::snprintf(buf, sizeof buf, "%llu.%lluM",
                  static_cast<unsigned long long>(tenths / 10),
                  static_cast<unsigned long long>(tenths % 10));
  } else if (value >= 1'000) {
    std::snprintf(buf, sizeof buf, "%lluK", static_cast<unsigned long long>(value / 1000));
  } else {
    std::snprintf(buf, sizeof buf, "%llu", static_cast<unsigned long long>(value));
  }
  return buf;
}

std::string display_flops(const CostReport& report) {
  std::string out = display_count(report.flops_numeric);
  if (report.softmax_count > 0) {
    out += "+" + std::to_string(report.softmax_count) + "×(" +
           std::to_string(report.softmax_dim) + "-D sm)";
  }
  return out;
}

double softmax_flops_estimate(const CostReport& report, double flops_per_element) {
  return static_cast<double>(report.softmax_count) * report.softmax_dim * flops_per_element;
}

nlohmann::json to_json(const CostReport& report) {
  return {{"method", to_string(report.method)},
          {"sigma", report.config.sigma},
          {"k_up", report.config.k_up},
          {"k_encoder", report.config.k_encoder},
          {"c_mid", report.config.c_mid},
          {"c_in", report.config.c_in},
          {"params", report.params},
          {"flops_numeric", report.flops_numeric},
          {"softmax_count", report.softmax_count},
          {"softmax_dim", report.softmax_dim},
          {"scope", to_string(report.scope)},
          {"params_display", display_count(report.params)},
          {"flops_display", display_flops(report)}};
}

std::string cost_csv_header() {
  return "method,sigma,k_up,k_encoder,c_mid,c_in,params,flops_numeric,softmax_count,"
         "softmax_dim,scope,params_display,flops_display";
}

std::string to_csv_row(const CostReport& r) {
  std::ostringstream os;
  os << to_string(r.method) << ',' << r.config.sigma << ',' << r.config.k_up << ','
     << r.config.k_encoder << ',' << r.config.c_mid << ',' << r.config.c_in << ',' << r.params
     << ',' << r.flops_numeric << ',' << r.softmax_count << ',' << r.softmax_dim << ','
     << to_string(r.scope) << ',' << display_count(r.params) << ",\"" << display_flops(r)
     << '"';
  return os.str();
}

}  // namespace dlu
