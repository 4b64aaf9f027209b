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

#include "dlu/check_suite.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dlu/gradients.hpp"

namespace dlu {
namespace {

// Flat parameter vector assembled from tensors and conv layers, and the
// inverse mapping used inside objectives.
class Packer {
 public:
  void add(const Tensor& t) {
    shapes_.push_back(t.shape());
    values_.insert(values_.end(), t.data().begin(), t.data().end());
  }
  void add(const ConvSpec& spec) {
    add(spec.weights);
    shapes_.push_back({1, spec.out_channels, 1, 1});
    values_.insert(values_.end(), spec.bias.begin(), spec.bias.end());
  }
  const std::vector<double>& values() const { return values_; }

  // Reads back consecutive pieces in the order they were added.
  class Reader {
   public:
    Reader(const std::vector<Shape>& shapes, std::span<const double> v) : shapes_(shapes), v_(v) {}
    Tensor tensor() {
      const Shape s = shapes_[slot_++];
      Tensor t(s, std::vector<double>(v_.begin() + pos_, v_.begin() + pos_ + s.numel()));
      pos_ += s.numel();
      return t;
    }
    ConvSpec conv(const ConvSpec& like) {
      ConvSpec out = like;
      out.weights = tensor();
      const Shape b = shapes_[slot_++];
      out.bias.assign(v_.begin() + pos_, v_.begin() + pos_ + b.numel());
      pos_ += b.numel();
      return out;
    }

   private:
    const std::vector<Shape>& shapes_;
    std::span<const double> v_;
    std::size_t slot_ = 0;
    std::size_t pos_ = 0;
  };

  Reader reader(std::span<const double> v) const { return Reader(shapes_, v); }

 private:
  std::vector<Shape> shapes_;
  std::vector<double> values_;
};

double weighted_sum(const Tensor& out, const Tensor& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) acc += out.data()[i] * weights.data()[i];
  return acc;
}

GradientCheck finish(CheckReport report, double tolerance) {
  GradientCheck check{std::move(report), tolerance, false};
  check.passed = std::isfinite(check.report.max_rel_err) && check.report.max_rel_err <= tolerance;
  return check;
}

CheckOptions options_for(const CheckSuiteConfig& cfg, std::uint64_t salt) {
  CheckOptions o;
  o.epsilon = cfg.epsilon;
  o.min_probes = cfg.probes;
  o.seed = cfg.seed * 7919 + salt;
  o.rel_floor = cfg.rel_floor;
  return o;
}

void randomize_layer(Rng& rng, ConvSpec& spec, double stddev, double bias_lo, double bias_hi) {
  spec.weights = random_gaussian<double>(rng, spec.weights.shape(), 0.0, stddev);
  for (auto& b : spec.bias) b = rng.uniform(bias_lo, bias_hi);
}

std::vector<double> concat(std::initializer_list<std::span<const double>> parts) {
  std::vector<double> out;
  for (auto p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

std::vector<double> flatten(const ConvSpec& spec) {
  return concat({spec.weights.data(), spec.bias});
}

}  // namespace

Tensor kink_free_offsets(Rng& rng, Shape shape, int sigma, double spread, double margin) {
  Tensor off(shape);
  for (int b = 0; b < shape.n; ++b) {
    for (int axis = 0; axis < 2; ++axis) {
      for (int i = 0; i < shape.h; ++i) {
        for (int j = 0; j < shape.w; ++j) {
          const double base = axis == 0 ? j / sigma : i / sigma;
          double v = 0.0;
          do {
            v = rng.uniform(-spread, spread);
          } while (std::abs((base + v) - std::round(base + v)) < margin);
          off(b, axis, i, j) = v;
        }
      }
    }
  }
  return off;
}

double min_kink_distance(const Tensor& offsets, int sigma) {
  double best = 1.0;
  for (int b = 0; b < offsets.n(); ++b) {
    for (int axis = 0; axis < 2; ++axis) {
      for (int i = 0; i < offsets.h(); ++i) {
        for (int j = 0; j < offsets.w(); ++j) {
          const double coord = (axis == 0 ? j / sigma : i / sigma) + offsets(b, axis, i, j);
          best = std::min(best, std::abs(coord - std::round(coord)));
        }
      }
    }
  }
  return best;
}

GradientCheck check_conv2d_gradient(const CheckSuiteConfig& cfg) {
  Rng rng(cfg.seed);
  const auto& c = cfg.config;
  const Tensor input = random_gaussian<double>(rng, {cfg.batch, c.c_in, cfg.height, cfg.width}, 0, 1);
  ConvSpec spec = ConvSpec::zeros(c.c_in, c.c_mid, c.k_encoder);
  randomize_layer(rng, spec, 0.5, -0.5, 0.5);
  const Tensor w = random_uniform<double>(rng, {cfg.batch, c.c_mid, cfg.height, cfg.width}, -1, 1);

  Packer packer;
  packer.add(input);
  packer.add(spec);
  const auto back = conv2d_backward(input, spec, w);
  const auto analytic = concat({back.d_input.data(), flatten(back.d_spec)});
  const Objective f = [&](std::span<const double> theta) {
    auto r = packer.reader(theta);
    const Tensor x = r.tensor();
    return weighted_sum(conv2d(x, r.conv(spec)), w);
  };
  return finish(finite_diff_check("conv2d", f, packer.values(), analytic, options_for(cfg, 1)),
                cfg.single_op_tolerance);
}

GradientCheck check_softmax_gradient(const CheckSuiteConfig& cfg) {
  Rng rng(cfg.seed + 1);
  const Shape shape{cfg.batch, cfg.config.taps(), cfg.height, cfg.width};
  const Tensor logits = random_gaussian<double>(rng, shape, 0, 2);
  const Tensor w = random_uniform<double>(rng, shape, -1, 1);
  const auto analytic = softmax_backward(channel_softmax(logits), w);
  const Objective f = [&](std::span<const double> theta) {
    return weighted_sum(channel_softmax(Tensor(shape, {theta.begin(), theta.end()})), w);
  };
  std::vector<double> theta(logits.data().begin(), logits.data().end());
  return finish(finite_diff_check("softmax", f, theta, analytic.data(), options_for(cfg, 2)),
                cfg.single_op_tolerance);
}

GradientCheck check_reassemble_gradient(const CheckSuiteConfig& cfg) {
  Rng rng(cfg.seed + 2);
  const auto& c = cfg.config;
  const int oh = cfg.height * c.sigma, ow = cfg.width * c.sigma;
  const Tensor input = random_gaussian<double>(rng, {cfg.batch, c.c_in, cfg.height, cfg.width}, 0, 1);
  const Tensor kernels = random_uniform<double>(rng, {cfg.batch, c.taps(), oh, ow}, -1, 1);
  const Tensor w = random_uniform<double>(rng, {cfg.batch, c.c_in, oh, ow}, -1, 1);

  Packer packer;
  packer.add(input);
  packer.add(kernels);
  const auto back = reassemble_backward(input, KernelField{kernels, false}, w, c);
  const auto analytic = concat({back.d_input.data(), back.d_kernels.data()});
  const Objective f = [&](std::span<const double> theta) {
    auto r = packer.reader(theta);
    const Tensor x = r.tensor();
    const KernelField k{r.tensor(), false};
    return weighted_sum(reassemble(x, k, c), w);
  };
  return finish(finite_diff_check("reassemble", f, packer.values(), analytic, options_for(cfg, 3)),
                cfg.single_op_tolerance);
}

GradientCheck check_expand_gradient(const CheckSuiteConfig& cfg) {
  Rng rng(cfg.seed + 3);
  const auto& c = cfg.config;
  const int oh = cfg.height * c.sigma, ow = cfg.width * c.sigma;
  const KernelField source{
      channel_softmax(random_gaussian<double>(rng, {cfg.batch, c.taps(), cfg.height, cfg.width}, 0, 2)),
      true};
  const Tensor offsets = kink_free_offsets(rng, {cfg.batch, 2, oh, ow}, c.sigma, 1.5);
  const Tensor w = random_uniform<double>(rng, {cfg.batch, c.taps(), oh, ow}, -1, 1);

  Packer packer;
  packer.add(source.kernels);
  packer.add(offsets);
  const auto back = expand_backward(source, OffsetField{offsets}, w, c);
  const auto analytic = concat({back.d_source.data(), back.d_offsets.data()});
  const Objective f = [&](std::span<const double> theta) {
    auto r = packer.reader(theta);
    const KernelField s{r.tensor(), true};
    const OffsetField o{r.tensor()};
    return weighted_sum(expand_kernel_space(s, o, c).kernels, w);
  };
  return finish(finite_diff_check("expand", f, packer.values(), analytic, options_for(cfg, 4)),
                cfg.single_op_tolerance);
}

GradientCheck check_dlu_gradient(const CheckSuiteConfig& cfg) {
  const auto& c = cfg.config;
  Tensor input;
  DluParams params;
  // Redraw until every sampling coordinate is clear of the bilinear kinks.
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng(cfg.seed + 100 + attempt);
    input = random_gaussian<double>(rng, {cfg.batch, c.c_in, cfg.height, cfg.width}, 0, 1);
    params = DluParams::zeros(c);
    randomize_layer(rng, params.compressor, 0.5, -0.2, 0.2);
    randomize_layer(rng, params.space_generator, 0.3, -0.5, 0.5);
    randomize_layer(rng, params.offset_predictor, 0.1, -1.2, 1.2);
    const auto trace = dlu_trace(input, params, c);
    if (min_kink_distance(trace.offsets.offsets, c.sigma) >= 1e-3 || attempt > 1000) break;
  }
  Rng wrng(cfg.seed + 5);
  const Tensor w = random_uniform<double>(
      wrng, {cfg.batch, c.c_in, cfg.height * c.sigma, cfg.width * c.sigma}, -1, 1);

  Packer packer;
  packer.add(input);
  for (const auto* layer : params.layers()) packer.add(*layer);
  const auto grads = dlu_backward(input, params, c, w);
  std::vector<double> analytic(grads.d_input.data().begin(), grads.d_input.data().end());
  for (const auto& g : grads.d_params) {
    const auto flat = flatten(g);
    analytic.insert(analytic.end(), flat.begin(), flat.end());
  }
  const Objective f = [&](std::span<const double> theta) {
    auto r = packer.reader(theta);
    const Tensor x = r.tensor();
    DluParams p;
    p.compressor = r.conv(params.compressor);
    p.space_generator = r.conv(params.space_generator);
    p.offset_predictor = r.conv(params.offset_predictor);
    return weighted_sum(dlu_forward(x, p, c), w);
  };
  return finish(finite_diff_check("dlu", f, packer.values(), analytic, options_for(cfg, 5)),
                cfg.end_to_end_tolerance);
}

GradientCheck check_carafe_gradient(const CheckSuiteConfig& cfg) {
  const auto& c = cfg.config;
  Rng rng(cfg.seed + 6);
  const Tensor input = random_gaussian<double>(rng, {cfg.batch, c.c_in, cfg.height, cfg.width}, 0, 1);
  auto params = CarafeParams::zeros(c);
  randomize_layer(rng, params.compressor, 0.5, -0.2, 0.2);
  randomize_layer(rng, params.kernel_generator, 0.3, -0.5, 0.5);
  const Tensor w = random_uniform<double>(
      rng, {cfg.batch, c.c_in, cfg.height * c.sigma, cfg.width * c.sigma}, -1, 1);

  Packer packer;
  packer.add(input);
  for (const auto* layer : params.layers()) packer.add(*layer);
  const auto grads = carafe_backward(input, params, c, w);
  std::vector<double> analytic(grads.d_input.data().begin(), grads.d_input.data().end());
  for (const auto& g : grads.d_params) {
    const auto flat = flatten(g);
    analytic.insert(analytic.end(), flat.begin(), flat.end());
  }
  const Objective f = [&](std::span<const double> theta) {
    auto r = packer.reader(theta);
    const Tensor x = r.tensor();
    CarafeParams p;
    p.compressor = r.conv(params.compressor);
    p.kernel_generator = r.conv(params.kernel_generator);
    return weighted_sum(carafe_forward(x, p, c), w);
  };
  return finish(finite_diff_check("carafe", f, packer.values(), analytic, options_for(cfg, 6)),
                cfg.end_to_end_tolerance);
}

NormalizationStats expanded_normalization_stats(const UpsampleConfig& config, int height,
                                                int width, int locations, std::uint64_t seed) {
  Rng rng(seed);
  NormalizationStats stats;
  stats.min_entry = 1.0;
  const int oh = height * config.sigma, ow = width * config.sigma;
  while (stats.locations < static_cast<std::size_t>(locations)) {
    // Logit scale varies so some kernels are nearly one-hot.
    const double scale = rng.uniform(0.1, 8.0);
    const KernelField source{
        channel_softmax(random_gaussian<double>(rng, {1, config.taps(), height, width}, 0, scale)),
        true};
    // Offsets deliberately reach far outside the grid.
    const double spread = rng.uniform(0.5, 3.0 * std::max(height, width));
    const OffsetField offsets{random_uniform<double>(rng, {1, 2, oh, ow}, -spread, spread)};
    const auto expanded = expand_kernel_space(source, offsets, config);
    for (int i = 0; i < oh; ++i) {
      for (int j = 0; j < ow; ++j) {
        double sum = 0.0;
        for (int t = 0; t < config.taps(); ++t) {
          const double v = expanded.kernels(0, t, i, j);
          sum += v;
          stats.min_entry = std::min(stats.min_entry, v);
        }
        stats.max_sum_error = std::max(stats.max_sum_error, std::abs(sum - 1.0));
        ++stats.locations;
      }
    }
  }
  return stats;
}

namespace {

PropertyCheck normalization_property(const CheckSuiteConfig& cfg) {
  const auto s = expanded_normalization_stats(cfg.config, cfg.height, cfg.width,
                                              cfg.normalization_samples, cfg.seed + 11);
  std::ostringstream os;
  os << "locations=" << s.locations << " max_sum_error=" << s.max_sum_error
     << " min_entry=" << s.min_entry;
  return {"normalization_preservation", s.max_sum_error <= 1e-6 && s.min_entry >= -1e-9, os.str()};
}

PropertyCheck zero_offset_property(const CheckSuiteConfig& cfg) {
  Rng rng(cfg.seed + 12);
  const auto& c = cfg.config;
  const KernelField source{
      channel_softmax(random_gaussian<double>(rng, {cfg.batch, c.taps(), cfg.height, cfg.width}, 0, 2)),
      true};
  const OffsetField zero{Tensor({cfg.batch, 2, cfg.height * c.sigma, cfg.width * c.sigma})};
  const auto expanded = expand_kernel_space(source, zero, c);
  const auto replicated = nearest_upsample(source.kernels, c.sigma);
  const bool exact = expanded.kernels.storage() == replicated.storage();
  return {"zero_offset_identity", exact, exact ? "exact" : "expanded != nearest replication"};
}

template <typename Forward>
PropertyCheck interior_constant_property(const CheckSuiteConfig& cfg, const char* name,
                                         Forward&& forward) {
  const auto& c = cfg.config;
  Rng rng(cfg.seed + 13);
  Tensor input({cfg.batch, c.c_in, cfg.height, cfg.width});
  for (int b = 0; b < cfg.batch; ++b) {
    for (int ch = 0; ch < c.c_in; ++ch) {
      const double v = rng.uniform(-2, 2);
      for (int y = 0; y < cfg.height; ++y) {
        for (int x = 0; x < cfg.width; ++x) input(b, ch, y, x) = v;
      }
    }
  }
  const Tensor out = forward(input, rng);
  const int r = c.radius();
  double worst = 0.0;
  for (int b = 0; b < cfg.batch; ++b) {
    for (int ch = 0; ch < c.c_in; ++ch) {
      for (int i = 0; i < out.h(); ++i) {
        for (int j = 0; j < out.w(); ++j) {
          const int cy = i / c.sigma, cx = j / c.sigma;
          if (cy - r < 0 || cy + r >= cfg.height || cx - r < 0 || cx + r >= cfg.width) continue;
          worst = std::max(worst, std::abs(out(b, ch, i, j) - input(b, ch, 0, 0)));
        }
      }
    }
  }
  std::ostringstream os;
  os << "max_interior_error=" << worst;
  return {name, worst <= 1e-9, os.str()};
}

}  // namespace

bool CheckSuiteResult::passed() const { return failures().empty(); }

std::vector<std::string> CheckSuiteResult::failures() const {
  std::vector<std::string> out;
  for (const auto& g : gradients) {
    if (!g.passed) out.push_back(g.report.op);
  }
  for (const auto& p : properties) {
    if (!p.passed) out.push_back(p.name);
  }
  return out;
}

nlohmann::json CheckSuiteResult::to_json() const {
  nlohmann::json grads = nlohmann::json::array();
  for (const auto& g : gradients) {
    auto j = dlu::to_json(g.report);
    j["tolerance"] = g.tolerance;
    j["passed"] = g.passed;
    grads.push_back(std::move(j));
  }
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : properties) {
    props.push_back({{"name", p.name}, {"passed", p.passed}, {"detail", p.detail}});
  }
  return {{"passed", passed()}, {"gradients", grads}, {"properties", props},
          {"failures", failures()}};
}

CheckSuiteResult run_check_suite(const CheckSuiteConfig& cfg) {
  cfg.config.validate();
  CheckSuiteResult result;
  result.gradients.push_back(check_conv2d_gradient(cfg));
  result.gradients.push_back(check_softmax_gradient(cfg));
  result.gradients.push_back(check_reassemble_gradient(cfg));
  result.gradients.push_back(check_expand_gradient(cfg));
  result.gradients.push_back(check_dlu_gradient(cfg));
  result.gradients.push_back(check_carafe_gradient(cfg));

  result.properties.push_back(normalization_property(cfg));
  result.properties.push_back(zero_offset_property(cfg));
  const auto& c = cfg.config;
  result.properties.push_back(interior_constant_property(
      cfg, "interior_constant_carafe", [&](const Tensor& x, Rng& rng) {
        auto p = CarafeParams::zeros(c);
        randomize_layer(rng, p.compressor, 0.5, -0.2, 0.2);
        randomize_layer(rng, p.kernel_generator, 1.0, -1.0, 1.0);
        return carafe_forward(x, p, c);
      }));
  result.properties.push_back(interior_constant_property(
      cfg, "interior_constant_dlu", [&](const Tensor& x, Rng& rng) {
        auto p = DluParams::zeros(c);
        randomize_layer(rng, p.compressor, 0.5, -0.2, 0.2);
        randomize_layer(rng, p.space_generator, 1.0, -1.0, 1.0);
        randomize_layer(rng, p.offset_predictor, 0.5, -2.0, 2.0);
        return dlu_forward(x, p, c);
      }));
  return result;
}

}  // namespace dlu
