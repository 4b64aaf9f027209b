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

#include "dlu/training.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace dlu {

void SynthTask::validate() const {
  if (height < 1 || width < 1 || channels < 1) throw ConfigError("synth task: empty field");
  if (sigma < 1) throw ConfigError("synth task: sigma must be >= 1");
  if (modes < 1) throw ConfigError("synth task: need at least one cosine mode");
  if (!(max_frequency >= 0.0)) throw ConfigError("synth task: negative frequency");
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("train: learning rate must be >= 0");
  if (steps < 1) throw ConfigError("train: steps must be >= 1");
  if (batch_size < 1 || eval_size < 1) throw ConfigError("train: empty batch");
  if (eval_interval < 1) throw ConfigError("train: eval interval must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("train: momentum must be in [0, 1)");
}

SynthBatch make_batch(const SynthTask& task, Rng& rng, int batch) {
  task.validate();
  const int s = task.sigma;
  const int oh = task.height * s, ow = task.width * s;
  Tensor high({batch, task.channels, oh, ow});
  const double amplitude = 0.5 / task.modes;
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < task.channels; ++ch) {
      std::vector<double> fx(task.modes), fy(task.modes), phase(task.modes), amp(task.modes);
      for (int m = 0; m < task.modes; ++m) {
        fx[m] = rng.uniform(-task.max_frequency, task.max_frequency);
        fy[m] = rng.uniform(-task.max_frequency, task.max_frequency);
        phase[m] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        amp[m] = amplitude * rng.uniform(0.5, 1.0);
      }
      for (int i = 0; i < oh; ++i) {
        const double y = (i + 0.5) / oh;
        for (int j = 0; j < ow; ++j) {
          const double x = (j + 0.5) / ow;
          double v = 0.5;
          for (int m = 0; m < task.modes; ++m) {
            v += amp[m] * std::cos(2.0 * std::numbers::pi * (fx[m] * x + fy[m] * y) + phase[m]);
          }
          high(b, ch, i, j) = v;
        }
      }
    }
  }

  Tensor low({batch, task.channels, task.height, task.width});
  const double inv = 1.0 / (s * s);
  for (int b = 0; b < batch; ++b) {
    for (int ch = 0; ch < task.channels; ++ch) {
      for (int y = 0; y < task.height; ++y) {
        for (int x = 0; x < task.width; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < s; ++dy) {
            for (int dx = 0; dx < s; ++dx) acc += high(b, ch, y * s + dy, x * s + dx);
          }
          low(b, ch, y, x) = acc * inv;
        }
      }
    }
  }
  if (task.rule == TargetRule::bilinear_of_highres) {
    return {low, bilinear_upsample(low, s)};
  }
  return {std::move(low), std::move(high)};
}

DluParams init_dlu_params(const UpsampleConfig& config, Rng& rng) {
  auto params = DluParams::zeros(config);
  random_xavier(rng, params.compressor);
  random_gaussian_weights(rng, params.space_generator, 0.001);
  // offset_predictor stays zero: expansion starts as plain replication.
  return params;
}

CarafeParams init_carafe_params(const UpsampleConfig& config, Rng& rng) {
  auto params = CarafeParams::zeros(config);
  random_xavier(rng, params.compressor);
  random_gaussian_weights(rng, params.kernel_generator, 0.001);
  return params;
}

MseResult mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mse_loss: prediction " + pred.shape().str() + " vs target " +
                     target.shape().str());
  }
  MseResult out{0.0, Tensor(pred.shape())};
  const double count = static_cast<double>(pred.size());
  auto p = pred.data();
  auto t = target.data();
  auto g = out.d_pred.data();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double diff = p[i] - t[i];
    out.loss += diff * diff;
    g[i] = 2.0 * diff / count;
  }
  out.loss /= count;
  return out;
}

void sgd_step(std::span<ConvSpec* const> params, std::span<const ConvSpec> grads,
              const TrainConfig& config, SgdState& state) {
  if (params.size() != grads.size()) throw ShapeError("sgd_step: params/grads length mismatch");
  if (state.velocity.empty()) {
    for (const auto* p : params) {
      state.velocity.push_back(ConvSpec::zeros(p->in_channels, p->out_channels, p->kernel_size));
    }
  }
  if (state.velocity.size() != params.size()) throw ShapeError("sgd_step: stale velocity state");

  const double lr = config.learning_rate, m = config.momentum, wd = config.weight_decay;
  for (std::size_t l = 0; l < params.size(); ++l) {
    ConvSpec& theta = *params[l];
    const ConvSpec& g = grads[l];
    ConvSpec& v = state.velocity[l];
    if (g.weights.shape() != theta.weights.shape() || g.bias.size() != theta.bias.size()) {
      throw ShapeError("sgd_step: gradient geometry differs from layer " + std::to_string(l));
    }
    auto tw = theta.weights.data();
    auto gw = g.weights.data();
    auto vw = v.weights.data();
    for (std::size_t i = 0; i < tw.size(); ++i) {
      vw[i] = m * vw[i] - lr * (gw[i] + wd * tw[i]);
      tw[i] += vw[i];
    }
    for (std::size_t i = 0; i < theta.bias.size(); ++i) {
      v.bias[i] = m * v.bias[i] - lr * (g.bias[i] + wd * theta.bias[i]);
      theta.bias[i] += v.bias[i];
    }
  }
}

UpsampleConfig task_config(const SynthTask& task, UpsampleConfig base) {
  base.c_in = task.channels;
  base.sigma = task.sigma;
  base.validate();
  return base;
}

namespace {

struct Model {
  Method method;
  UpsampleConfig config;
  DluParams dlu;
  CarafeParams carafe;

  Tensor forward(const Tensor& x) const {
    return method == Method::dlu ? dlu_forward(x, dlu, config) : carafe_forward(x, carafe, config);
  }

  // Loss and gradients on one batch.
  std::pair<double, GradBundle> loss_and_grad(const SynthBatch& batch) const {
    if (method == Method::dlu) {
      const auto trace = dlu_trace(batch.input, dlu, config);
      const auto pred = reassemble(batch.input, trace.expanded, config);
      auto mse = mse_loss(pred, batch.target);
      return {mse.loss, dlu_backward(trace, batch.input, dlu, config, mse.d_pred)};
    }
    const auto pred = carafe_forward(batch.input, carafe, config);
    auto mse = mse_loss(pred, batch.target);
    return {mse.loss, carafe_backward(batch.input, carafe, config, mse.d_pred)};
  }

  std::vector<ConvSpec*> layers() {
    std::vector<ConvSpec*> out;
    if (method == Method::dlu) {
      for (auto* l : dlu.layers()) out.push_back(l);
    } else {
      for (auto* l : carafe.layers()) out.push_back(l);
    }
    return out;
  }
};

}  // namespace

TrainResult train(const SynthTask& task, Method method, const TrainConfig& train_config,
                  const UpsampleConfig& base) {
  task.validate();
  train_config.validate();
  if (method != Method::dlu && method != Method::carafe) {
    throw ConfigError("train: only dlu and carafe have trainable parameters");
  }

  Model model{method, task_config(task, base), {}, {}};
  Rng init_rng(train_config.seed);
  if (method == Method::dlu) {
    model.dlu = init_dlu_params(model.config, init_rng);
  } else {
    model.carafe = init_carafe_params(model.config, init_rng);
  }

  Rng train_rng(task.seed);
  Rng eval_rng(task.seed ^ 0x9e3779b97f4a7c15ull);
  const SynthBatch train_set = make_batch(task, train_rng, train_config.batch_size);
  const SynthBatch eval_set = make_batch(task, eval_rng, train_config.eval_size);

  TrainResult result;
  result.method = method;
  result.config = model.config;
  result.nearest_eval = mse_loss(nearest_upsample(eval_set.input, task.sigma), eval_set.target).loss;
  result.bilinear_eval =
      mse_loss(bilinear_upsample(eval_set.input, task.sigma), eval_set.target).loss;

  const auto eval = [&] { return mse_loss(model.forward(eval_set.input), eval_set.target).loss; };
  SgdState state;
  double last_loss = 0.0;
  try {
    result.initial_eval = eval();
    for (int step = 0; step < train_config.steps; ++step) {
      auto [loss, grads] = model.loss_and_grad(train_set);
      if (!std::isfinite(loss) || !grads.all_finite()) {
        throw TrainingDiverged("train: non-finite loss or gradient at step " +
                               std::to_string(step) + " (previous loss " +
                               std::to_string(last_loss) + ")");
      }
      if (step == 0) result.curve.push_back({0, loss, result.initial_eval});
      last_loss = loss;
      sgd_step(model.layers(), grads.d_params, train_config, state);
      const int done = step + 1;
      if (done % train_config.eval_interval == 0 || done == train_config.steps) {
        const double train_loss = mse_loss(model.forward(train_set.input), train_set.target).loss;
        result.curve.push_back({done, train_loss, eval()});
      }
    }
  } catch (const NumericError& e) {
    throw TrainingDiverged(std::string("train: diverged (") + e.what() + "), last loss " +
                           std::to_string(last_loss));
  }
  result.final_eval = result.curve.back().eval_loss;

  if (method == Method::dlu) {
    for (std::size_t l = 0; l < DluParams::kLayers; ++l) {
      result.layer_names.emplace_back(DluParams::kLayerNames[l]);
    }
  } else {
    for (std::size_t l = 0; l < CarafeParams::kLayers; ++l) {
      result.layer_names.emplace_back(CarafeParams::kLayerNames[l]);
    }
  }
  for (auto* l : model.layers()) result.final_params.push_back(*l);
  return result;
}

std::string loss_curve_csv(const TrainResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "# dlu-loss-curve v1 method=" << to_string(result.method) << ' ' << result.config.str()
     << '\n';
  os << "step,train_loss,eval_loss\n";
  for (const auto& p : result.curve) os << p.step << ',' << p.train_loss << ',' << p.eval_loss << '\n';
  return os.str();
}

}  // namespace dlu
