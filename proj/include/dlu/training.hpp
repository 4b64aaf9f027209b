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
#include <span>
#include <string>
#include <vector>

#include "dlu/complexity.hpp"
#include "dlu/gradients.hpp"

namespace dlu {

enum class TargetRule {
  known_highres,        // target is the high-resolution field itself
  bilinear_of_highres,  // target is the bilinear upsampling of the low-res input
};

// Synthetic upsampling problem. Each sample is a smooth random field of
// size (sigma h, sigma w) built from low-frequency cosines and kept inside
// [0, 1]; the network input is its sigma x sigma box average.
struct SynthTask {
  std::uint64_t seed = 1;
  int height = 16;  // low-resolution input extent
  int width = 16;
  int channels = 4;
  int sigma = 2;
  TargetRule rule = TargetRule::known_highres;
  int modes = 4;               // cosine terms per channel
  double max_frequency = 2.0;  // cycles per image side

  void validate() const;
};

struct SynthBatch {
  Tensor input;   // (n, C, h, w)
  Tensor target;  // (n, C, sigma h, sigma w)
};

SynthBatch make_batch(const SynthTask& task, Rng& rng, int batch);

struct TrainConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int steps = 500;
  int batch_size = 4;
  int eval_interval = 50;
  int eval_size = 8;
  std::uint64_t seed = 1;

  void validate() const;
};

// Initial weights: space / kernel generator ~ N(0, 0.001^2), offset
// predictor all zero, compressor Xavier-uniform; every bias zero.
DluParams init_dlu_params(const UpsampleConfig& config, Rng& rng);
CarafeParams init_carafe_params(const UpsampleConfig& config, Rng& rng);

struct MseResult {
  double loss = 0.0;
  Tensor d_pred;  // 2 (pred - target) / count
};

MseResult mse_loss(const Tensor& pred, const Tensor& target);

// Momentum SGD with L2 decay:  v <- m v - lr (g + wd theta);  theta <- theta + v.
// Velocity buffers are allocated (zeroed) on first use.
struct SgdState {
  std::vector<ConvSpec> velocity;
};

void sgd_step(std::span<ConvSpec* const> params, std::span<const ConvSpec> grads,
              const TrainConfig& config, SgdState& state);

struct LossPoint {
  int step = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
};

struct TrainResult {
  Method method = Method::dlu;
  UpsampleConfig config;
  std::vector<LossPoint> curve;  // one record per evaluation, step 0 included
  double initial_eval = 0.0;
  double final_eval = 0.0;
  double nearest_eval = 0.0;   // baseline on the same eval set
  double bilinear_eval = 0.0;
  std::vector<std::string> layer_names;
  std::vector<ConvSpec> final_params;
};

// Raised when the loss stops being finite.
class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

// Upsampler geometry for a task: c_in and sigma follow the task, the other
// fields come from `base`.
UpsampleConfig task_config(const SynthTask& task, UpsampleConfig base = {});

// Full-batch training on a fixed training set of batch_size samples; the
// eval set is an independent draw of eval_size samples.
TrainResult train(const SynthTask& task, Method method, const TrainConfig& train_config,
                  const UpsampleConfig& base = {});

std::string loss_curve_csv(const TrainResult& result);

}  // namespace dlu
