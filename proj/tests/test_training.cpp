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


#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dlu/errors.hpp"
#include "dlu/parallel.hpp"
#include "dlu/serialize.hpp"
#include "dlu/training.hpp"
#include "test_util.hpp"

using namespace dlu;

TEST_SUITE("training") {

TEST_CASE("synthetic task geometry and bounds") {
  SynthTask task;
  Rng rng(task.seed);
  const auto batch = make_batch(task, rng, 3);
  CHECK(batch.input.shape() == Shape{3, 4, 16, 16});
  CHECK(batch.target.shape() == Shape{3, 4, 32, 32});
  for (double v : batch.target.data()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const double box = (batch.target(1, c, 2 * y, 2 * x) + batch.target(1, c, 2 * y, 2 * x + 1) +
                            batch.target(1, c, 2 * y + 1, 2 * x) +
                            batch.target(1, c, 2 * y + 1, 2 * x + 1)) / 4;
        CHECK(std::abs(batch.input(1, c, y, x) - box) <= 1e-15);
      }

  task.rule = TargetRule::bilinear_of_highres;
  Rng r2(task.seed);
  const auto b2 = make_batch(task, r2, 1);
  CHECK(max_abs_diff(b2.target, bilinear_upsample(b2.input, 2)) == 0.0);

  Rng a(5), b(5);
  CHECK(max_abs_diff(make_batch({}, a, 2).target, make_batch({}, b, 2).target) == 0.0);
  SynthTask bad;
  bad.sigma = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("initialization scheme") {
  const UpsampleConfig cfg{2, 5, 3, 64, 32};
  Rng rng(1);
  const auto p = init_dlu_params(cfg, rng);
  for (double v : p.offset_predictor.weights.data()) CHECK(v == 0.0);
  for (double v : p.offset_predictor.bias) CHECK(v == 0.0);
  for (double v : p.space_generator.bias) CHECK(v == 0.0);
  double ss = 0.0;
  for (double v : p.space_generator.weights.data()) ss += v * v;
  CHECK(std::sqrt(ss / p.space_generator.weights.size()) == doctest::Approx(0.001).epsilon(0.05));
  const double bound = std::sqrt(6.0 / (32 + 64));
  for (double v : p.compressor.weights.data()) CHECK(std::abs(v) <= bound);

  const auto x = testutil::random_input(rng, {1, 32, 6, 6});
  const auto k = dlu_generate_kernels(x, p, cfg);
  CHECK(max_abs_diff(k.expanded.kernels, nearest_upsample(k.source.kernels, 2)) == 0.0);

  Tensor v({1, 32, 6, 6}, 0.3);
  const auto y = dlu_forward(v, p, cfg);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 12; ++j)
      if (testutil::interior(i, j, 2, 2, 6, 6)) CHECK(std::abs(y(0, 5, i, j) - 0.3) <= 1e-12);

  const auto c = init_carafe_params(cfg, rng);
  for (double v2 : c.kernel_generator.bias) CHECK(v2 == 0.0);
}

TEST_CASE("mse_loss") {
  Rng rng(2);
  const auto a = testutil::random_input(rng, {2, 3, 4, 4});
  const auto same = mse_loss(a, a);
  CHECK(same.loss == 0.0);
  for (double g : same.d_pred.data()) CHECK(g == 0.0);

  auto shifted = a;
  for (double& v : shifted.data()) v += 0.25;
  CHECK(mse_loss(shifted, a).loss == doctest::Approx(0.0625).epsilon(1e-14));

  const auto b = testutil::random_input(rng, {2, 3, 4, 4});
  const auto r = mse_loss(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
    CHECK(std::abs(r.d_pred.data()[i] - 2 * d / a.size()) <= 1e-12);
  }
  CHECK(std::abs(r.loss - s / a.size()) <= 1e-12);
  CHECK_THROWS_AS(mse_loss(a, Tensor({1, 3, 4, 4})), ShapeError);
}

TEST_CASE("sgd_step") {
  Rng rng(3);
  auto theta = ConvSpec::zeros(2, 3, 3);
  testutil::randomize(rng, theta, 1.0);
  auto g = ConvSpec::zeros(2, 3, 3);
  std::vector<ConvSpec*> params{&theta};
  TrainConfig tc;

  {
    auto copy = theta;
    std::vector<ConvSpec*> ps{&copy};
    TrainConfig no_wd = tc;
    no_wd.weight_decay = 0.0;
    SgdState st;
    sgd_step(ps, std::vector<ConvSpec>{g}, no_wd, st);
    sgd_step(ps, std::vector<ConvSpec>{g}, no_wd, st);
    CHECK(max_abs_diff(copy.weights, theta.weights) == 0.0);
    CHECK(copy.bias == theta.bias);
  }

  testutil::randomize(rng, g, 1.0);
  auto g2 = ConvSpec::zeros(2, 3, 3);
  testutil::randomize(rng, g2, 1.0);
  const auto start = theta;
  SgdState st;
  TrainConfig plain = tc;
  plain.weight_decay = 0.0;
  sgd_step(params, std::vector<ConvSpec>{g}, plain, st);
  for (std::size_t i = 0; i < theta.weights.size(); ++i) {
    CHECK(theta.weights.data()[i] == start.weights.data()[i] + (0.0 - plain.learning_rate * g.weights.data()[i]));
  }

  // Two steps with momentum and weight decay against the unrolled recurrence.
  auto t = start;
  std::vector<ConvSpec*> ps{&t};
  SgdState s2;
  sgd_step(ps, std::vector<ConvSpec>{g}, tc, s2);
  sgd_step(ps, std::vector<ConvSpec>{g2}, tc, s2);
  const double m = tc.momentum, lr = tc.learning_rate, wd = tc.weight_decay;
  for (std::size_t i = 0; i < t.weights.size(); ++i) {
    const double th0 = start.weights.data()[i];
    const double v1 = m * 0.0 - lr * (g.weights.data()[i] + wd * th0);
    const double th1 = th0 + v1;
    const double v2 = m * v1 - lr * (g2.weights.data()[i] + wd * th1);
    CHECK(t.weights.data()[i] == th1 + v2);
  }
}

TEST_CASE("train: short runs, zero learning rate and determinism") {
  SynthTask task;
  task.height = task.width = 8;
  TrainConfig tc;
  tc.steps = 30;
  tc.eval_interval = 10;
  UpsampleConfig base;
  base.c_mid = 8;

  const auto r = train(task, Method::dlu, tc, base);
  CHECK(r.curve.size() == 4);
  CHECK(r.curve.front().step == 0);
  CHECK(r.curve.back().step == 30);
  CHECK(r.final_eval < r.initial_eval);
  CHECK(r.layer_names == std::vector<std::string>{"compressor", "space_generator", "offset_predictor"});
  double mx = 0.0;
  for (double v : r.final_params[2].weights.data()) mx = std::max(mx, std::abs(v));
  CHECK(mx > 0.0);

  auto frozen = tc;
  frozen.learning_rate = 0.0;
  const auto f = train(task, Method::carafe, frozen, base);
  for (const auto& p : f.curve) {
    CHECK(p.eval_loss == f.initial_eval);
    CHECK(p.train_loss == f.curve.front().train_loss);
  }

  for (int cap : {2, 8}) {
    ThreadCapScope scope(cap);
    const auto again = train(task, Method::dlu, tc, base);
    REQUIRE(again.curve.size() == r.curve.size());
    for (std::size_t i = 0; i < r.curve.size(); ++i) {
      CHECK(again.curve[i].train_loss == r.curve[i].train_loss);
      CHECK(again.curve[i].eval_loss == r.curve[i].eval_loss);
    }
  }

  const auto csv = loss_curve_csv(r);
  CHECK(csv.rfind("# dlu-loss-curve v1", 0) == 0);
  CHECK(csv.find("\nstep,train_loss,eval_loss\n") != std::string::npos);
  CHECK_THROWS_AS(train(task, Method::nearest, tc, base), ConfigError);
  auto bad = tc;
  bad.steps = 0;
  CHECK_THROWS_AS(train(task, Method::dlu, bad, base), ConfigError);
}

}  // TEST_SUITE

TEST_SUITE("serialize") {

TEST_CASE("tensor container round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "dlu_serialize_test";
  std::filesystem::create_directories(dir);
  Rng rng(4);
  const auto a = testutil::random_input(rng, {2, 3, 4, 5});
  const auto b = testutil::random_input(rng, {1, 1, 2, 2}).cast<float>();

  save_tensor(dir / "a.bin", a, {{"seed", 4}});
  const auto a2 = load_tensor<double>(dir / "a.bin");
  CHECK(a2.shape() == a.shape());
  CHECK(max_abs_diff(a, a2) == 0.0);
  CHECK(checksum(a) == checksum(a2));

  NamedTensors<float> many{{"first", b}, {"second", b}};
  save_tensors(dir / "m.bin", many);
  const auto back = load_tensors<float>(dir / "m.bin");
  REQUIRE(back.size() == 2);
  CHECK(back[1].first == "second");
  CHECK(max_abs_diff(back[0].second, b) == 0.0f);

  std::ifstream side(sidecar_path(dir / "a.bin"));
  const auto meta = nlohmann::json::parse(side);
  CHECK(meta["format"] == "dlu-tensor");
  CHECK(meta["metadata"]["seed"] == 4);
  CHECK(meta["records"][0]["shape"] == nlohmann::json::array({2, 3, 4, 5}));

  // Little-endian header: magic, dtype 2 (float64), then dims.
  std::ifstream raw(dir / "a.bin", std::ios::binary);
  char head[16];
  raw.read(head, 16);
  CHECK(std::string(head, 4) == "DLUT");
  CHECK(static_cast<unsigned char>(head[4]) == 2);
  CHECK(static_cast<unsigned char>(head[8]) == 2);

  {
    std::ofstream junk(dir / "bad.bin", std::ios::binary);
    junk << "XXXXnot a tensor";
  }
  CHECK_THROWS_AS(load_tensor<double>(dir / "bad.bin"), Error);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
