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
#include <numeric>

#include "dlu/errors.hpp"
#include "dlu/parallel.hpp"
#include "dlu/tensor_ops.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dlu;

TEST_SUITE("tensor_core") {

TEST_CASE("conv2d 3x3 ones: padding arithmetic") {
  Tensor x({1, 1, 3, 3}, 1.0);
  auto spec = ConvSpec::zeros(1, 1, 3);
  for (double& v : spec.weights.data()) v = 1.0;
  const auto y = conv2d(x, spec);
  CHECK(y(0, 0, 1, 1) == 9.0);
  for (auto [r, c] : {std::pair{0, 0}, {0, 2}, {2, 0}, {2, 2}}) CHECK(y(0, 0, r, c) == 4.0);
  CHECK(y(0, 0, 0, 1) == 6.0);
}

TEST_CASE("conv2d 1x1 permutation matrix permutes channels") {
  Rng rng(3);
  const auto x = testutil::random_input(rng, {2, 3, 4, 5});
  auto spec = ConvSpec::zeros(3, 3, 1);
  const int perm[3] = {2, 0, 1};
  for (int oc = 0; oc < 3; ++oc) spec.weights(oc, perm[oc], 0, 0) = 1.0;
  const auto y = conv2d(x, spec);
  for (int b = 0; b < 2; ++b)
    for (int oc = 0; oc < 3; ++oc)
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 5; ++j) CHECK(y(b, oc, i, j) == x(b, perm[oc], i, j));
}

TEST_CASE("conv2d equals the triple-loop oracle exactly") {
  Rng rng(11);
  {
    const auto x = testutil::random_input(rng, {1, 4, 5, 5});
    auto spec = ConvSpec::zeros(4, 3, 3);
    testutil::randomize(rng, spec, 1.0);
    CHECK(max_abs_diff(conv2d(x, spec), oracle::conv2d(x, spec)) == 0.0);
  }
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int cin = 1 + static_cast<int>(rng.below(4));
    const int cout = 1 + static_cast<int>(rng.below(4));
    const int k = 1 + 2 * static_cast<int>(rng.below(3));
    const int h = 1 + static_cast<int>(rng.below(8));
    const int w = 1 + static_cast<int>(rng.below(8));
    const auto x = testutil::random_input(rng, {n, cin, h, w});
    auto spec = ConvSpec::zeros(cin, cout, k);
    testutil::randomize(rng, spec, 1.0);
    CAPTURE(trial);
    CHECK(max_abs_diff(conv2d(x, spec), oracle::conv2d(x, spec)) == 0.0);
  }
}

TEST_CASE("conv2d errors") {
  Tensor x({1, 2, 3, 3});
  CHECK_THROWS_AS(conv2d(x, ConvSpec::zeros(3, 1, 1)), ShapeError);
  CHECK_THROWS_AS(ConvSpec::zeros(2, 1, 2), ConfigError);
  auto bad = ConvSpec::zeros(2, 1, 3);
  bad.bias.pop_back();
  CHECK_THROWS(conv2d(x, bad));
  CHECK(ConvSpec::zeros(64, 25, 3).trainable_count() == (64u * 9 + 1) * 25);
}

TEST_CASE("channel_softmax examples") {
  const auto u = channel_softmax(Tensor({1, 25, 2, 3}));
  for (double v : u.data()) CHECK(v == doctest::Approx(0.04).epsilon(1e-15));

  Rng rng(5);
  const auto one = channel_softmax(testutil::random_input(rng, {2, 1, 3, 3}));
  for (double v : one.data()) CHECK(v == 1.0);

  Tensor logs({1, 3, 1, 1}, std::vector<double>{std::log(1.0), std::log(2.0), std::log(3.0)});
  const auto p = channel_softmax(logs);
  CHECK(p(0, 0, 0, 0) == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(p(0, 1, 0, 0) == doctest::Approx(2.0 / 6).epsilon(1e-14));
  CHECK(p(0, 2, 0, 0) == doctest::Approx(3.0 / 6).epsilon(1e-14));
}

TEST_CASE("channel_softmax sums, shift invariance and oracle") {
  Rng rng(6);
  const auto x = random_gaussian<double>(rng, {2, 9, 4, 5}, 0.0, 3.0);
  const auto p = channel_softmax(x);
  auto shifted = x;
  for (int b = 0; b < 2; ++b)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 5; ++j) {
        const double c = rng.uniform(-20.0, 20.0);
        double s = 0.0;
        for (int ch = 0; ch < 9; ++ch) {
          s += p(b, ch, i, j);
          CHECK(p(b, ch, i, j) > 0.0);
          shifted(b, ch, i, j) += c;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
      }
  CHECK(max_abs_diff(channel_softmax(shifted), p) <= 1e-12);
  CHECK(oracle::max_abs_diff(p, oracle::softmax(x)) <= 1e-14);
  // Large logits must not overflow.
  Tensor big({1, 2, 1, 1}, std::vector<double>{1000.0, 999.0});
  CHECK(channel_softmax(big).all_finite());
}

TEST_CASE("pixel_shuffle convention") {
  Tensor x({1, 4, 1, 1}, std::vector<double>{1, 2, 3, 4});
  const auto y = pixel_shuffle(x, 2);
  CHECK(y.shape() == Shape{1, 1, 2, 2});
  CHECK(y(0, 0, 0, 0) == 1);
  CHECK(y(0, 0, 0, 1) == 2);
  CHECK(y(0, 0, 1, 0) == 3);
  CHECK(y(0, 0, 1, 1) == 4);

  Rng rng(8);
  const auto r = testutil::random_input(rng, {1, 8, 2, 2});
  CHECK(max_abs_diff(pixel_shuffle(r, 2), oracle::pixel_shuffle(r, 2)) == 0.0);
  CHECK(max_abs_diff(pixel_shuffle(r, 1), r) == 0.0);
  const auto z = testutil::random_input(rng, {2, 18, 3, 2});
  CHECK(max_abs_diff(pixel_unshuffle(pixel_shuffle(z, 3), 3), z) == 0.0);
  CHECK_THROWS_AS(pixel_shuffle(r, 3), ShapeError);
}

TEST_CASE("bilinear_sample examples") {
  Rng rng(9);
  const auto f = testutil::random_input(rng, {2, 3, 4, 5});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) {
      const auto s = bilinear_sample(f, 1, static_cast<double>(x), static_cast<double>(y));
      for (int c = 0; c < 3; ++c) CHECK(s[c] == f(1, c, y, x));
    }
  Tensor two({1, 1, 1, 2}, std::vector<double>{0.0, 10.0});
  CHECK(bilinear_sample(two, 0, 0.5, 0.0)[0] == 5.0);
  CHECK(bilinear_sample(f, 0, 5 + 3.7, 1.25) == bilinear_sample(f, 0, 4.0, 1.25));
  CHECK(bilinear_sample(f, 0, -2.0, -7.0) == bilinear_sample(f, 0, 0.0, 0.0));
  for (int t = 0; t < 50; ++t) {
    const double x = rng.uniform(-1.0, 5.0), y = rng.uniform(-1.0, 4.0);
    const auto s = bilinear_sample(f, 0, x, y);
    for (int c = 0; c < 3; ++c) CHECK(std::abs(s[c] - oracle::bilinear(f, 0, c, x, y)) <= 1e-14);
  }
}

TEST_CASE("bilinear_sample is channel-linear") {
  Rng rng(10);
  const auto a = testutil::random_input(rng, {1, 4, 3, 6});
  const auto b = testutil::random_input(rng, {1, 4, 3, 6});
  const double alpha = 0.7, beta = -1.3;
  Tensor mix(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) mix.data()[i] = alpha * a.data()[i] + beta * b.data()[i];
  for (int t = 0; t < 40; ++t) {
    const double x = rng.uniform(-2.0, 8.0), y = rng.uniform(-2.0, 5.0);
    const auto sa = bilinear_sample(a, 0, x, y), sb = bilinear_sample(b, 0, x, y);
    const auto sm = bilinear_sample(mix, 0, x, y);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(sm[c] - (alpha * sa[c] + beta * sb[c])) <= 1e-12);
  }
}

TEST_CASE("initializers") {
  const auto z = zeros<double>({1, 2, 2, 2});
  for (double v : z.data()) CHECK(v == 0.0);

  Rng rng(1);
  const auto g = random_gaussian<double>(rng, {1, 1, 1, 100000}, 0.0, 0.001);
  const double mean = std::accumulate(g.data().begin(), g.data().end(), 0.0) / g.size();
  double var = 0.0;
  for (double v : g.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / (g.size() - 1));
  CHECK(std::abs(sd - 0.001) <= 0.05 * 0.001);

  Rng r1(42), r2(42);
  CHECK(max_abs_diff(random_gaussian<double>(r1, {2, 3, 4, 4}, 0.0, 1.0),
                     random_gaussian<double>(r2, {2, 3, 4, 4}, 0.0, 1.0)) == 0.0);
  CHECK_THROWS_AS(random_gaussian<double>(r1, {1, 1, 1, 1}, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(random_gaussian<double>(r1, {1, 1, 1, 1}, 0.0, -1.0), ConfigError);

  auto spec = ConvSpec::zeros(16, 8, 3);
  random_xavier(rng, spec);
  const double bound = std::sqrt(6.0 / (16 * 9 + 8 * 9));
  double mx = 0.0;
  for (double v : spec.weights.data()) mx = std::max(mx, std::abs(v));
  CHECK(mx <= bound);
  CHECK(mx > 0.9 * bound);
  for (double b : spec.bias) CHECK(b == 0.0);
}

TEST_CASE("rng stream is the portable 64-bit Mersenne Twister") {
  Rng rng(5489);
  std::uint64_t v = 0;
  for (int i = 0; i < 10000; ++i) v = rng.next_u64();
  CHECK(v == 9981545732273789042ull);
  Rng a(7);
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    CHECK(a.below(5) < 5u);
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 2, 2}, std::vector<double>(3)), ShapeError);
  Tensor t({1, 1, 1, 2});
  t(0, 0, 0, 1) = std::nan("");
  CHECK_FALSE(t.all_finite());
  auto spec = ConvSpec::zeros(1, 1, 1);
  CHECK_THROWS_AS(conv2d(t, spec), NumericError);
}

TEST_CASE("parallel_for covers every index once for any cap") {
  for (int cap : {1, 2, 3, 8}) {
    ThreadCapScope scope(cap);
    std::vector<int> hits(1001, 0);
    parallel_for(hits.size(), [&](std::size_t i) { ++hits[i]; });
    for (int h : hits) CHECK(h == 1);
  }
}

}  // TEST_SUITE
