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

#include "dlu/complexity.hpp"
#include "dlu/errors.hpp"

using namespace dlu;

namespace {

UpsampleConfig table_config(int sigma) { return {sigma, 5, 3, 64, 256}; }

}  // namespace

TEST_SUITE("complexity") {

TEST_CASE("parameter counts at the reference configuration") {
  const std::uint64_t carafe[] = {74148, 247248, 939648, 3709248};
  const std::uint64_t dlu[] = {35489, 49337, 104729, 326297};
  const char* carafe_display[] = {"74K", "247K", "939K", "3.7M"};
  const char* dlu_display[] = {"35K", "49K", "104K", "326K"};
  int i = 0;
  for (int sigma : {2, 4, 8, 16}) {
    const auto cfg = table_config(sigma);
    CHECK(param_count(Method::carafe, cfg) == carafe[i]);
    CHECK(param_count(Method::dlu, cfg) == dlu[i]);
    CHECK(audit_params(CarafeParams::zeros(cfg)) == carafe[i]);
    CHECK(audit_params(DluParams::zeros(cfg)) == dlu[i]);
    CHECK(display_count(carafe[i]) == carafe_display[i]);
    CHECK(display_count(dlu[i]) == dlu_display[i]);
    ++i;
  }
  CHECK(param_count(Method::nearest, table_config(8)) == 0);
  CHECK(param_count(Method::bilinear, table_config(2)) == 0);
  CHECK(param_count(Method::deconv, table_config(2)) == 262400);
  CHECK(display_count(param_count(Method::deconv, table_config(2))) == "262K");
  CHECK(display_count(param_count(Method::deconv, table_config(4))) == "1.0M");
  CHECK(param_count(Method::pixel_shuffle_up, table_config(2)) == 2360320);
  CHECK(display_count(param_count(Method::pixel_shuffle_up, table_config(2))) == "2.4M");
}

TEST_CASE("display rounding rule") {
  CHECK(display_count(0) == "0");
  CHECK(display_count(999) == "999");
  CHECK(display_count(1000) == "1K");
  CHECK(display_count(199496) == "199K");
  CHECK(display_count(999999) == "999K");
  CHECK(display_count(1000000) == "1.0M");
  CHECK(display_count(1049999) == "1.0M");
  CHECK(display_count(1050000) == "1.1M");
  CHECK(display_count(3709248) == "3.7M");
}

TEST_CASE("FLOP counts at sigma 2") {
  const auto cfg = table_config(2);
  const auto c = flop_count(Method::carafe, cfg, CostScope::full_op);
  CHECK(c.flops_numeric == 199496);
  CHECK(c.softmax_count == 4);
  CHECK(c.softmax_dim == 25);
  CHECK(display_flops(c) == "199K+4×(25-D sm)");
  const auto d = flop_count(Method::dlu, cfg, CostScope::full_op);
  CHECK(d.flops_numeric == 123078);
  CHECK(d.softmax_count == 1);
  CHECK(display_flops(d) == "123K+1×(25-D sm)");
  CHECK(flop_count(Method::carafe, cfg, CostScope::kernel_gen_only).flops_numeric == 32896 + 115400);
  CHECK(flop_count(Method::dlu, cfg, CostScope::kernel_gen_only).flops_numeric ==
        32896 + 28850 + 9232 + 900);
  CHECK(flop_count(Method::nearest, cfg, CostScope::full_op).flops_numeric == 0);
  CHECK(display_flops(flop_count(Method::bilinear, cfg, CostScope::full_op)) == "9K");
  CHECK(display_flops(flop_count(Method::deconv, cfg, CostScope::full_op)) == "1.2M");
  CHECK(display_flops(flop_count(Method::pixel_shuffle_up, cfg, CostScope::full_op)) == "4.7M");
  CHECK(softmax_flops_estimate(c) == doctest::Approx(4 * 3 * 25));
}

TEST_CASE("measure_flops matches the closed form") {
  const auto cfg = table_config(2);
  const auto d = measure_flops(Method::dlu, cfg);
  CHECK(d.flops_per_pixel == 123078);
  CHECK(d.softmax_per_pixel == 1);
  CHECK(d.softmax_dim == 25);
  CHECK(measure_flops(Method::carafe, cfg).flops_per_pixel == 199496);
  CHECK(measure_flops(Method::carafe, cfg).softmax_per_pixel == 4);
  CHECK(measure_flops(Method::nearest, cfg).flops_per_pixel == 0);
  CHECK(measure_flops(Method::bilinear, cfg).flops_per_pixel ==
        flop_count(Method::bilinear, cfg, CostScope::full_op).flops_numeric);
  CHECK_THROWS_AS(measure_flops(Method::deconv, cfg), ConfigError);
}

TEST_CASE("headline reductions at sigma 16") {
  const auto cfg = table_config(16);
  const double p = 1.0 - static_cast<double>(param_count(Method::dlu, cfg)) /
                             static_cast<double>(param_count(Method::carafe, cfg));
  const double f =
      1.0 - static_cast<double>(flop_count(Method::dlu, cfg, CostScope::kernel_gen_only).flops_numeric) /
                static_cast<double>(flop_count(Method::carafe, cfg, CostScope::kernel_gen_only).flops_numeric);
  CHECK(p >= 0.91);
  CHECK(f >= 0.63);
}

TEST_CASE("audit, lightness and measurement over the configuration grid") {
  int points = 0;
  for (int sigma : {2, 4, 8, 16})
    for (int k_up : {3, 5, 7})
      for (int k_enc : {1, 3, 5})
        for (int c_mid : {32, 64, 128, 256}) {
          const UpsampleConfig cfg{sigma, k_up, k_enc, c_mid, 256};
          CAPTURE(cfg.str());
          const auto pc = param_count(Method::carafe, cfg), pd = param_count(Method::dlu, cfg);
          CHECK(audit_params(BasicCarafeParams<float>::zeros(cfg)) == pc);
          CHECK(audit_params(BasicDluParams<float>::zeros(cfg)) == pd);
          CHECK(pd < pc);
          for (auto scope : {CostScope::kernel_gen_only, CostScope::full_op}) {
            CHECK(flop_count(Method::dlu, cfg, scope).flops_numeric <
                  flop_count(Method::carafe, cfg, scope).flops_numeric);
          }
          CHECK(measure_flops(Method::dlu, cfg, 2, 2).flops_per_pixel ==
                flop_count(Method::dlu, cfg, CostScope::full_op).flops_numeric);
          CHECK(measure_flops(Method::carafe, cfg, 1, 2).flops_per_pixel ==
                flop_count(Method::carafe, cfg, CostScope::full_op).flops_numeric);
          ++points;
        }
  CHECK(points == 144);
}

TEST_CASE("method and scope parsing") {
  CHECK(parse_method("dlu") == Method::dlu);
  CHECK(parse_method("pixel_shuffle_up") == Method::pixel_shuffle_up);
  CHECK(parse_scope("kernel_gen_only") == CostScope::kernel_gen_only);
  CHECK_THROWS_AS(parse_method("bicubic"), ConfigError);
  CHECK_THROWS_AS(parse_scope("everything"), ConfigError);
}

TEST_CASE("report serialization") {
  const auto r = flop_count(Method::dlu, table_config(2), CostScope::full_op);
  const auto j = to_json(r);
  CHECK(j["params"] == 35489);
  CHECK(j["flops_numeric"] == 123078);
  CHECK(j["params_display"] == "35K");
  CHECK(j["scope"] == "full_op");
  CHECK(cost_csv_header().rfind("method,sigma,k_up,k_encoder,c_mid,c_in,params,flops_numeric,", 0) == 0);
  CHECK(to_csv_row(r).rfind("dlu,2,5,3,64,256,35489,123078,1,25,full_op,35K,", 0) == 0);
}

}  // TEST_SUITE
