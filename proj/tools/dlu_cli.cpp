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


// dlu: cost tables, gradient/property checks, micro-benchmarks and training demos.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dlu/check_suite.hpp"
#include "dlu/complexity.hpp"
#include "dlu/errors.hpp"
#include "dlu/gradients.hpp"
#include "dlu/parallel.hpp"
#include "dlu/serialize.hpp"
#include "dlu/training.hpp"

namespace {

using nlohmann::json;
using namespace dlu;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;

struct GridPoint {
  UpsampleConfig config;
  int height = 16;
  int width = 16;
};

struct RunConfig {
  std::string subcommand;
  std::vector<Method> methods;
  std::vector<GridPoint> grid;
  CostScope scope = CostScope::full_op;
  int repetitions = 5;
  int warmup = 1;
  int batch = 1;
  std::string precision = "float32";
  std::string out;
  std::string format = "csv";
  std::uint64_t seed = 1;
  json check;  // overrides for CheckSuiteConfig
  json train;  // task / optimizer / model sections
};

// Built-in defaults; a config file is merged over these, then flags over that.
json default_config(const std::string& sub) {
  json grid = {{"sigma", {2}},     {"k_up", {5}}, {"k_encoder", {3}},
               {"c_mid", {64}},    {"c_in", {256}},
               {"input_size", {{16, 16}}}};
  json j = {{"methods", {"carafe", "dlu"}},
            {"grid", grid},
            {"scope", "full_op"},
            {"repetitions", 5},
            {"warmup", 1},
            {"batch", 1},
            {"precision", "float32"},
            {"out", ""},
            {"format", "csv"},
            {"seed", 1},
            {"check", json::object()},
            {"train", json::object()}};
  if (sub == "cost") {
    j["methods"] = {"nearest", "bilinear", "deconv", "pixel_shuffle_up", "carafe", "dlu"};
  } else if (sub == "check") {
    j["grid"] = {{"sigma", {2}}, {"k_up", {3}}, {"k_encoder", {3}},
                 {"c_mid", {4}}, {"c_in", {3}}, {"input_size", {{5, 5}}}};
  } else if (sub == "bench") {
    j["grid"]["input_size"] = {{32, 32}};
  } else if (sub == "train") {
    j["methods"] = {"dlu"};
  }
  return j;
}

[[noreturn]] void config_error(const std::string& msg) { throw ConfigError(msg); }

template <typename V>
std::vector<V> int_list(const json& node, const char* key) {
  if (!node.contains(key)) config_error(std::string("config: grid.") + key + " missing");
  const auto& v = node.at(key);
  std::vector<V> out;
  if (v.is_number_integer()) {
    out.push_back(v.get<V>());
  } else if (v.is_array()) {
    for (const auto& e : v) {
      if (!e.is_number_integer()) config_error(std::string("config: grid.") + key + " must hold integers");
      out.push_back(e.get<V>());
    }
  } else {
    config_error(std::string("config: grid.") + key + " must be an integer or a list");
  }
  if (out.empty()) config_error(std::string("config: grid.") + key + " is empty");
  return out;
}

std::vector<GridPoint> expand_grid(const json& g) {
  if (!g.is_object()) config_error("config: grid must be an object");
  const auto sigmas = int_list<int>(g, "sigma");
  const auto kups = int_list<int>(g, "k_up");
  const auto kencs = int_list<int>(g, "k_encoder");
  const auto cmids = int_list<int>(g, "c_mid");
  const auto cins = int_list<int>(g, "c_in");
  std::vector<std::pair<int, int>> sizes;
  const auto& s = g.contains("input_size") ? g.at("input_size") : json::array({{16, 16}});
  if (!s.is_array() || s.empty()) config_error("config: grid.input_size must be a non-empty list");
  for (const auto& e : s) {
    if (e.is_number_integer()) {
      sizes.emplace_back(e.get<int>(), e.get<int>());
    } else if (e.is_array() && e.size() == 2 && e[0].is_number_integer() && e[1].is_number_integer()) {
      sizes.emplace_back(e[0].get<int>(), e[1].get<int>());
    } else {
      config_error("config: grid.input_size entries must be N or [h, w]");
    }
    if (sizes.back().first < 1 || sizes.back().second < 1) config_error("config: empty input size");
  }
  std::vector<GridPoint> out;
  for (int c_in : cins)
    for (int c_mid : cmids)
      for (int k_enc : kencs)
        for (int k_up : kups)
          for (int sigma : sigmas)
            for (auto [h, w] : sizes) {
              GridPoint p{{sigma, k_up, k_enc, c_mid, c_in}, h, w};
              p.config.validate();
              out.push_back(p);
            }
  return out;
}

RunConfig parse_run_config(const std::string& sub, const json& file_cfg) {
  json j = default_config(sub);
  if (!file_cfg.is_null()) {
    if (!file_cfg.is_object()) config_error("config: top level must be an object");
    for (auto it = file_cfg.begin(); it != file_cfg.end(); ++it) {
      if (!j.contains(it.key())) config_error("config: unknown key '" + it.key() + "'");
      if (it.key() == "grid" && it->is_object()) {
        for (auto g = it->begin(); g != it->end(); ++g) {
          if (!j["grid"].contains(g.key())) config_error("config: unknown grid key '" + g.key() + "'");
          j["grid"][g.key()] = *g;
        }
      } else {
        j[it.key()] = *it;
      }
    }
  }

  RunConfig rc;
  rc.subcommand = sub;
  try {
    if (!j["methods"].is_array()) config_error("config: methods must be a list");
    for (const auto& m : j["methods"]) rc.methods.push_back(parse_method(m.get<std::string>()));
    rc.grid = expand_grid(j["grid"]);
    rc.scope = parse_scope(j["scope"].get<std::string>());
    rc.repetitions = j["repetitions"].get<int>();
    rc.warmup = j["warmup"].get<int>();
    rc.batch = j["batch"].get<int>();
    rc.precision = j["precision"].get<std::string>();
    rc.out = j["out"].get<std::string>();
    rc.format = j["format"].get<std::string>();
    rc.seed = j["seed"].get<std::uint64_t>();
    rc.check = j["check"];
    rc.train = j["train"];
  } catch (const json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
  if (rc.repetitions < 1) config_error("config: repetitions must be >= 1");
  if (rc.warmup < 0) config_error("config: warmup must be >= 0");
  if (rc.batch < 1) config_error("config: batch must be >= 1");
  if (rc.precision != "float32" && rc.precision != "float64") {
    config_error("config: precision must be float32 or float64");
  }
  return rc;
}

void finalize(RunConfig& rc) {
  if (rc.methods.empty()) config_error("config: method list is empty");
  if (rc.grid.empty()) config_error("config: grid is empty");
  if (rc.format != "csv" && rc.format != "json") config_error("config: format must be csv or json");
}

void emit(const RunConfig& rc, const std::string& text) {
  if (rc.out.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(rc.out, std::ios::binary);
  if (!f) config_error("cannot open output file '" + rc.out + "'");
  f << text;
}

// ---- cost ------------------------------------------------------------------

int cmd_cost(const RunConfig& rc) {
  std::vector<CostReport> rows;
  for (const auto& p : rc.grid) {
    for (Method m : rc.methods) rows.push_back(flop_count(m, p.config, rc.scope));
  }
  if (rc.format == "json") {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    emit(rc, json{{"format", "dlu-cost"}, {"version", 1}, {"rows", arr}}.dump(2) + "\n");
  } else {
    std::string text = "# dlu-cost v1\n" + cost_csv_header() + "\n";
    for (const auto& r : rows) text += to_csv_row(r) + "\n";
    emit(rc, text);
  }
  return kExitOk;
}

// ---- check -----------------------------------------------------------------

const GridPoint& smallest(const std::vector<GridPoint>& grid) {
  const auto key = [](const GridPoint& p) {
    const auto& c = p.config;
    return std::make_tuple(static_cast<long long>(c.c_in) * c.c_mid * c.k_up * c.k_encoder * c.sigma *
                               p.height * p.width,
                           c.c_in, c.c_mid, c.k_up, c.k_encoder, c.sigma, p.height, p.width);
  };
  return *std::min_element(grid.begin(), grid.end(),
                           [&](const auto& a, const auto& b) { return key(a) < key(b); });
}

CheckSuiteConfig suite_config(const RunConfig& rc) {
  CheckSuiteConfig cfg;
  const auto& p = smallest(rc.grid);
  cfg.config = p.config;
  cfg.height = p.height;
  cfg.width = p.width;
  cfg.seed = rc.seed;
  const json& o = rc.check;
  if (!o.is_object()) config_error("config: check must be an object");
  try {
    for (auto it = o.begin(); it != o.end(); ++it) {
      const auto& k = it.key();
      if (k == "batch") cfg.batch = it->get<int>();
      else if (k == "epsilon") cfg.epsilon = it->get<double>();
      else if (k == "probes") cfg.probes = it->get<std::size_t>();
      else if (k == "rel_floor") cfg.rel_floor = it->get<double>();
      else if (k == "single_op_tolerance") cfg.single_op_tolerance = it->get<double>();
      else if (k == "end_to_end_tolerance") cfg.end_to_end_tolerance = it->get<double>();
      else if (k == "normalization_samples") cfg.normalization_samples = it->get<int>();
      else config_error("config: unknown check key '" + k + "'");
    }
  } catch (const json::exception& e) {
    config_error(std::string("config: check: ") + e.what());
  }
  if (cfg.batch < 1 || cfg.probes < 1 || !(cfg.epsilon > 0.0)) {
    config_error("config: check needs batch >= 1, probes >= 1, epsilon > 0");
  }
  return cfg;
}

int cmd_check(const RunConfig& rc) {
  const auto cfg = suite_config(rc);
  const auto result = run_check_suite(cfg);
  if (rc.format == "json") {
    json j = result.to_json();
    j["config"] = cfg.config.str();
    emit(rc, j.dump(2) + "\n");
  } else {
    std::ostringstream os;
    os.precision(6);
    os << "# dlu-check v1 " << cfg.config.str() << "\n";
    os << "kind,name,max_abs_err,max_rel_err,tolerance,probes,passed,detail\n";
    for (const auto& g : result.gradients) {
      os << "gradient," << g.report.op << ',' << g.report.max_abs_err << ','
         << g.report.max_rel_err << ',' << g.tolerance << ',' << g.report.num_probes << ','
         << (g.passed ? "true" : "false") << ",\n";
    }
    for (const auto& p : result.properties) {
      os << "property," << p.name << ",,,,," << (p.passed ? "true" : "false") << ",\""
         << p.detail << "\"\n";
    }
    emit(rc, os.str());
  }
  for (const auto& f : result.failures()) std::cerr << "FAILED: " << f << "\n";
  return result.passed() ? kExitOk : kExitCheckFailed;
}

// ---- bench -----------------------------------------------------------------

template <typename T>
BasicConvSpec<T> as(const ConvSpec& s) {
  return s.template cast<T>();
}

struct Timing {
  std::vector<double> ms;
  std::vector<std::uint64_t> checksums;
};

template <typename T>
Timing time_method(Method method, const GridPoint& p, const RunConfig& rc) {
  const auto& cfg = p.config;
  Rng rng(rc.seed);
  const auto input =
      random_uniform<double>(rng, {rc.batch, cfg.c_in, p.height, p.width}, -1.0, 1.0).cast<T>();
  BasicDluParams<T> dlu;
  BasicCarafeParams<T> carafe;
  if (method == Method::dlu) {
    auto d = init_dlu_params(cfg, rng);
    // Zero offsets would hide the sampling cost behind integer coordinates.
    random_gaussian_weights(rng, d.offset_predictor, 0.01);
    dlu = {as<T>(d.compressor), as<T>(d.space_generator), as<T>(d.offset_predictor)};
  } else if (method == Method::carafe) {
    auto c = init_carafe_params(cfg, rng);
    carafe = {as<T>(c.compressor), as<T>(c.kernel_generator)};
  }
  const auto run = [&]() -> BasicTensor<T> {
    switch (method) {
      case Method::nearest: return nearest_upsample(input, cfg.sigma);
      case Method::bilinear: return bilinear_upsample(input, cfg.sigma);
      case Method::carafe: return carafe_forward(input, carafe, cfg);
      case Method::dlu: return dlu_forward(input, dlu, cfg);
      default: config_error("bench: no operator for method " + std::string(to_string(method)));
    }
  };
  Timing t;
  for (int i = 0; i < rc.warmup; ++i) run();
  for (int i = 0; i < rc.repetitions; ++i) {
    const auto start = std::chrono::steady_clock::now();
    const auto out = run();
    const auto stop = std::chrono::steady_clock::now();
    t.ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
    t.checksums.push_back(checksum(out));
  }
  return t;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int cmd_bench(const RunConfig& rc) {
  for (Method m : rc.methods) {
    if (m == Method::deconv || m == Method::pixel_shuffle_up) {
      config_error("bench: method " + std::string(to_string(m)) + " is cost-model only");
    }
  }
  json rows = json::array();
  bool consistent = true;
  for (const auto& p : rc.grid) {
    for (Method m : rc.methods) {
      const Timing t = rc.precision == "float32" ? time_method<float>(m, p, rc)
                                                 : time_method<double>(m, p, rc);
      const double med = median(t.ms);
      std::vector<double> dev;
      for (double x : t.ms) dev.push_back(std::abs(x - med));
      const bool same = std::all_of(t.checksums.begin(), t.checksums.end(),
                                    [&](auto c) { return c == t.checksums.front(); });
      consistent = consistent && same;
      const auto& c = p.config;
      rows.push_back({{"method", to_string(m)},
                      {"sigma", c.sigma},
                      {"k_up", c.k_up},
                      {"k_encoder", c.k_encoder},
                      {"c_mid", c.c_mid},
                      {"c_in", c.c_in},
                      {"height", p.height},
                      {"width", p.width},
                      {"batch", rc.batch},
                      {"repetitions", rc.repetitions},
                      {"warmup", rc.warmup},
                      {"median_ms", med},
                      {"mad_ms", median(dev)},
                      {"min_ms", *std::min_element(t.ms.begin(), t.ms.end())},
                      {"max_ms", *std::max_element(t.ms.begin(), t.ms.end())},
                      {"threads", max_threads()},
                      {"precision", rc.precision},
                      {"checksum", t.checksums.front()},
                      {"checksums_consistent", same}});
    }
  }
  if (rc.format == "json") {
    emit(rc, json{{"format", "dlu-bench"}, {"version", 1}, {"rows", rows}}.dump(2) + "\n");
  } else {
    static const char* cols[] = {"method", "sigma", "k_up", "k_encoder", "c_mid", "c_in",
                                 "height", "width", "batch", "repetitions", "warmup",
                                 "median_ms", "mad_ms", "min_ms", "max_ms", "threads",
                                 "precision", "checksum", "checksums_consistent"};
    std::ostringstream os;
    os << "# dlu-bench v1\n";
    for (std::size_t i = 0; i < std::size(cols); ++i) os << (i ? "," : "") << cols[i];
    os << "\n";
    for (const auto& r : rows) {
      for (std::size_t i = 0; i < std::size(cols); ++i) {
        const auto& v = r[cols[i]];
        os << (i ? "," : "") << (v.is_string() ? v.get<std::string>() : v.dump());
      }
      os << "\n";
    }
    emit(rc, os.str());
  }
  if (!consistent) std::cerr << "bench: output checksums differ across repetitions\n";
  return consistent ? kExitOk : kExitCheckFailed;
}

// ---- train -----------------------------------------------------------------

template <typename F>
void read_fields(const json& node, const char* section, F&& apply) {
  if (node.is_null()) return;
  if (!node.is_object()) config_error(std::string("config: train.") + section + " must be an object");
  try {
    for (auto it = node.begin(); it != node.end(); ++it) {
      if (!apply(it.key(), *it)) {
        config_error(std::string("config: unknown train.") + section + " key '" + it.key() + "'");
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("config: train.") + section + ": " + e.what());
  }
}

int cmd_train(const RunConfig& rc) {
  SynthTask task;
  TrainConfig tc;
  tc.seed = rc.seed;
  UpsampleConfig base = rc.grid.front().config;
  const json& t = rc.train;
  if (!t.is_object()) config_error("config: train must be an object");
  for (auto it = t.begin(); it != t.end(); ++it) {
    if (it.key() != "task" && it.key() != "optimizer") {
      config_error("config: unknown train key '" + it.key() + "'");
    }
  }
  read_fields(t.value("task", json()), "task", [&](const std::string& k, const json& v) {
    if (k == "seed") task.seed = v.get<std::uint64_t>();
    else if (k == "height") task.height = v.get<int>();
    else if (k == "width") task.width = v.get<int>();
    else if (k == "channels") task.channels = v.get<int>();
    else if (k == "sigma") task.sigma = v.get<int>();
    else if (k == "modes") task.modes = v.get<int>();
    else if (k == "max_frequency") task.max_frequency = v.get<double>();
    else if (k == "rule") {
      const auto r = v.get<std::string>();
      if (r == "known_highres") task.rule = TargetRule::known_highres;
      else if (r == "bilinear_of_highres") task.rule = TargetRule::bilinear_of_highres;
      else config_error("config: unknown target rule '" + r + "'");
    } else return false;
    return true;
  });
  read_fields(t.value("optimizer", json()), "optimizer", [&](const std::string& k, const json& v) {
    if (k == "learning_rate") tc.learning_rate = v.get<double>();
    else if (k == "momentum") tc.momentum = v.get<double>();
    else if (k == "weight_decay") tc.weight_decay = v.get<double>();
    else if (k == "steps") tc.steps = v.get<int>();
    else if (k == "batch_size") tc.batch_size = v.get<int>();
    else if (k == "eval_interval") tc.eval_interval = v.get<int>();
    else if (k == "eval_size") tc.eval_size = v.get<int>();
    else return false;
    return true;
  });

  std::string csv;
  json results = json::array();
  for (Method m : rc.methods) {
    const auto r = train(task, m, tc, base);
    std::cerr << to_string(m) << ": eval mse " << r.initial_eval << " -> " << r.final_eval
              << " (nearest " << r.nearest_eval << ", bilinear " << r.bilinear_eval << ")\n";
    std::cout << "final_eval_mse " << to_string(m) << ' ' << r.final_eval << "\n";
    csv += loss_curve_csv(r);
    json curve = json::array();
    for (const auto& pt : r.curve) {
      curve.push_back({{"step", pt.step}, {"train_loss", pt.train_loss}, {"eval_loss", pt.eval_loss}});
    }
    results.push_back({{"method", to_string(m)},
                       {"config", r.config.str()},
                       {"initial_eval", r.initial_eval},
                       {"final_eval", r.final_eval},
                       {"nearest_eval", r.nearest_eval},
                       {"bilinear_eval", r.bilinear_eval},
                       {"curve", curve}});
  }
  if (rc.out.empty() && rc.format == "csv") return kExitOk;  // summary already on stdout
  if (rc.format == "json") {
    emit(rc, json{{"format", "dlu-train"}, {"version", 1}, {"runs", results}}.dump(2) + "\n");
  } else {
    emit(rc, csv);
  }
  return kExitOk;
}

std::optional<int> threads_from_env() {
  const char* v = std::getenv("DLU_THREADS");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) config_error(std::string("DLU_THREADS must be a positive integer, got '") + v + "'");
  return static_cast<int>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic lightweight upsampling toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, format;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> methods;
  bool methods_given = false;
  std::string fault;

  std::vector<CLI::App*> subs;
  for (const char* name : {"cost", "check", "bench", "train"}) {
    static const std::map<std::string, std::string> help = {
        {"cost", "Parameter and FLOP report per (method, config)"},
        {"check", "Finite-difference and property checks"},
        {"bench", "Wall-clock forward benchmarks"},
        {"train", "Train on the synthetic upsampling task"}};
    auto* s = app.add_subcommand(name, help.at(name));
    s->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    s->add_option("--out", out, "Output path (stdout when omitted)");
    s->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    s->add_option("--seed", seed, "Random seed");
    s->add_option("--threads", threads, "Cap on worker threads")->check(CLI::PositiveNumber);
    s->add_option("--methods", methods, "Override the method list (comma separated)")
        ->delimiter(',')
        ->each([&](const std::string&) { methods_given = true; });
    subs.push_back(s);
  }
  subs[1]->add_option("--inject-fault", fault, "Negate one op's gradient (test hook)")
      ->check(CLI::IsMember({"conv2d", "softmax", "reassemble", "expand", "dlu", "carafe"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    std::string sub;
    for (auto* s : subs) {
      if (s->parsed()) sub = s->get_name();
    }
    json file_cfg;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      try {
        file_cfg = json::parse(f);
      } catch (const json::parse_error& e) {
        config_error(std::string("config: ") + e.what());
      }
    }
    RunConfig rc = parse_run_config(sub, file_cfg);
    if (!out.empty()) rc.out = out;
    if (!format.empty()) rc.format = format;
    if (seed) rc.seed = *seed;
    if (methods_given) {
      rc.methods.clear();
      for (const auto& m : methods) {
        if (!m.empty()) rc.methods.push_back(parse_method(m));
      }
    }
    finalize(rc);

    if (threads) {
      set_max_threads(*threads);
    } else if (auto env = threads_from_env()) {
      set_max_threads(*env);
    }
    if (!fault.empty()) testing::inject_gradient_sign_fault(fault);

    if (sub == "cost") return cmd_cost(rc);
    if (sub == "check") return cmd_check(rc);
    if (sub == "bench") return cmd_bench(rc);
    return cmd_train(rc);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const TrainingDiverged& e) {
    std::cerr << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
}
