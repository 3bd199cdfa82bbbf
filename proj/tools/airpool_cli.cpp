// Copyright 2026 The AirPool Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// airpool: command-line driver for the AirPooling experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "airpool/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfigError = 2;

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::string> out;
  std::optional<unsigned> workers;
};

airpool::ExperimentConfig resolve(const std::string& path, airpool::ExperimentKind kind,
                                  bool kind_from_file, const Overrides& o) {
  airpool::ExperimentConfig c =
      path.empty() ? airpool::default_config(kind) : airpool::load_config(path);
  if (!path.empty() && !kind_from_file && c.kind != kind) {
    throw airpool::ConfigError(path + ": experiment.kind is '" + airpool::to_string(c.kind) +
                               "' but this subcommand runs '" + airpool::to_string(kind) + "'");
  }
  if (o.seed) c.seed = *o.seed;
  if (o.trials) c.trials = *o.trials;
  if (o.out) c.output_dir = *o.out;
  if (o.workers) c.workers = *o.workers;
  c.validate();
  return c;
}

void print_validation(const airpool::ExperimentResult& r) {
  std::printf("%-22s %-44s %14s %14s %12s  %s\n", "check", "setting", "measured", "bound",
              "margin", "result");
  for (const auto& row : r.rows) {
    const auto& tag = std::get<std::string>(row[0]);
    const auto& detail = std::get<std::string>(row[1]);
    std::printf("%-22s %-44s %14.6g %14.6g %12.4g  %s\n", tag.c_str(), detail.c_str(),
                std::get<double>(row[2]), std::get<double>(row[3]), std::get<double>(row[4]),
                std::get<std::int64_t>(row[5]) ? "pass" : "FAIL");
  }
}

int execute(const airpool::ExperimentConfig& c) {
  const airpool::ExperimentResult r = airpool::run_experiment(c);
  const auto files = airpool::write_result(r, c.output_dir);
  if (c.kind == airpool::ExperimentKind::BoundValidation) {
    print_validation(r);
  } else {
    std::cout << r.to_csv();
  }
  for (const auto& n : r.notes) std::cerr << n << '\n';
  std::cerr << "wrote " << files.csv.string() << ", " << files.svg.string() << ", "
            << files.meta.string() << '\n';
  return r.checks_passed ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AirPooling experiments: latency, error bounds, alpha selection, synthetic sensing"};
  app.require_subcommand(1);
  Overrides o;
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::string out;
  unsigned workers = 0;
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed")->group("Overrides");
  auto* trials_opt = app.add_option("--trials", trials, "Monte Carlo trials")->group("Overrides");
  auto* out_opt = app.add_option("--out", out, "output directory")->group("Overrides");
  auto* workers_opt =
      app.add_option("--workers", workers, "worker threads (0: available parallelism)")
          ->group("Overrides");

  std::string config_path;
  double fault_scale = 0.0;
  int q_bits = 0;
  std::string dataset_out;

  auto* run = app.add_subcommand("run", "run the experiment named in a configuration file");
  run->add_option("config", config_path, "configuration file")->required()->check(CLI::ExistingFile);
  auto* validate = app.add_subcommand("validate-bounds", "check error bounds and optimality properties");
  validate->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
  auto* fault_opt = validate->add_option("--fault-noise-scale", fault_scale,
                       "simulate with this multiple of the nominal noise power");
  auto* latency = app.add_subcommand("latency", "AirPooling vs digital air latency");
  latency->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
  auto* q_bits_opt = latency->add_option("--q-bits", q_bits, "quantization bits per feature");
  auto* optimize = app.add_subcommand("optimize-alpha", "closed-form, brute-force and calibrated alpha");
  optimize->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
  auto* train = app.add_subcommand("train-snn", "train the classifier and sweep SNR");
  train->add_option("--config", config_path, "configuration file")->check(CLI::ExistingFile);
  train->add_option("--save-dataset", dataset_out, "also write the generated dataset here");
  for (auto* sub : {run, validate, latency, optimize, train}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  if (*seed_opt) o.seed = seed;
  if (*trials_opt) o.trials = trials;
  if (*out_opt) o.out = out;
  if (*workers_opt) o.workers = workers;

  try {
    using airpool::ExperimentKind;
    airpool::ExperimentConfig c;
    if (*run) {
      c = resolve(config_path, ExperimentKind::LatencyTable, true, o);
    } else if (*validate) {
      c = resolve(config_path, ExperimentKind::BoundValidation, false, o);
      if (*fault_opt) c.fault_noise_scale = fault_scale;
    } else if (*latency) {
      c = resolve(config_path, ExperimentKind::LatencyTable, false, o);
      if (*q_bits_opt) c.q_bits = q_bits;
    } else if (*optimize) {
      c = resolve(config_path, ExperimentKind::AlphaOptimality, false, o);
    } else {
      c = resolve(config_path, ExperimentKind::SyntheticE2E, false, o);
      if (!dataset_out.empty()) {
        airpool::DatasetOptions d;
        d.k_views = static_cast<std::size_t>(c.system.k_sensors);
        d.n_features = static_cast<std::size_t>(c.system.n_features);
        d.mode = airpool::make_pooling_mode(c.pooling);
        std::ofstream f(dataset_out);
        if (!f) throw airpool::ConfigError("cannot write dataset to " + dataset_out);
        airpool::save_dataset(airpool::generate_dataset(c.dataset_size, c.seed, d), f);
      }
    }
    c.validate();
    return execute(c);
  } catch (const airpool::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const airpool::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}
