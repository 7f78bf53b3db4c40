/*
 * Copyright 2026 The openset Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// openset: generate data, train, evaluate, sweep lambda, dump curves.
//
// Exit codes: 0 success, 2 configuration / usage error, 3 numeric error,
// 4 I/O or parse error, 1 anything else.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "openset/config.hpp"
#include "openset/errors.hpp"
#include "openset/experiment.hpp"
#include "openset/metrics.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "Experiment config (JSON); defaults apply if omitted");
  cmd->add_option("--seed", opts.seed, "Override the root seed");
  cmd->add_option("--out", opts.out, "Override output_dir");
  cmd->add_option("--set", opts.overrides, "Override a config key, e.g. --set loss.lambda=0.5")
      ->take_all();
}

openset::ExperimentConfig resolve_config(const CommonOptions& opts) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.seed) overrides.push_back("seed=" + std::to_string(*opts.seed));
  if (opts.out) overrides.push_back("output_dir=\"" + *opts.out + "\"");
  if (opts.config_path.empty()) return openset::parse_config("{}", overrides);
  return openset::load_config(opts.config_path, overrides);
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const openset::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const openset::ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const openset::ContractError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const openset::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const openset::DomainError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const openset::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const openset::IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Open-set recognition toolkit"};
  app.set_version_flag("--version", std::string(openset::version_string()));
  app.require_subcommand(1);

  CommonOptions gen_opts, train_opts, eval_opts, sweep_opts;

  auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset bundle as CSV files");
  add_common(gen, gen_opts);

  auto* train = app.add_subcommand("train", "Train a model and write checkpoint + trace");
  add_common(train, train_opts);
  std::optional<std::string> resume;
  train->add_option("--resume", resume, "Continue from a checkpoint with training state");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the test sets");
  add_common(eval, eval_opts);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();

  auto* sweep = app.add_subcommand("sweep-lambda", "Train and evaluate one model per lambda");
  add_common(sweep, sweep_opts);
  std::vector<double> lambdas;
  std::vector<std::uint64_t> seeds;
  sweep->add_option("--lambdas", lambdas, "Comma-separated lambda values")
      ->required()
      ->delimiter(',');
  sweep->add_option("--seeds", seeds, "Comma-separated seeds (medians are reported)")
      ->delimiter(',');

  auto* curves = app.add_subcommand("curves", "Write P_I and P_H against anchor distance");
  int n = 128;
  double d_min = 0.0;
  double d_max = 20.0;
  std::size_t steps = 401;
  std::string curves_out = ".";
  curves->add_option("--n", n, "Latent dimension")->check(CLI::PositiveNumber);
  curves->add_option("--min", d_min, "Smallest distance");
  curves->add_option("--max", d_max, "Largest distance");
  curves->add_option("--steps", steps, "Number of rows");
  curves->add_option("--out", curves_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (gen->parsed()) {
    return guarded([&] {
      const auto cfg = resolve_config(gen_opts);
      openset::cmd_gen_data(cfg);
      std::cout << "wrote dataset bundle to " << cfg.output_dir << '\n';
    });
  }
  if (train->parsed()) {
    return guarded([&] {
      const auto cfg = resolve_config(train_opts);
      std::optional<std::filesystem::path> from;
      if (resume) from = *resume;
      const auto result = openset::cmd_train(cfg, from);
      const auto& last = result.trace().back();
      std::printf("trained %zu epochs: loss %.6g, train accuracy %.4f -> %s\n",
                  result.state.epochs_completed, last.loss_total, last.train_accuracy,
                  cfg.output_dir.c_str());
    });
  }
  if (eval->parsed()) {
    return guarded([&] {
      const auto cfg = resolve_config(eval_opts);
      const auto ev = openset::cmd_eval(cfg, checkpoint);
      std::cout << openset::report_to_json(ev.report);
    });
  }
  if (sweep->parsed()) {
    return guarded([&] {
      const auto cfg = resolve_config(sweep_opts);
      const auto rows = openset::cmd_sweep_lambda(cfg, lambdas, seeds);
      std::printf("%10s %10s %10s %10s\n", "lambda", "accuracy", "auroc", "oscr");
      for (const auto& r : rows) {
        std::printf("%10.4g %10.4f %10.4f %10.4f\n", r.lambda, r.accuracy, r.auroc, r.oscr);
      }
    });
  }
  if (curves->parsed()) {
    return guarded([&] {
      const auto path = openset::cmd_curves(n, d_min, d_max, steps, curves_out);
      std::cout << "wrote " << path.string() << '\n';
    });
  }
  return kExitConfig;
}
