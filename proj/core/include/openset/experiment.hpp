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

// Experiment plumbing shared by the command-line tool and the tests: data
// loading, scoring, evaluation, the lambda sweep, probability curves, and
// the artifact-writing commands.
//
// Artifacts (all under config.output_dir unless stated otherwise):
//   gen-data      train_known.csv background.csv val_known.csv test_known.csv
//                 test_unknown.csv manifest_gen_data.json
//   train         checkpoint.txt trace.csv manifest_train.json
//                 checkpoint_epoch_<k>.txt every optim.checkpoint_every epochs
//   eval          report.json scores.csv oscr_curve.csv manifest_eval.json
//   sweep-lambda  sweep_lambda.csv sweep_lambda_runs.csv manifest_sweep_lambda.json
//   curves        curves_n<n>.csv
//
// Manifests carry a "timestamp_utc" field; every other byte of every
// artifact is a function of the config alone.

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "openset/config.hpp"
#include "openset/data.hpp"
#include "openset/metrics.hpp"
#include "openset/model.hpp"
#include "openset/trainer.hpp"

namespace openset {

// Build-time version, "git describe" style.
const char* version_string();

// Synthetic bundle from the config, or the configured CSV files.
DatasetBundle load_bundle(const ExperimentConfig& config);

Model initial_model(const ExperimentConfig& config, const DatasetBundle& bundle);

TrainResult run_training(const ExperimentConfig& config, const DatasetBundle& bundle,
                         const Checkpoint* resume = nullptr, const TrainHooks& hooks = {});

// Acceptance scores of every row.
std::vector<double> score_rows(const Model& model, const Dataset& data);

// test_known followed by test_unknown.
std::vector<ScoredSample> score_test_set(const Model& model, const DatasetBundle& bundle);

// Threshold for macro-F1 according to config.eval.
double select_f1_threshold(const ExperimentConfig& config, const Model& model,
                           const DatasetBundle& bundle);

struct Evaluation {
  std::vector<ScoredSample> samples;
  MetricReport report;
};

Evaluation evaluate(const ExperimentConfig& config, const Model& model,
                    const DatasetBundle& bundle);

struct SweepRow {
  double lambda = 0.0;
  // Medians over the seeds.
  double accuracy = 0.0;
  double auroc = 0.0;
  double oscr = 0.0;
  std::vector<MetricReport> runs;  // one per seed, in seed order
};

// Trains and evaluates one model per (lambda, seed); rows follow the order
// of lambdas. An empty seed list means {config.seed}.
std::vector<SweepRow> sweep_lambda(const ExperimentConfig& config,
                                   const std::vector<double>& lambdas,
                                   const std::vector<std::uint64_t>& seeds = {});

// Columns distance, p_inclusion, p_hsc for distances evenly spaced over
// [d_min, d_max]: P_I = Q(n/2, d^2/2) and P_H = exp(-h(d^2)).
struct CurvePoint {
  double distance;
  double p_inclusion;
  double p_hsc;
};
std::vector<CurvePoint> probability_curves(int n, double d_min, double d_max, std::size_t steps);
std::string curves_to_csv(const std::vector<CurvePoint>& points);

double median(std::vector<double> values);

// ---- artifact-writing commands ---------------------------------------------

void cmd_gen_data(const ExperimentConfig& config);
TrainResult cmd_train(const ExperimentConfig& config,
                      const std::optional<std::filesystem::path>& resume = std::nullopt);
Evaluation cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint);
std::vector<SweepRow> cmd_sweep_lambda(const ExperimentConfig& config,
                                       const std::vector<double>& lambdas,
                                       const std::vector<std::uint64_t>& seeds = {});
std::filesystem::path cmd_curves(int n, double d_min, double d_max, std::size_t steps,
                                 const std::filesystem::path& out_dir);

// Writes text atomically enough for our purposes: truncate, write, check.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace openset
