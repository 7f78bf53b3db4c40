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

#include "openset/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "openset/checkpoint.hpp"
#include "openset/errors.hpp"
#include "openset/special.hpp"

#ifndef OPENSET_VERSION_STRING
#define OPENSET_VERSION_STRING "unknown"
#endif

namespace openset {

using nlohmann::ordered_json;

namespace {

std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::filesystem::path ensure_output_dir(const ExperimentConfig& config) {
  const std::filesystem::path dir(config.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_manifest(const std::filesystem::path& path, const std::string& command,
                    const ExperimentConfig& config, ordered_json extra) {
  ordered_json m;
  m["command"] = command;
  m["version"] = version_string();
  m["seed"] = config.seed;
  m["config"] = ordered_json::parse(config_to_json(config));
  for (auto it = extra.begin(); it != extra.end(); ++it) m[it.key()] = it.value();
  m["timestamp_utc"] = utc_timestamp();
  write_text(path, m.dump(2) + "\n");
}

void check_model_matches(const Model& model, const DatasetBundle& bundle) {
  if (model.input_dim() != bundle.train_known.dim() && !bundle.train_known.empty()) {
    throw ConfigError("checkpoint expects input dimension " + std::to_string(model.input_dim()) +
                      " but the data has " + std::to_string(bundle.train_known.dim()));
  }
  if (model.num_classes() != bundle.num_classes()) {
    throw ConfigError("checkpoint has " + std::to_string(model.num_classes()) +
                      " classes but the data has " + std::to_string(bundle.num_classes()));
  }
}

}  // namespace

const char* version_string() { return OPENSET_VERSION_STRING; }

DatasetBundle load_bundle(const ExperimentConfig& config) {
  if (config.source == DataSource::kSynthetic) return generate(config.synthetic_spec());

  const CsvSources& src = config.csv;
  DatasetBundle bundle;
  CsvSchema labeled{std::nullopt, true, src.num_classes};
  bundle.train_known = load_csv(src.train_known, labeled);
  labeled.expected_dim = bundle.train_known.dim();
  CsvSchema unlabeled{bundle.train_known.dim(), false, std::nullopt};
  if (!src.background.empty()) bundle.background = load_csv(src.background, unlabeled);
  if (!src.val_known.empty()) bundle.val_known = load_csv(src.val_known, labeled);
  bundle.test_known = load_csv(src.test_known, labeled);
  const Dataset unknown = load_csv(src.test_unknown, unlabeled);
  bundle.test_unknown = Dataset::unlabeled(unknown.dim(), unknown.features());
  for (std::size_t c = 0; c < src.num_classes; ++c) bundle.kkc_classes.push_back(c);
  return bundle;
}

Model initial_model(const ExperimentConfig& config, const DatasetBundle& bundle) {
  return Model::initialize(config.model_spec(bundle.train_known.dim(), bundle.num_classes()),
                           config.seed);
}

TrainResult run_training(const ExperimentConfig& config, const DatasetBundle& bundle,
                         const Checkpoint* resume, const TrainHooks& hooks) {
  if (resume) {
    if (!resume->training) {
      throw ConfigError("checkpoint carries no training state and cannot be resumed");
    }
    check_model_matches(resume->model, bundle);
    if (resume->model.head_type() != config.head()) {
      throw ConfigError("checkpoint head does not match model.head");
    }
    return train(bundle, resume->model, config.loss, config.optim_config(), &*resume->training,
                 hooks);
  }
  return train(bundle, initial_model(config, bundle), config.loss, config.optim_config(), nullptr,
               hooks);
}

std::vector<double> score_rows(const Model& model, const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(model.score(model.latent(data.row(i))));
  return out;
}

std::vector<ScoredSample> score_test_set(const Model& model, const DatasetBundle& bundle) {
  std::vector<ScoredSample> out;
  out.reserve(bundle.test_known.size() + bundle.test_unknown.size());
  for (std::size_t i = 0; i < bundle.test_known.size(); ++i) {
    const auto z = model.latent(bundle.test_known.row(i));
    out.push_back({model.score(z), model.predict(z), bundle.test_known.label(i), true});
  }
  for (std::size_t i = 0; i < bundle.test_unknown.size(); ++i) {
    const auto z = model.latent(bundle.test_unknown.row(i));
    out.push_back({model.score(z), model.predict(z), model.num_classes(), false});
  }
  return out;
}

double select_f1_threshold(const ExperimentConfig& config, const Model& model,
                           const DatasetBundle& bundle) {
  if (config.eval.f1_policy == F1Policy::kFixed) return config.eval.f1_value;
  if (bundle.val_known.empty()) {
    throw ConfigError("eval.f1_threshold.policy val_accept needs a non-empty validation split");
  }
  return acceptance_threshold(score_rows(model, bundle.val_known), config.eval.f1_accept_fraction);
}

Evaluation evaluate(const ExperimentConfig& config, const Model& model,
                    const DatasetBundle& bundle) {
  check_model_matches(model, bundle);
  Evaluation out;
  out.samples = score_test_set(model, bundle);
  const double tau = select_f1_threshold(config, model, bundle);
  out.report = compute_report(out.samples, model.num_classes(), tau,
                              {config.eval.fpr_target, config.eval.tpr_target});
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ContractError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<SweepRow> sweep_lambda(const ExperimentConfig& config,
                                   const std::vector<double>& lambdas,
                                   const std::vector<std::uint64_t>& seeds) {
  if (lambdas.empty()) throw ConfigError("sweep-lambda needs at least one lambda");
  const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector{config.seed} : seeds;
  std::vector<SweepRow> rows;
  for (double lambda : lambdas) {
    ExperimentConfig cfg = config;
    cfg.loss.lambda = lambda;
    cfg.validate();
    SweepRow row;
    row.lambda = lambda;
    std::vector<double> acc, auc, oscr;
    for (std::uint64_t seed : seed_list) {
      cfg.seed = seed;
      const DatasetBundle bundle = load_bundle(cfg);
      const TrainResult trained = run_training(cfg, bundle);
      const Evaluation ev = evaluate(cfg, trained.model, bundle);
      row.runs.push_back(ev.report);
      acc.push_back(ev.report.accuracy);
      auc.push_back(ev.report.auroc);
      oscr.push_back(ev.report.oscr_ccr_at_fpr);
    }
    row.accuracy = median(acc);
    row.auroc = median(auc);
    row.oscr = median(oscr);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<CurvePoint> probability_curves(int n, double d_min, double d_max, std::size_t steps) {
  if (n < 1) throw ConfigError("curves: n must be >= 1");
  if (!(std::isfinite(d_min) && std::isfinite(d_max) && d_min >= 0.0 && d_max >= d_min)) {
    throw ConfigError("curves: need 0 <= min <= max");
  }
  if (steps < 2) throw ConfigError("curves: steps must be >= 2");
  std::vector<CurvePoint> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const double d =
        d_min + (d_max - d_min) * static_cast<double>(i) / static_cast<double>(steps - 1);
    const double d_sq = d * d;
    out.push_back({d, special::prob_inclusion(d_sq, n), std::exp(-special::h_scale(d_sq))});
  }
  return out;
}

std::string curves_to_csv(const std::vector<CurvePoint>& points) {
  std::string out = "distance,p_inclusion,p_hsc\n";
  for (const auto& p : points) {
    out += number(p.distance) + ',' + number(p.p_inclusion) + ',' + number(p.p_hsc) + '\n';
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("failed writing: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---- commands ------------------------------------------------------------------

void cmd_gen_data(const ExperimentConfig& config) {
  config.validate();
  if (config.source != DataSource::kSynthetic) {
    throw ConfigError("gen-data requires data.source = \"synthetic\"");
  }
  const DatasetBundle bundle = load_bundle(config);
  const auto dir = ensure_output_dir(config);
  const std::pair<const char*, const Dataset*> files[] = {
      {"train_known.csv", &bundle.train_known}, {"background.csv", &bundle.background},
      {"val_known.csv", &bundle.val_known},     {"test_known.csv", &bundle.test_known},
      {"test_unknown.csv", &bundle.test_unknown}};
  ordered_json artifacts = ordered_json::array();
  for (const auto& [name, data] : files) {
    write_csv(dir / name, *data);
    artifacts.push_back(name);
  }
  ordered_json extra;
  extra["artifacts"] = artifacts;
  extra["kkc_classes"] = bundle.kkc_classes;
  extra["uuc_classes"] = bundle.uuc_classes;
  write_manifest(dir / "manifest_gen_data.json", "gen-data", config, extra);
}

TrainResult cmd_train(const ExperimentConfig& config,
                      const std::optional<std::filesystem::path>& resume) {
  config.validate();
  const DatasetBundle bundle = load_bundle(config);
  const auto dir = ensure_output_dir(config);
  std::optional<Checkpoint> start;
  if (resume) start = load_checkpoint(*resume);

  TrainHooks hooks;
  hooks.on_checkpoint = [&dir](const Model& model, const TrainingState& state) {
    char name[48];
    std::snprintf(name, sizeof(name), "checkpoint_epoch_%04zu.txt", state.epochs_completed);
    save_checkpoint(dir / name, model, &state);
  };
  TrainResult result = run_training(config, bundle, start ? &*start : nullptr, hooks);
  save_checkpoint(dir / "checkpoint.txt", result.model, &result.state);
  write_text(dir / "trace.csv", trace_to_csv(result.trace()));
  ordered_json extra;
  extra["artifacts"] = {"checkpoint.txt", "trace.csv"};
  extra["resumed_from"] = resume ? ordered_json(resume->string()) : ordered_json(nullptr);
  extra["epochs_completed"] = result.state.epochs_completed;
  write_manifest(dir / "manifest_train.json", "train", config, extra);
  return result;
}

Evaluation cmd_eval(const ExperimentConfig& config, const std::filesystem::path& checkpoint) {
  config.validate();
  const DatasetBundle bundle = load_bundle(config);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const Evaluation ev = evaluate(config, ckpt.model, bundle);
  const auto dir = ensure_output_dir(config);
  write_text(dir / "report.json", report_to_json(ev.report));
  write_text(dir / "scores.csv", scores_to_csv(ev.samples, ckpt.model.num_classes()));
  write_text(dir / "oscr_curve.csv", oscr_curve_to_csv(oscr_curve(ev.samples)));
  ordered_json extra;
  extra["artifacts"] = {"report.json", "scores.csv", "oscr_curve.csv"};
  extra["checkpoint"] = checkpoint.string();
  write_manifest(dir / "manifest_eval.json", "eval", config, extra);
  return ev;
}

std::vector<SweepRow> cmd_sweep_lambda(const ExperimentConfig& config,
                                       const std::vector<double>& lambdas,
                                       const std::vector<std::uint64_t>& seeds) {
  config.validate();
  const auto dir = ensure_output_dir(config);
  const std::vector<SweepRow> rows = sweep_lambda(config, lambdas, seeds);
  const std::vector<std::uint64_t> seed_list = seeds.empty() ? std::vector{config.seed} : seeds;

  std::string table = "lambda,accuracy,auroc,oscr_ccr_at_fpr,seeds\n";
  std::string runs = "lambda,seed,accuracy,auroc,aupr,fpr95,oscr_ccr_at_fpr,macro_f1\n";
  for (const SweepRow& row : rows) {
    table += number(row.lambda) + ',' + number(row.accuracy) + ',' + number(row.auroc) + ',' +
             number(row.oscr) + ',' + std::to_string(row.runs.size()) + '\n';
    for (std::size_t i = 0; i < row.runs.size(); ++i) {
      const MetricReport& r = row.runs[i];
      runs += number(row.lambda) + ',' + std::to_string(seed_list[i]) + ',' + number(r.accuracy) +
              ',' + number(r.auroc) + ',' + number(r.aupr) + ',' + number(r.fpr95) + ',' +
              number(r.oscr_ccr_at_fpr) + ',' + number(r.macro_f1) + '\n';
    }
  }
  write_text(dir / "sweep_lambda.csv", table);
  write_text(dir / "sweep_lambda_runs.csv", runs);
  ordered_json extra;
  extra["artifacts"] = {"sweep_lambda.csv", "sweep_lambda_runs.csv"};
  extra["lambdas"] = lambdas;
  extra["seeds"] = seed_list;
  write_manifest(dir / "manifest_sweep_lambda.json", "sweep-lambda", config, extra);
  return rows;
}

std::filesystem::path cmd_curves(int n, double d_min, double d_max, std::size_t steps,
                                 const std::filesystem::path& out_dir) {
  const auto points = probability_curves(n, d_min, d_max, steps);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  const auto path = out_dir / ("curves_n" + std::to_string(n) + ".csv");
  write_text(path, curves_to_csv(points));
  return path;
}

}  // namespace openset
