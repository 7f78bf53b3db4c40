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

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

#include "openset/checkpoint.hpp"
#include "openset/errors.hpp"
#include "openset/experiment.hpp"
#include "openset/special.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using openset::ExperimentConfig;
using openset::LossFamily;

namespace {

ExperimentConfig small_config(const fs::path& out, std::uint64_t seed = 5) {
  ExperimentConfig c;
  c.seed = seed;
  c.output_dir = out.string();
  c.synthetic.samples_per_class = 40;
  c.model.hidden = {16};
  c.model.latent_dim = 4;
  c.optim.epochs = 6;
  c.optim.warmup_epochs = 1;
  c.optim.batch_size_known = 32;
  c.optim.batch_size_background = 32;
  c.loss.family = LossFamily::kClassInclusion;
  c.loss.lambda = 1.0;
  c.validate();
  return c;
}

std::string slurp(const fs::path& p) { return openset::read_text(p); }

}  // namespace

TEST(GenData, WritesCsvsThatReloadToTheSameBundle) {
  const auto dir = openset::testing::temp_dir("gen_data");
  ExperimentConfig cfg = small_config(dir);
  openset::cmd_gen_data(cfg);
  for (const char* name : {"train_known.csv", "background.csv", "val_known.csv", "test_known.csv",
                           "test_unknown.csv", "manifest_gen_data.json"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }

  const openset::DatasetBundle generated = openset::load_bundle(cfg);
  ExperimentConfig csv_cfg = cfg;
  csv_cfg.source = openset::DataSource::kCsv;
  csv_cfg.csv.train_known = (dir / "train_known.csv").string();
  csv_cfg.csv.background = (dir / "background.csv").string();
  csv_cfg.csv.val_known = (dir / "val_known.csv").string();
  csv_cfg.csv.test_known = (dir / "test_known.csv").string();
  csv_cfg.csv.test_unknown = (dir / "test_unknown.csv").string();
  csv_cfg.csv.num_classes = generated.num_classes();
  csv_cfg.validate();
  const openset::DatasetBundle loaded = openset::load_bundle(csv_cfg);

  EXPECT_EQ(loaded.train_known, generated.train_known);
  EXPECT_EQ(loaded.val_known, generated.val_known);
  EXPECT_EQ(loaded.test_known, generated.test_known);
  EXPECT_EQ(loaded.background.features(), generated.background.features());
  EXPECT_EQ(loaded.test_unknown.features(), generated.test_unknown.features());
  EXPECT_EQ(loaded.num_classes(), 6u);
}

TEST(GenData, SameSeedGivesIdenticalFiles) {
  const auto a = openset::testing::temp_dir("gen_a");
  const auto b = openset::testing::temp_dir("gen_b");
  openset::cmd_gen_data(small_config(a));
  openset::cmd_gen_data(small_config(b));
  for (const char* name :
       {"train_known.csv", "background.csv", "val_known.csv", "test_known.csv", "test_unknown.csv"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
  const auto c = openset::testing::temp_dir("gen_c");
  openset::cmd_gen_data(small_config(c, 6));
  EXPECT_NE(slurp(a / "train_known.csv"), slurp(c / "train_known.csv"));
}

TEST(GenData, RejectsCsvSource) {
  const auto dir = openset::testing::temp_dir("gen_csv");
  ExperimentConfig cfg = small_config(dir);
  cfg.source = openset::DataSource::kCsv;
  cfg.csv.train_known = "x.csv";
  cfg.csv.test_known = "x.csv";
  cfg.csv.test_unknown = "x.csv";
  cfg.csv.num_classes = 2;
  EXPECT_THROW(openset::cmd_gen_data(cfg), openset::ConfigError);
}

TEST(TrainEval, WritesArtifactsWithSaneValues) {
  const auto dir = openset::testing::temp_dir("train_eval");
  const ExperimentConfig cfg = small_config(dir);
  const auto result = openset::cmd_train(cfg);
  EXPECT_EQ(result.state.epochs_completed, cfg.optim.epochs);
  ASSERT_TRUE(fs::exists(dir / "checkpoint.txt"));
  ASSERT_TRUE(fs::exists(dir / "trace.csv"));
  ASSERT_TRUE(fs::exists(dir / "manifest_train.json"));

  const auto ev = openset::cmd_eval(cfg, dir / "checkpoint.txt");
  for (const char* name : {"report.json", "scores.csv", "oscr_curve.csv", "manifest_eval.json"}) {
    EXPECT_TRUE(fs::exists(dir / name)) << name;
  }
  const auto& r = ev.report;
  for (double v : {r.accuracy, r.auroc, r.aupr, r.fpr95, r.oscr_ccr_at_fpr, r.macro_f1}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_TRUE(std::isfinite(r.threshold_used_for_f1));
  EXPECT_EQ(slurp(dir / "report.json"), openset::report_to_json(r));

  const openset::DatasetBundle bundle = openset::load_bundle(cfg);
  EXPECT_EQ(ev.samples.size(), bundle.test_known.size() + bundle.test_unknown.size());
  // Trace has a header plus one row per epoch.
  const std::string trace = slurp(dir / "trace.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(trace.begin(), trace.end(), '\n')),
            cfg.optim.epochs + 1);
}

TEST(TrainEval, IdenticalRunsAreByteIdentical) {
  const auto a = openset::testing::temp_dir("det_a");
  const auto b = openset::testing::temp_dir("det_b");
  openset::cmd_train(small_config(a));
  openset::cmd_train(small_config(b));
  EXPECT_EQ(slurp(a / "checkpoint.txt"), slurp(b / "checkpoint.txt"));
  EXPECT_EQ(slurp(a / "trace.csv"), slurp(b / "trace.csv"));
  openset::cmd_eval(small_config(a), a / "checkpoint.txt");
  openset::cmd_eval(small_config(b), b / "checkpoint.txt");
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "scores.csv"), slurp(b / "scores.csv"));
  EXPECT_EQ(slurp(a / "oscr_curve.csv"), slurp(b / "oscr_curve.csv"));
}

TEST(TrainEval, ResumeFromPeriodicCheckpointMatchesUninterrupted) {
  const auto full = openset::testing::temp_dir("resume_full");
  const auto rest = openset::testing::temp_dir("resume_rest");
  ExperimentConfig cfg = small_config(full);
  cfg.optim.checkpoint_every = 2;
  openset::cmd_train(cfg);
  const auto mid = full / "checkpoint_epoch_0002.txt";
  ASSERT_TRUE(fs::exists(mid));
  EXPECT_TRUE(fs::exists(full / "checkpoint_epoch_0004.txt"));

  ExperimentConfig resumed = cfg;
  resumed.output_dir = rest.string();
  openset::cmd_train(resumed, mid);
  EXPECT_EQ(slurp(full / "checkpoint.txt"), slurp(rest / "checkpoint.txt"));
  EXPECT_EQ(slurp(full / "trace.csv"), slurp(rest / "trace.csv"));
}

TEST(TrainEval, ResumeRejectsHeadMismatchAndMissingState) {
  const auto dir = openset::testing::temp_dir("resume_bad");
  const ExperimentConfig cfg = small_config(dir);
  const openset::DatasetBundle bundle = openset::load_bundle(cfg);
  const auto model = openset::initial_model(cfg, bundle);
  openset::save_checkpoint(dir / "bare.txt", model);
  EXPECT_THROW(openset::cmd_train(cfg, dir / "bare.txt"), openset::ConfigError);

  openset::TrainingState state;
  for (const auto& p : model.parameters()) {
    state.velocity.push_back(openset::ad::Tensor::zeros(p.value->shape()));
  }
  openset::save_checkpoint(dir / "state.txt", model, &state);
  ExperimentConfig softmax = cfg;
  softmax.loss.family = LossFamily::kObjectosphere;
  softmax.validate();
  EXPECT_THROW(openset::cmd_train(softmax, dir / "state.txt"), openset::ConfigError);
  EXPECT_THROW(openset::cmd_eval(cfg, dir / "missing.txt"), openset::IoError);
}

TEST(Sweep, LambdaZeroEqualsNoRegularizer) {
  const auto dir = openset::testing::temp_dir("sweep");
  ExperimentConfig cfg = small_config(dir);
  cfg.optim.epochs = 3;
  const auto rows = openset::cmd_sweep_lambda(cfg, {0.0, 1.0}, {5, 9});
  ASSERT_EQ(rows.size(), 2u);
  ASSERT_EQ(rows[0].runs.size(), 2u);
  EXPECT_TRUE(fs::exists(dir / "sweep_lambda.csv"));
  EXPECT_TRUE(fs::exists(dir / "sweep_lambda_runs.csv"));

  ExperimentConfig none = cfg;
  none.loss.family = LossFamily::kNone;
  none.loss.lambda = 0.0;
  none.validate();
  const std::uint64_t seeds[] = {5, 9};
  for (std::size_t i = 0; i < 2; ++i) {
    none.seed = seeds[i];
    const openset::DatasetBundle bundle = openset::load_bundle(none);
    const auto trained = openset::run_training(none, bundle);
    const auto ev = openset::evaluate(none, trained.model, bundle);
    EXPECT_EQ(ev.report, rows[0].runs[i]) << "seed " << seeds[i];
  }
  EXPECT_EQ(rows[1].auroc,
            openset::median({rows[1].runs[0].auroc, rows[1].runs[1].auroc}));
  EXPECT_THROW(openset::cmd_sweep_lambda(cfg, {}), openset::ConfigError);
}

TEST(Curves, MatchClosedForms) {
  const auto at_zero = openset::probability_curves(128, 0.0, 20.0, 101);
  EXPECT_EQ(at_zero.front().distance, 0.0);
  EXPECT_EQ(at_zero.front().p_inclusion, 1.0);
  EXPECT_EQ(at_zero.front().p_hsc, 1.0);
  EXPECT_DOUBLE_EQ(at_zero.back().distance, 20.0);

  for (const auto& p : openset::probability_curves(2, 0.0, 5.0, 51)) {
    EXPECT_NEAR(p.p_inclusion, std::exp(-p.distance * p.distance / 2.0), 1e-14) << p.distance;
  }

  auto crossing = [&](auto get) {
    for (const auto& p : at_zero) {
      if (get(p) < 0.5) return p.distance;
    }
    return 1e300;
  };
  const double ci = crossing([](const auto& p) { return p.p_inclusion; });
  const double hsc = crossing([](const auto& p) { return p.p_hsc; });
  EXPECT_GT(ci, hsc);
  EXPECT_GT(ci, 10.0);
  EXPECT_LT(ci, 13.0);

  const auto dir = openset::testing::temp_dir("curves");
  const auto path = openset::cmd_curves(128, 0.0, 20.0, 11, dir);
  EXPECT_EQ(path.filename(), "curves_n128.csv");
  const std::string csv = slurp(path);
  EXPECT_EQ(csv.rfind("distance,p_inclusion,p_hsc\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 12);

  EXPECT_THROW(openset::probability_curves(0, 0.0, 1.0, 5), openset::ConfigError);
  EXPECT_THROW(openset::probability_curves(2, 1.0, 0.5, 5), openset::ConfigError);
  EXPECT_THROW(openset::probability_curves(2, 0.0, 1.0, 1), openset::ConfigError);
}

TEST(Evaluate, UntrainedModelIsNearChance) {
  std::vector<double> aurocs;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExperimentConfig cfg;
    cfg.seed = seed;
    const openset::DatasetBundle bundle = openset::load_bundle(cfg);
    const auto ev = openset::evaluate(cfg, openset::initial_model(cfg, bundle), bundle);
    aurocs.push_back(ev.report.auroc);
  }
  const double m = openset::median(aurocs);
  EXPECT_GT(m, 0.35);
  EXPECT_LT(m, 0.65);
}

TEST(Evaluate, NeedsBothKnownAndUnknownTestSamples) {
  const ExperimentConfig cfg = small_config("unused");
  openset::DatasetBundle bundle = openset::load_bundle(cfg);
  const auto model = openset::initial_model(cfg, bundle);
  openset::DatasetBundle knowns_only = bundle;
  knowns_only.test_unknown = openset::Dataset();
  EXPECT_THROW(openset::evaluate(cfg, model, knowns_only), openset::ContractError);

  openset::DatasetBundle no_val = bundle;
  no_val.val_known = openset::Dataset();
  EXPECT_THROW(openset::evaluate(cfg, model, no_val), openset::ConfigError);
}

TEST(Median, OddEvenAndEmpty) {
  EXPECT_EQ(openset::median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(openset::median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(openset::median({}), openset::ContractError);
}

#ifdef OPENSET_CLI_PATH
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPENSET_CLI_PATH) + ' ' + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  const auto dir = openset::testing::temp_dir("cli");
  const std::string out = " --out " + dir.string();
  EXPECT_EQ(run_cli("curves --n 4 --steps 5 --out " + dir.string()), 0);
  EXPECT_TRUE(fs::exists(dir / "curves_n4.csv"));
  EXPECT_EQ(run_cli("gen-data --set data.synthetic.samples_per_class=20" + out), 0);
  EXPECT_EQ(run_cli("train --set bogus.key=1" + out), 2);
  EXPECT_EQ(run_cli("train --set optim.lr_init=-1" + out), 2);
  EXPECT_EQ(run_cli("no-such-command"), 2);
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "missing.txt").string() + out), 4);
  openset::write_text(dir / "broken.txt", "not a checkpoint\n");
  EXPECT_EQ(run_cli("eval --checkpoint " + (dir / "broken.txt").string() + out), 4);
  EXPECT_EQ(run_cli("train --config " + (dir / "nope.json").string()), 4);
}
#endif
