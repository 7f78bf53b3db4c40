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

// Declarative experiment description, read from a single JSON file.
//
// Key tree (every key optional; omitted keys take the defaults below):
//
//   seed                     root seed for data, initialization and batching
//   output_dir               artifact directory
//   data.source              "synthetic" | "csv"
//   data.synthetic.*         SyntheticSpec fields (kuc_mode as a string)
//   data.csv.{train_known, background, val_known, test_known, test_unknown}
//   data.csv.num_classes
//   model.hidden             hidden layer widths, e.g. [64, 64]
//   model.latent_dim         n, the latent (anchor) dimension
//   model.head               "auto" | "distance" | "softmax"
//   model.freeze_anchors
//   loss.{family, lambda, triplet_margin, objectosphere_xi, energy_m_in, energy_m_out}
//   optim.{epochs, batch_size_known, batch_size_background, lr_init,
//          warmup_epochs, momentum, checkpoint_every}
//   eval.{fpr_target, tpr_target}
//   eval.f1_threshold.{policy, accept_fraction, value}
//
// Unknown keys and ill-typed values are rejected with the dotted key path
// in the message.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openset/data.hpp"
#include "openset/losses.hpp"
#include "openset/model.hpp"
#include "openset/trainer.hpp"

namespace openset {

enum class DataSource { kSynthetic, kCsv };

struct CsvSources {
  std::string train_known;
  std::string background;
  std::string val_known;  // optional; empty when absent
  std::string test_known;
  std::string test_unknown;
  std::size_t num_classes = 0;
};

struct ModelConfig {
  std::vector<std::size_t> hidden = {64, 64};
  std::size_t latent_dim = 6;
  std::optional<HeadType> head;  // unset: the head the loss family trains
  bool freeze_anchors = false;
};

enum class F1Policy { kValAccept, kFixed };

struct EvalConfig {
  double fpr_target = 0.1;
  double tpr_target = 0.95;
  F1Policy f1_policy = F1Policy::kValAccept;
  double f1_accept_fraction = 0.95;
  double f1_value = 0.0;  // used by kFixed
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  DataSource source = DataSource::kSynthetic;
  SyntheticSpec synthetic;
  CsvSources csv;
  ModelConfig model;
  LossConfig loss;
  OptimConfig optim;
  EvalConfig eval;

  HeadType head() const;
  // {input_dim, hidden..., latent_dim}.
  ModelSpec model_spec(std::size_t input_dim, std::size_t num_classes) const;
  // Copies with the root seed applied.
  SyntheticSpec synthetic_spec() const;
  OptimConfig optim_config() const;

  // Whole-config invariant check; throws ConfigError naming the key.
  void validate() const;
};

// Parses JSON text, applies "dotted.key=value" overrides (value parsed as
// JSON, falling back to a plain string) and validates the result.
ExperimentConfig parse_config(std::string_view json_text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});

// Canonical JSON rendering with every key present; parse_config of the
// result reproduces the config.
std::string config_to_json(const ExperimentConfig& config);

const char* data_source_name(DataSource source);
const char* f1_policy_name(F1Policy policy);

}  // namespace openset
