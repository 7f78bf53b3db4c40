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

// Self-describing, bit-exact text checkpoints.
//
// Layout (one record per line, tokens separated by single spaces; every
// floating-point value is a C99 hex float without the 0x prefix, which is
// what std::to_chars(..., chars_format::hex) emits):
//
//   openset-checkpoint 1
//   seed <u64>
//   head distance|softmax
//   layer_sizes <k> <s0> ... <s{k-1}>
//   num_classes <C>
//   frozen_anchors 0|1                     (distance head only)
//   priors <C> <p0> ...                    (distance head only)
//   tensor <name> <rank> <dims...>
//   <values...>                            (row-major, on one line)
//   ...                                    (every parameter in declared order)
//   training <epochs_completed>            (optional section)
//   velocity <name> <rank> <dims...>
//   <values...>
//   trace <rows>
//   <epoch> <lr> <l_cf> <l_bg_k> <l_bg_u> <l_reg> <l_total> <train_acc>
//   end
//
// Parameter order: extractor.<l>.weight, extractor.<l>.bias for each layer,
// then head.anchors (distance) or head.weight, head.bias (softmax).

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "openset/autodiff.hpp"
#include "openset/model.hpp"

namespace openset {

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss_cf = 0.0;
  double loss_bg_k = 0.0;
  double loss_bg_u = 0.0;
  double loss_reg = 0.0;  // lambda-free regularizer of any family
  double loss_total = 0.0;
  double train_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

// Optimizer state needed to resume training bit-exactly.
struct TrainingState {
  std::size_t epochs_completed = 0;
  std::vector<ad::Tensor> velocity;  // one per Model::parameters() entry
  std::vector<EpochRecord> trace;

  bool operator==(const TrainingState&) const = default;
};

struct Checkpoint {
  Model model;
  std::optional<TrainingState> training;
};

std::string serialize_checkpoint(const Model& model, const TrainingState* training = nullptr);
Checkpoint parse_checkpoint(std::string_view text);

// Throws IoError when the file cannot be written or read.
void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainingState* training = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Shortest round-trip hex representation of a double.
std::string format_hex(double value);
double parse_hex(std::string_view token);

}  // namespace openset
