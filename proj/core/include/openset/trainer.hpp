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

// SGD with momentum, linear warm-up followed by cosine decay, and paired
// known / background mini-batches.
//
// Each epoch walks a fresh permutation of the known training set; every
// known batch is paired with the next batch of an independently shuffled,
// endlessly cycling background stream. Both orders depend only on
// (seed, epoch), which is what makes resuming from a checkpoint exact.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "openset/checkpoint.hpp"
#include "openset/data.hpp"
#include "openset/losses.hpp"
#include "openset/model.hpp"

namespace openset {

struct OptimConfig {
  std::size_t epochs = 100;
  std::size_t batch_size_known = 64;
  std::size_t batch_size_background = 64;
  double lr_init = 0.01;
  std::size_t warmup_epochs = 5;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 0;  // 0 disables periodic checkpoints

  // epochs >= 1, lr_init > 0, warmup_epochs < epochs, momentum in [0, 1).
  void validate() const;
};

// Learning rate for a 0-based epoch:
//   epoch < W:  lr_init * epoch / W
//   otherwise:  lr_init * (1 + cos(pi * (epoch - W) / (E - 1 - W))) / 2
// with the cosine progress taken as 0 when E - 1 - W == 0.
double lr_schedule(std::size_t epoch, const OptimConfig& cfg);

using TrainTrace = std::vector<EpochRecord>;

std::string trace_to_csv(const TrainTrace& trace);

struct TrainHooks {
  // Called after every epoch.
  std::function<void(const EpochRecord&)> on_epoch;
  // Called every checkpoint_every epochs with the state needed to resume.
  std::function<void(const Model&, const TrainingState&)> on_checkpoint;
};

struct TrainResult {
  Model model;
  TrainingState state;
  const TrainTrace& trace() const { return state.trace; }
};

// Trains model in place of a copy and returns it. With resume set, training
// continues after resume->epochs_completed using the stored momentum
// buffers and trace. epochs == 0 returns the model unchanged.
//
// Throws NumericError naming the epoch and step when the loss or a gradient
// becomes non-finite.
TrainResult train(const DatasetBundle& bundle, Model model, const LossConfig& loss,
                  const OptimConfig& optim, const TrainingState* resume = nullptr,
                  const TrainHooks& hooks = {});

// One SGD-with-momentum update: v = momentum * v + g; theta -= lr * v.
void sgd_momentum_step(ad::Tensor& param, ad::Tensor& velocity, const ad::Tensor& grad, double lr,
                       double momentum);

// Mean over rows of min_c ||z - mu_c||^2 for a distance-head model.
double mean_nearest_anchor_sq_distance(const Model& model, const Dataset& data);

}  // namespace openset
