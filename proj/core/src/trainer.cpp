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

#include "openset/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <utility>

#include "openset/errors.hpp"
#include "openset/rng.hpp"

namespace openset {
namespace {

constexpr std::uint64_t kKnownStream = 0x6b6e6f776e;
constexpr std::uint64_t kBackgroundStream = 0x6267;

std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

bool all_finite(const ad::Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace

void OptimConfig::validate() const {
  if (epochs < 1) throw ConfigError("optim.epochs must be >= 1");
  if (batch_size_known < 1) throw ConfigError("optim.batch_size_known must be >= 1");
  if (batch_size_background < 1) throw ConfigError("optim.batch_size_background must be >= 1");
  if (!(std::isfinite(lr_init) && lr_init > 0.0)) throw ConfigError("optim.lr_init must be > 0");
  if (warmup_epochs >= epochs) throw ConfigError("optim.warmup_epochs must be < optim.epochs");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("optim.momentum must lie in [0, 1)");
}

double lr_schedule(std::size_t epoch, const OptimConfig& cfg) {
  const std::size_t w = cfg.warmup_epochs;
  if (epoch < w) return cfg.lr_init * static_cast<double>(epoch) / static_cast<double>(w);
  const std::size_t span = cfg.epochs > w + 1 ? cfg.epochs - 1 - w : 0;
  const double progress =
      span == 0 ? 0.0 : std::min(1.0, static_cast<double>(epoch - w) / static_cast<double>(span));
  return cfg.lr_init * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::string trace_to_csv(const TrainTrace& trace) {
  std::string out = "epoch,lr,loss_cf,loss_bg_k,loss_bg_u,loss_reg,loss_total,train_accuracy\n";
  for (const auto& r : trace) {
    out += std::to_string(r.epoch) + ',' + number(r.lr) + ',' + number(r.loss_cf) + ',' +
           number(r.loss_bg_k) + ',' + number(r.loss_bg_u) + ',' + number(r.loss_reg) + ',' +
           number(r.loss_total) + ',' + number(r.train_accuracy) + '\n';
  }
  return out;
}

void sgd_momentum_step(ad::Tensor& param, ad::Tensor& velocity, const ad::Tensor& grad, double lr,
                       double momentum) {
  if (param.shape() != velocity.shape() || param.shape() != grad.shape()) {
    throw ShapeError("sgd step: parameter " + ad::shape_string(param.shape()) + ", velocity " +
                     ad::shape_string(velocity.shape()) + ", gradient " +
                     ad::shape_string(grad.shape()));
  }
  auto p = param.values();
  auto v = velocity.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    v[i] = momentum * v[i] + g[i];
    p[i] -= lr * v[i];
  }
}

TrainResult train(const DatasetBundle& bundle, Model model, const LossConfig& loss,
                  const OptimConfig& optim, const TrainingState* resume, const TrainHooks& hooks) {
  TrainResult result;
  if (optim.epochs == 0) {
    result.model = std::move(model);
    return result;
  }
  optim.validate();
  loss.validate();
  if (!family_supports_head(loss.family, model.head_type())) {
    throw ConfigError(std::string("loss.family ") + loss_family_name(loss.family) +
                      " cannot train a " + head_type_name(model.head_type()) + " head");
  }
  const Dataset& known = bundle.train_known;
  if (known.empty()) throw ContractError("training set is empty");
  if (known.dim() != model.input_dim()) {
    throw ShapeError("training data has dimension " + std::to_string(known.dim()) +
                     " but the model expects " + std::to_string(model.input_dim()));
  }
  const bool needs_background = loss.family != LossFamily::kNone;
  if (needs_background) {
    if (bundle.background.empty()) {
      throw ContractError(std::string(loss_family_name(loss.family)) + " needs background samples");
    }
    if (bundle.background.dim() != model.input_dim()) {
      throw ShapeError("background data has dimension " + std::to_string(bundle.background.dim()) +
                       " but the model expects " + std::to_string(model.input_dim()));
    }
  }

  TrainingState state;
  if (resume) {
    state = *resume;
  } else {
    for (const ConstParameterRef& p : std::as_const(model).parameters()) {
      state.velocity.push_back(ad::Tensor::zeros(p.value->shape()));
    }
  }
  {
    const auto params = std::as_const(model).parameters();
    if (state.velocity.size() != params.size()) {
      throw ContractError("resume state has " + std::to_string(state.velocity.size()) +
                          " momentum buffers for " + std::to_string(params.size()) + " parameters");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (state.velocity[i].shape() != params[i].value->shape()) {
        throw ShapeError("momentum buffer for " + params[i].name + " has the wrong shape");
      }
    }
  }

  const BatchIterator known_batches(known.size(), optim.batch_size_known,
                                    mix_seed(optim.seed, kKnownStream), true);
  std::optional<CyclingSampler> background;
  if (needs_background) {
    background.emplace(bundle.background.size(), optim.batch_size_background,
                       mix_seed(optim.seed, kBackgroundStream));
  }

  for (std::size_t epoch = state.epochs_completed; epoch < optim.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, optim);
    if (background) background->reset(epoch);
    EpochRecord record;
    record.epoch = epoch;
    record.lr = lr;
    std::size_t seen = 0;
    std::size_t correct = 0;
    const auto batches = known_batches.epoch(epoch);
    for (std::size_t step = 0; step < batches.size(); ++step) {
      const auto& idx = batches[step];
      ad::Tape tape;
      const BoundModel bound = bind(tape, model);
      const ad::Var x_known = tape.constant(known.gather(idx));
      const std::vector<std::size_t> labels = known.gather_labels(idx);
      ad::Var x_bg;
      if (background) x_bg = tape.constant(bundle.background.gather(background->next()));
      const LossParts parts = compute_loss(bound, x_known, labels, x_bg, loss);

      const double total = parts.total.value().item();
      if (!std::isfinite(total)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(step));
      }
      tape.backward(parts.total);

      auto params = model.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].trainable || !tape.has_grad(bound.params[i])) continue;
        const ad::Tensor& g = tape.grad(bound.params[i]);
        if (!all_finite(g)) {
          throw NumericError("non-finite gradient for " + params[i].name + " at epoch " +
                             std::to_string(epoch) + ", step " + std::to_string(step));
        }
        sgd_momentum_step(*params[i].value, state.velocity[i], g, lr, optim.momentum);
      }

      record.loss_cf += parts.cf.value().item();
      if (parts.bg_k.valid()) record.loss_bg_k += parts.bg_k.value().item();
      if (parts.bg_u.valid()) record.loss_bg_u += parts.bg_u.value().item();
      if (parts.reg.valid()) record.loss_reg += parts.reg.value().item();
      record.loss_total += total;
      const ad::Tensor& logits = parts.known_logits.value();
      for (std::size_t r = 0; r < labels.size(); ++r) {
        const auto row = logits.values().subspan(r * logits.cols(), logits.cols());
        if (argmax(row) == labels[r]) ++correct;
      }
      seen += labels.size();
    }
    const auto steps = static_cast<double>(batches.size());
    record.loss_cf /= steps;
    record.loss_bg_k /= steps;
    record.loss_bg_u /= steps;
    record.loss_reg /= steps;
    record.loss_total /= steps;
    record.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);

    state.trace.push_back(record);
    state.epochs_completed = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (hooks.on_checkpoint && optim.checkpoint_every > 0 &&
        state.epochs_completed % optim.checkpoint_every == 0) {
      hooks.on_checkpoint(model, state);
    }
  }
  result.model = std::move(model);
  result.state = std::move(state);
  return result;
}

double mean_nearest_anchor_sq_distance(const Model& model, const Dataset& data) {
  if (data.empty()) throw ContractError("mean_nearest_anchor_sq_distance on an empty set");
  const DistanceHead& head = model.distance_head();
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto d = sq_distances(model.latent(data.row(i)), head);
    sum += *std::min_element(d.begin(), d.end());
  }
  return sum / static_cast<double>(data.size());
}

}  // namespace openset
