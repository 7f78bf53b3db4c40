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

#include "openset/losses.hpp"

#include <cmath>
#include <vector>

#include "openset/errors.hpp"
#include "openset/special.hpp"

namespace openset {
namespace {

using ad::Var;

void require_batch(Var z, const char* what) {
  if (!z.valid()) throw ContractError(std::string(what) + ": batch is missing");
  if (z.value().rank() != 2) {
    throw ShapeError(std::string(what) + ": expected [batch, latent], got " +
                     ad::shape_string(z.shape()));
  }
}

void require_labels(Var z, std::span<const std::size_t> labels, std::size_t classes,
                    const char* what) {
  require_batch(z, what);
  if (labels.empty()) throw ContractError(std::string(what) + ": empty known batch");
  if (labels.size() != z.value().rows()) {
    throw ShapeError(std::string(what) + ": " + std::to_string(labels.size()) +
                     " labels for a batch of " + std::to_string(z.value().rows()));
  }
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw ContractError(std::string(what) + ": label " + std::to_string(y) +
                          " out of range for " + std::to_string(classes) + " classes");
    }
  }
}

std::size_t num_anchors(const DistanceHeadVars& head) { return head.anchors.value().rows(); }
int latent_dim(const DistanceHeadVars& head) {
  return static_cast<int>(head.anchors.value().cols());
}

std::vector<std::size_t> row_argmin(const ad::Tensor& m) {
  std::vector<std::size_t> out(m.rows());
  const std::size_t cols = m.cols();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out[i] = argmin(std::span<const double>(m.data()).subspan(i * cols, cols));
  }
  return out;
}

// mean(logsumexp(logits) - logits[y]).
Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  return ad::mean_all(ad::sub(ad::logsumexp(logits), ad::pick(logits, labels)));
}

// -log(clamp(p)) elementwise.
Var neg_log_clamped(Var p) {
  return ad::neg(ad::log(ad::clamp_min(p, special::kMinProbability)));
}

}  // namespace

const char* loss_family_name(LossFamily family) {
  switch (family) {
    case LossFamily::kClassInclusion: return "class_inclusion";
    case LossFamily::kHsc: return "hsc";
    case LossFamily::kTriplet: return "triplet";
    case LossFamily::kObjectosphere: return "objectosphere";
    case LossFamily::kUniformity: return "uniformity";
    case LossFamily::kEnergy: return "energy";
    case LossFamily::kNone: return "none";
  }
  return "none";
}

LossFamily parse_loss_family(const std::string& name) {
  for (LossFamily f : {LossFamily::kClassInclusion, LossFamily::kHsc, LossFamily::kTriplet,
                       LossFamily::kObjectosphere, LossFamily::kUniformity, LossFamily::kEnergy,
                       LossFamily::kNone}) {
    if (name == loss_family_name(f)) return f;
  }
  throw ConfigError("unknown loss family '" + name + "'");
}

HeadType required_head(LossFamily family) {
  switch (family) {
    case LossFamily::kObjectosphere:
    case LossFamily::kUniformity:
    case LossFamily::kEnergy: return HeadType::kSoftmax;
    default: return HeadType::kDistance;
  }
}

bool family_supports_head(LossFamily family, HeadType head) {
  return family == LossFamily::kNone || required_head(family) == head;
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw ConfigError("loss.lambda must be a non-negative finite number");
  }
  if (!std::isfinite(triplet_margin) || triplet_margin < 0.0) {
    throw ConfigError("loss.triplet_margin must be non-negative");
  }
  if (objectosphere_xi && !(*objectosphere_xi > 0.0 && std::isfinite(*objectosphere_xi))) {
    throw ConfigError("loss.objectosphere_xi must be positive");
  }
  if (!std::isfinite(energy_m_in) || !std::isfinite(energy_m_out)) {
    throw ConfigError("loss.energy_m_in / energy_m_out must be finite");
  }
}

// ---- distance head -------------------------------------------------------

Var loss_cf(const DistanceHeadVars& head, Var z_known, std::span<const std::size_t> labels) {
  require_labels(z_known, labels, num_anchors(head), "loss_cf");
  return cross_entropy(distance_logits(head, z_known), labels);
}

Var loss_bg_u(const DistanceHeadVars& head, Var z_background) {
  require_batch(z_background, "loss_bg_u");
  Var d_sq = ad::sq_distances(z_background, head.anchors);
  const std::vector<std::size_t> nearest = row_argmin(d_sq.value());
  Var exclusion = ad::prob_exclusion(ad::pick(d_sq, nearest), latent_dim(head));
  return ad::mean_all(neg_log_clamped(exclusion));
}

Var loss_bg_k(const DistanceHeadVars& head, Var z_known, std::span<const std::size_t> labels) {
  require_labels(z_known, labels, num_anchors(head), "loss_bg_k");
  Var d_sq = ad::sq_distances(z_known, head.anchors);
  const std::vector<std::size_t> nearest = row_argmin(d_sq.value());
  std::vector<double> gate(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) gate[i] = nearest[i] == labels[i] ? 1.0 : 0.0;
  Var inclusion = ad::prob_inclusion(ad::pick(d_sq, labels), latent_dim(head));
  Var mask = z_known.tape()->constant(ad::Tensor::vector(std::move(gate)));
  return ad::mean_all(ad::mul(mask, neg_log_clamped(inclusion)));
}

Var loss_class_inclusion(const DistanceHeadVars& head, Var z_known,
                         std::span<const std::size_t> labels, Var z_background, double lambda) {
  Var cf = loss_cf(head, z_known, labels);
  if (lambda == 0.0) return cf;
  Var bg = ad::add(loss_bg_k(head, z_known, labels), loss_bg_u(head, z_background));
  return ad::add(cf, ad::scalar_mul(bg, lambda));
}

Var loss_hsc(const DistanceHeadVars& head, Var z_known, std::span<const std::size_t> labels,
             Var z_background) {
  require_labels(z_known, labels, num_anchors(head), "loss_hsc");
  require_batch(z_background, "loss_hsc");
  auto h = [](Var d) { return ad::add_scalar(ad::sqrt(ad::add_scalar(d, 1.0)), -1.0); };

  Var known_d = ad::pick(ad::sq_distances(z_known, head.anchors), labels);
  Var known_term = ad::mean_all(h(known_d));

  Var bg_all = ad::sq_distances(z_background, head.anchors);
  Var bg_d = ad::pick(bg_all, row_argmin(bg_all.value()));
  Var outside = ad::add_scalar(ad::neg(ad::exp(ad::neg(h(bg_d)))), 1.0);
  Var bg_term = ad::mean_all(neg_log_clamped(outside));
  return ad::add(known_term, bg_term);
}

Var loss_triplet(const DistanceHeadVars& head, Var z_known, std::span<const std::size_t> labels,
                 Var z_background, double margin) {
  require_labels(z_known, labels, num_anchors(head), "loss_triplet");
  require_batch(z_background, "loss_triplet");
  const std::size_t background_rows = z_background.value().rows();
  std::vector<std::size_t> partner(labels.size());
  for (std::size_t i = 0; i < partner.size(); ++i) partner[i] = i % background_rows;

  Var positive = ad::pick(ad::sq_distances(z_known, head.anchors), labels);
  Var negatives = ad::gather_rows(z_background, partner);
  Var negative = ad::pick(ad::sq_distances(negatives, head.anchors), labels);
  return ad::mean_all(ad::relu(ad::add_scalar(ad::sub(positive, negative), margin)));
}

// ---- softmax head --------------------------------------------------------

Var loss_softmax_cf(const SoftmaxHeadVars& head, Var z_known, std::span<const std::size_t> labels) {
  require_labels(z_known, labels, head.weight.value().rows(), "loss_softmax_cf");
  return cross_entropy(softmax_logits(head, z_known), labels);
}

Var uniformity_background(const SoftmaxHeadVars& head, Var z_background) {
  require_batch(z_background, "uniformity_background");
  Var logits = softmax_logits(head, z_background);
  const double inv_classes = 1.0 / static_cast<double>(head.weight.value().rows());
  Var mean_logit = ad::scalar_mul(ad::sum_axis(logits, 1), inv_classes);
  return ad::mean_all(ad::sub(ad::logsumexp(logits), mean_logit));
}

Var objectosphere_magnitude(Var z_known, Var z_background, double xi) {
  require_batch(z_known, "objectosphere_magnitude");
  require_batch(z_background, "objectosphere_magnitude");
  Var known_norm = ad::sqrt(ad::sum_axis(ad::square(z_known), 1));
  Var known_term = ad::mean_all(ad::square(ad::relu(ad::add_scalar(ad::neg(known_norm), xi))));
  Var bg_term = ad::mean_all(ad::sum_axis(ad::square(z_background), 1));
  return ad::add(known_term, bg_term);
}

Var objectosphere_regularizer(const SoftmaxHeadVars& head, Var z_known, Var z_background,
                              double xi) {
  return ad::add(uniformity_background(head, z_background),
                 objectosphere_magnitude(z_known, z_background, xi));
}

Var energy(const SoftmaxHeadVars& head, Var z) {
  return ad::neg(ad::logsumexp(softmax_logits(head, z)));
}

Var energy_regularizer(const SoftmaxHeadVars& head, Var z_known, Var z_background, double m_in,
                       double m_out) {
  require_batch(z_known, "energy_regularizer");
  require_batch(z_background, "energy_regularizer");
  Var known_term = ad::mean_all(ad::square(ad::relu(ad::add_scalar(energy(head, z_known), -m_in))));
  Var bg_term =
      ad::mean_all(ad::square(ad::relu(ad::add_scalar(ad::neg(energy(head, z_background)), m_out))));
  return ad::add(known_term, bg_term);
}

Var loss_objectosphere(const SoftmaxHeadVars& head, Var z_known,
                       std::span<const std::size_t> labels, Var z_background, double xi) {
  return ad::add(loss_softmax_cf(head, z_known, labels),
                 objectosphere_regularizer(head, z_known, z_background, xi));
}

Var loss_uniformity(const SoftmaxHeadVars& head, Var z_known, std::span<const std::size_t> labels,
                    Var z_background) {
  return ad::add(loss_softmax_cf(head, z_known, labels), uniformity_background(head, z_background));
}

Var loss_energy(const SoftmaxHeadVars& head, Var z_known, std::span<const std::size_t> labels,
                Var z_background, double m_in, double m_out) {
  return ad::add(loss_softmax_cf(head, z_known, labels),
                 energy_regularizer(head, z_known, z_background, m_in, m_out));
}

// ---- composition -----------------------------------------------------------

LossParts compute_loss(const BoundModel& model, Var x_known, std::span<const std::size_t> labels,
                       Var x_background, const LossConfig& config) {
  if (!family_supports_head(config.family, model.head)) {
    throw ConfigError(std::string("loss family ") + loss_family_name(config.family) +
                      " cannot train a " + head_type_name(model.head) + " head");
  }
  LossParts parts;
  Var z_known = model.latent(x_known);
  const bool distance = model.head == HeadType::kDistance;
  const std::size_t classes =
      distance ? num_anchors(model.distance) : model.softmax.weight.value().rows();
  require_labels(z_known, labels, classes, "compute_loss");

  if (distance) {
    parts.known_logits = distance_logits(model.distance, z_known);
    parts.cf = cross_entropy(parts.known_logits, labels);
  } else {
    parts.known_logits = softmax_logits(model.softmax, z_known);
    parts.cf = cross_entropy(parts.known_logits, labels);
  }

  if (config.family == LossFamily::kNone) {
    parts.total = parts.cf;
    return parts;
  }
  if (!x_background.valid()) {
    throw ContractError(std::string(loss_family_name(config.family)) + " needs a background batch");
  }
  Var z_bg = model.latent(x_background);

  switch (config.family) {
    case LossFamily::kClassInclusion:
      parts.bg_k = loss_bg_k(model.distance, z_known, labels);
      parts.bg_u = loss_bg_u(model.distance, z_bg);
      parts.reg = ad::add(parts.bg_k, parts.bg_u);
      break;
    case LossFamily::kHsc:
      parts.reg = loss_hsc(model.distance, z_known, labels, z_bg);
      break;
    case LossFamily::kTriplet:
      parts.reg = loss_triplet(model.distance, z_known, labels, z_bg, config.triplet_margin);
      break;
    case LossFamily::kObjectosphere: {
      const double xi = config.objectosphere_xi.value_or(
          std::sqrt(static_cast<double>(z_known.value().cols())));
      parts.reg = objectosphere_regularizer(model.softmax, z_known, z_bg, xi);
      break;
    }
    case LossFamily::kUniformity:
      parts.reg = uniformity_background(model.softmax, z_bg);
      break;
    case LossFamily::kEnergy:
      parts.reg = energy_regularizer(model.softmax, z_known, z_bg, config.energy_m_in,
                                     config.energy_m_out);
      break;
    case LossFamily::kNone:
      break;
  }
  parts.total = config.lambda == 0.0 ? parts.cf
                                     : ad::add(parts.cf, ad::scalar_mul(parts.reg, config.lambda));
  return parts;
}

}  // namespace openset
