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

// Training objectives. Every loss has the shape
//
//   L = L_cf + lambda * L_reg
//
// where L_cf is the closed-set cross-entropy of the head and L_reg a
// background-class regularizer built from known samples (labels 0..C-1)
// and unlabeled background samples. Batch means are used throughout.
//
// Distance-head families: class_inclusion, hsc, triplet, none.
// Softmax-head families:  objectosphere, uniformity, energy, none.

#pragma once

#include <optional>
#include <span>
#include <string>

#include "openset/autodiff.hpp"
#include "openset/model.hpp"

namespace openset {

enum class LossFamily { kClassInclusion, kHsc, kTriplet, kObjectosphere, kUniformity, kEnergy, kNone };

const char* loss_family_name(LossFamily family);
LossFamily parse_loss_family(const std::string& name);
// Head a family trains. kNone works with either; it reports kDistance.
HeadType required_head(LossFamily family);
bool family_supports_head(LossFamily family, HeadType head);

struct LossConfig {
  LossFamily family = LossFamily::kClassInclusion;
  double lambda = 1.0;
  double triplet_margin = 1.0;
  std::optional<double> objectosphere_xi;  // defaults to sqrt(latent_dim)
  double energy_m_in = -7.0;
  double energy_m_out = -1.0;

  void validate() const;
};

// ---- distance head -------------------------------------------------------

// Mean negative log posterior of the true class.
ad::Var loss_cf(const DistanceHeadVars& head, ad::Var z_known, std::span<const std::size_t> labels);

// Mean of -log(1 - max_c P_I(x, c)) over background samples. The maximum
// inclusion probability belongs to the nearest anchor.
ad::Var loss_bg_u(const DistanceHeadVars& head, ad::Var z_background);

// Mean over known samples of -1[y == c_hat] log P_I(x, c_hat), c_hat the
// nearest anchor. The indicator is evaluated on forward values and carries
// no gradient; misclassified samples contribute exactly 0.
ad::Var loss_bg_k(const DistanceHeadVars& head, ad::Var z_known, std::span<const std::size_t> labels);

// L_cf + lambda (L_bg,k + L_bg,u). lambda == 0 returns the L_cf node itself.
ad::Var loss_class_inclusion(const DistanceHeadVars& head, ad::Var z_known,
                             std::span<const std::size_t> labels, ad::Var z_background,
                             double lambda);

// Class-wise hypersphere-classifier regularizer:
//   mean_k h(||z_k - mu_y||^2) - mean_b log(1 - exp(-h(min_c ||z_b - mu_c||^2))).
ad::Var loss_hsc(const DistanceHeadVars& head, ad::Var z_known, std::span<const std::size_t> labels,
                 ad::Var z_background);

// mean_i max(0, ||z_i - mu_yi||^2 - ||b_{i mod B} - mu_yi||^2 + margin).
ad::Var loss_triplet(const DistanceHeadVars& head, ad::Var z_known,
                     std::span<const std::size_t> labels, ad::Var z_background, double margin);

// ---- softmax head --------------------------------------------------------

ad::Var loss_softmax_cf(const SoftmaxHeadVars& head, ad::Var z_known,
                        std::span<const std::size_t> labels);

// Background term of the uniformity loss: mean_b -(1/C) sum_c log P_s(c | b).
ad::Var uniformity_background(const SoftmaxHeadVars& head, ad::Var z_background);

// Objectosphere regularizer: uniform-target cross-entropy on background plus
// mean_k max(0, xi - ||z_k||)^2 + mean_b ||z_b||^2.
ad::Var objectosphere_regularizer(const SoftmaxHeadVars& head, ad::Var z_known,
                                  ad::Var z_background, double xi);
// Magnitude part alone (known hinge + background norm), for inspection.
ad::Var objectosphere_magnitude(ad::Var z_known, ad::Var z_background, double xi);

// Energy E(x) = -logsumexp(logits); returns one value per row.
ad::Var energy(const SoftmaxHeadVars& head, ad::Var z);
// mean_k max(0, E_k - m_in)^2 + mean_b max(0, m_out - E_b)^2.
ad::Var energy_regularizer(const SoftmaxHeadVars& head, ad::Var z_known, ad::Var z_background,
                           double m_in, double m_out);

// Full single-family losses (cross-entropy plus the regularizer at weight 1).
ad::Var loss_objectosphere(const SoftmaxHeadVars& head, ad::Var z_known,
                           std::span<const std::size_t> labels, ad::Var z_background, double xi);
ad::Var loss_uniformity(const SoftmaxHeadVars& head, ad::Var z_known,
                        std::span<const std::size_t> labels, ad::Var z_background);
ad::Var loss_energy(const SoftmaxHeadVars& head, ad::Var z_known,
                    std::span<const std::size_t> labels, ad::Var z_background, double m_in,
                    double m_out);

// ---- composition -----------------------------------------------------------

struct LossParts {
  ad::Var cf;
  ad::Var reg;   // unset for kNone
  ad::Var bg_k;  // class_inclusion only
  ad::Var bg_u;  // class_inclusion only
  ad::Var total;
  ad::Var known_logits;  // [m, C], for training accuracy
};

// Runs the extractor on both batches and assembles the configured loss.
// x_background may be unset when family == kNone.
LossParts compute_loss(const BoundModel& model, ad::Var x_known,
                       std::span<const std::size_t> labels, ad::Var x_background,
                       const LossConfig& config);

}  // namespace openset
