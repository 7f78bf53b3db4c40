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

// Feature extractor, classification heads and open-set decision rules.
//
// Class indices are 0-based inside the library. A model with C known
// classes reports rejection as class index C (the "unknown" class); files
// and the CLI use 1-based labels with C+1 meaning unknown.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "openset/autodiff.hpp"
#include "openset/rng.hpp"

namespace openset {

enum class HeadType { kDistance, kSoftmax };

const char* head_type_name(HeadType head);
HeadType parse_head_type(const std::string& name);

// weight is [in, out] so that a batch X [m, in] maps to X * weight + bias.
struct DenseLayer {
  ad::Tensor weight;
  ad::Tensor bias;
};

// Fully connected network: relu on hidden layers, identity on the output.
class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  // layer_sizes = {input_dim, hidden..., latent_dim}; requires one layer per
  // consecutive pair with matching shapes.
  FeatureExtractor(std::vector<std::size_t> layer_sizes, std::vector<DenseLayer> layers);

  // He-normal weights, zero biases.
  static FeatureExtractor random(std::vector<std::size_t> layer_sizes, Rng& rng);

  const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
  std::size_t input_dim() const { return layer_sizes_.front(); }
  std::size_t latent_dim() const { return layer_sizes_.back(); }

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Forward pass for a single input; throws ShapeError on dimension mismatch.
  std::vector<double> latent(std::span<const double> x) const;

 private:
  std::vector<std::size_t> layer_sizes_;
  std::vector<DenseLayer> layers_;
};

// Class anchors with identity covariance and fixed class priors.
struct DistanceHead {
  ad::Tensor anchors;          // [C, n], row c is the anchor of class c
  std::vector<double> priors;  // length C, positive, sums to 1
  bool frozen = false;

  // Anchors drawn from the standard normal, uniform priors.
  static DistanceHead random(std::size_t num_classes, std::size_t latent_dim, Rng& rng);

  std::size_t num_classes() const { return anchors.rows(); }
  std::size_t latent_dim() const { return anchors.cols(); }
  void validate() const;
};

struct SoftmaxHead {
  ad::Tensor weight;  // [C, n], row c is w_c
  ad::Tensor bias;    // [C]

  static SoftmaxHead random(std::size_t num_classes, std::size_t latent_dim, Rng& rng);

  std::size_t num_classes() const { return weight.rows(); }
  std::size_t latent_dim() const { return weight.cols(); }
  void validate() const;
};

struct OpenSetDecision {
  std::size_t predicted_class = 0;  // num_classes means "unknown"
  double score = 0.0;               // compared against tau
  bool rejected = false;
};

// ||z - mu_c||^2 for every class.
std::vector<double> sq_distances(std::span<const double> z, const DistanceHead& head);

// Softmax over log P_c - ||z - mu_c||^2.
std::vector<double> posterior_distance(std::span<const double> z, const DistanceHead& head);

std::vector<double> softmax_logits(std::span<const double> z, const SoftmaxHead& head);
std::vector<double> posterior_softmax(std::span<const double> z, const SoftmaxHead& head);

// Accept when -min_c ||z - mu_c||^2 >= tau. The acceptance region is the
// union of closed balls of radius sqrt(-tau) around the anchors.
OpenSetDecision decide_distance(std::span<const double> z, const DistanceHead& head, double tau);

// Accept when max_c P_s(c | z) >= tau, tau in (0, 1].
OpenSetDecision decide_softmax(std::span<const double> z, const SoftmaxHead& head, double tau);

// Index of the smallest / largest entry; ties resolve to the lowest index.
std::size_t argmin(std::span<const double> values);
std::size_t argmax(std::span<const double> values);

struct ModelSpec {
  std::vector<std::size_t> layer_sizes;  // input_dim, hidden..., latent_dim
  std::size_t num_classes = 0;
  HeadType head = HeadType::kDistance;
  bool freeze_anchors = false;

  void validate() const;
};

struct ParameterRef {
  std::string name;
  ad::Tensor* value;
  bool trainable;
};

struct ConstParameterRef {
  std::string name;
  const ad::Tensor* value;
  bool trainable;
};

class Model {
 public:
  Model() = default;
  Model(FeatureExtractor extractor, std::variant<DistanceHead, SoftmaxHead> head,
        std::uint64_t seed);

  // Deterministic initialization from seed.
  static Model initialize(const ModelSpec& spec, std::uint64_t seed);

  const FeatureExtractor& extractor() const { return extractor_; }
  FeatureExtractor& extractor() { return extractor_; }
  HeadType head_type() const;
  const DistanceHead& distance_head() const;
  DistanceHead& distance_head();
  const SoftmaxHead& softmax_head() const;
  SoftmaxHead& softmax_head();

  std::uint64_t seed() const { return seed_; }
  std::size_t input_dim() const { return extractor_.input_dim(); }
  std::size_t latent_dim() const { return extractor_.latent_dim(); }
  std::size_t num_classes() const;

  // All parameter arrays in declared order: extractor layers (weight, bias)
  // front to back, then the head.
  std::vector<ParameterRef> parameters();
  std::vector<ConstParameterRef> parameters() const;

  std::vector<double> latent(std::span<const double> x) const { return extractor_.latent(x); }

  // Acceptance score: -min_c ||z - mu_c||^2 for a distance head, the
  // maximum posterior for a softmax head. Higher means "more known".
  double score(std::span<const double> z) const;
  // Closed-set prediction (never the unknown class).
  std::size_t predict(std::span<const double> z) const;
  OpenSetDecision decide(std::span<const double> z, double tau) const;

  bool operator==(const Model& other) const;

 private:
  FeatureExtractor extractor_;
  std::variant<DistanceHead, SoftmaxHead> head_;
  std::uint64_t seed_ = 0;
};

// ---- graph binding -------------------------------------------------------

struct DistanceHeadVars {
  ad::Var anchors;
  ad::Var log_priors;
};

struct SoftmaxHeadVars {
  ad::Var weight;
  ad::Var bias;
};

// One training step's view of a model on a tape. params follows
// Model::parameters() order.
struct BoundModel {
  std::vector<ad::Var> params;
  std::vector<std::pair<ad::Var, ad::Var>> layers;
  HeadType head = HeadType::kDistance;
  DistanceHeadVars distance;
  SoftmaxHeadVars softmax;

  // [m, input_dim] -> [m, latent_dim].
  ad::Var latent(ad::Var x) const;
};

BoundModel bind(ad::Tape& tape, const Model& model);

// Graph builders shared by the losses. Logits are [m, C].
ad::Var distance_logits(const DistanceHeadVars& head, ad::Var z);
ad::Var softmax_logits(const SoftmaxHeadVars& head, ad::Var z);

// Packs rows into an [m, d] tensor.
ad::Tensor stack_rows(std::span<const std::vector<double>> rows);

}  // namespace openset
