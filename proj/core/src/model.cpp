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

#include "openset/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "openset/errors.hpp"

namespace openset {
namespace {

void check_dim(const char* what, std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError(std::string(what) + ": expected dimension " + std::to_string(want) +
                     ", got " + std::to_string(got));
  }
}

std::vector<double> softmax(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

}  // namespace

const char* head_type_name(HeadType head) {
  return head == HeadType::kDistance ? "distance" : "softmax";
}

HeadType parse_head_type(const std::string& name) {
  if (name == "distance") return HeadType::kDistance;
  if (name == "softmax") return HeadType::kSoftmax;
  throw ConfigError("unknown head type '" + name + "' (expected distance or softmax)");
}

// ---- FeatureExtractor --------------------------------------------------------

FeatureExtractor::FeatureExtractor(std::vector<std::size_t> layer_sizes,
                                   std::vector<DenseLayer> layers)
    : layer_sizes_(std::move(layer_sizes)), layers_(std::move(layers)) {
  if (layer_sizes_.size() < 2) throw ShapeError("extractor needs at least input and latent sizes");
  if (layers_.size() != layer_sizes_.size() - 1) {
    throw ShapeError("extractor has " + std::to_string(layers_.size()) + " layers for " +
                     std::to_string(layer_sizes_.size()) + " sizes");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const ad::Shape want_w{layer_sizes_[l], layer_sizes_[l + 1]};
    const ad::Shape want_b{layer_sizes_[l + 1]};
    if (layers_[l].weight.shape() != want_w || layers_[l].bias.shape() != want_b) {
      throw ShapeError("layer " + std::to_string(l) + " has weight " +
                       ad::shape_string(layers_[l].weight.shape()) + " and bias " +
                       ad::shape_string(layers_[l].bias.shape()) + ", expected " +
                       ad::shape_string(want_w) + " and " + ad::shape_string(want_b));
    }
  }
}

FeatureExtractor FeatureExtractor::random(std::vector<std::size_t> layer_sizes, Rng& rng) {
  if (layer_sizes.size() < 2) throw ShapeError("extractor needs at least input and latent sizes");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t in = layer_sizes[l], out = layer_sizes[l + 1];
    const double stddev = std::sqrt(2.0 / static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = rng.normal(0.0, stddev);
    layers.push_back({ad::Tensor::matrix(in, out, std::move(w)), ad::Tensor::zeros({out})});
  }
  return FeatureExtractor(std::move(layer_sizes), std::move(layers));
}

std::vector<double> FeatureExtractor::latent(std::span<const double> x) const {
  check_dim("latent", x.size(), input_dim());
  std::vector<double> cur(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    const std::size_t in = layer.weight.rows(), out = layer.weight.cols();
    // Same accumulation order as the graph path (ad::matmul then add_bias).
    std::vector<double> next(out, 0.0);
    for (std::size_t i = 0; i < in; ++i) {
      const double xi = cur[i];
      if (xi == 0.0) continue;
      for (std::size_t j = 0; j < out; ++j) next[j] += xi * layer.weight[i * out + j];
    }
    for (std::size_t j = 0; j < out; ++j) next[j] += layer.bias[j];
    if (l + 1 < layers_.size()) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
    cur = std::move(next);
  }
  return cur;
}

// ---- heads -------------------------------------------------------------------

DistanceHead DistanceHead::random(std::size_t num_classes, std::size_t latent_dim, Rng& rng) {
  std::vector<double> mu(num_classes * latent_dim);
  for (double& v : mu) v = rng.normal();
  DistanceHead head;
  head.anchors = ad::Tensor::matrix(num_classes, latent_dim, std::move(mu));
  head.priors.assign(num_classes, 1.0 / static_cast<double>(num_classes));
  return head;
}

void DistanceHead::validate() const {
  if (anchors.rank() != 2) throw ShapeError("anchors must be a matrix");
  if (priors.size() != anchors.rows()) {
    throw ShapeError("priors length " + std::to_string(priors.size()) + " does not match " +
                     std::to_string(anchors.rows()) + " anchors");
  }
  double total = 0.0;
  for (double p : priors) {
    if (!(p > 0.0)) throw DomainError("class priors must be positive");
    total += p;
  }
  if (std::fabs(total - 1.0) > 1e-9) throw DomainError("class priors must sum to 1");
}

SoftmaxHead SoftmaxHead::random(std::size_t num_classes, std::size_t latent_dim, Rng& rng) {
  const double stddev = std::sqrt(1.0 / static_cast<double>(latent_dim));
  std::vector<double> w(num_classes * latent_dim);
  for (double& v : w) v = rng.normal(0.0, stddev);
  return {ad::Tensor::matrix(num_classes, latent_dim, std::move(w)),
          ad::Tensor::zeros({num_classes})};
}

void SoftmaxHead::validate() const {
  if (weight.rank() != 2 || bias.rank() != 1 || bias.size() != weight.rows()) {
    throw ShapeError("softmax head weight " + ad::shape_string(weight.shape()) +
                     " inconsistent with bias " + ad::shape_string(bias.shape()));
  }
}

std::size_t argmin(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> sq_distances(std::span<const double> z, const DistanceHead& head) {
  const std::size_t n = head.latent_dim(), classes = head.num_classes();
  check_dim("sq_distances", z.size(), n);
  std::vector<double> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double diff = z[j] - head.anchors[c * n + j];
      s += diff * diff;
    }
    out[c] = s;
  }
  return out;
}

std::vector<double> posterior_distance(std::span<const double> z, const DistanceHead& head) {
  std::vector<double> logits = sq_distances(z, head);
  for (std::size_t c = 0; c < logits.size(); ++c) logits[c] = std::log(head.priors[c]) - logits[c];
  return softmax(logits);
}

std::vector<double> softmax_logits(std::span<const double> z, const SoftmaxHead& head) {
  const std::size_t n = head.latent_dim(), classes = head.num_classes();
  check_dim("softmax_logits", z.size(), n);
  std::vector<double> out(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    double s = head.bias[c];
    for (std::size_t j = 0; j < n; ++j) s += head.weight[c * n + j] * z[j];
    out[c] = s;
  }
  return out;
}

std::vector<double> posterior_softmax(std::span<const double> z, const SoftmaxHead& head) {
  return softmax(softmax_logits(z, head));
}

OpenSetDecision decide_distance(std::span<const double> z, const DistanceHead& head, double tau) {
  const std::vector<double> d = sq_distances(z, head);
  const std::size_t nearest = argmin(d);
  OpenSetDecision out;
  out.score = -d[nearest];
  out.rejected = !(out.score >= tau);
  out.predicted_class = out.rejected ? head.num_classes() : nearest;
  return out;
}

OpenSetDecision decide_softmax(std::span<const double> z, const SoftmaxHead& head, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw DomainError("decide_softmax: tau must lie in (0, 1], got " + std::to_string(tau));
  }
  const std::vector<double> p = posterior_softmax(z, head);
  const std::size_t best = argmax(p);
  OpenSetDecision out;
  out.score = p[best];
  out.rejected = !(out.score >= tau);
  out.predicted_class = out.rejected ? head.num_classes() : best;
  return out;
}

// ---- Model ---------------------------------------------------------------------

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("model.layer_sizes needs at least 2 entries");
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw ConfigError("model.layer_sizes entries must be positive");
  }
  if (num_classes < 1) throw ConfigError("model.num_classes must be >= 1");
}

Model::Model(FeatureExtractor extractor, std::variant<DistanceHead, SoftmaxHead> head,
             std::uint64_t seed)
    : extractor_(std::move(extractor)), head_(std::move(head)), seed_(seed) {
  std::visit(
      [this](const auto& h) {
        h.validate();
        check_dim("head latent", h.latent_dim(), extractor_.latent_dim());
      },
      head_);
}

Model Model::initialize(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(mix_seed(seed, 0x6d6f64656cULL));
  FeatureExtractor extractor = FeatureExtractor::random(spec.layer_sizes, rng);
  const std::size_t n = spec.layer_sizes.back();
  if (spec.head == HeadType::kDistance) {
    DistanceHead head = DistanceHead::random(spec.num_classes, n, rng);
    head.frozen = spec.freeze_anchors;
    return Model(std::move(extractor), std::move(head), seed);
  }
  return Model(std::move(extractor), SoftmaxHead::random(spec.num_classes, n, rng), seed);
}

HeadType Model::head_type() const {
  return std::holds_alternative<DistanceHead>(head_) ? HeadType::kDistance : HeadType::kSoftmax;
}

const DistanceHead& Model::distance_head() const {
  if (auto* h = std::get_if<DistanceHead>(&head_)) return *h;
  throw ContractError("model has a softmax head, not a distance head");
}

DistanceHead& Model::distance_head() {
  if (auto* h = std::get_if<DistanceHead>(&head_)) return *h;
  throw ContractError("model has a softmax head, not a distance head");
}

const SoftmaxHead& Model::softmax_head() const {
  if (auto* h = std::get_if<SoftmaxHead>(&head_)) return *h;
  throw ContractError("model has a distance head, not a softmax head");
}

SoftmaxHead& Model::softmax_head() {
  if (auto* h = std::get_if<SoftmaxHead>(&head_)) return *h;
  throw ContractError("model has a distance head, not a softmax head");
}

std::size_t Model::num_classes() const {
  return std::visit([](const auto& h) { return h.num_classes(); }, head_);
}

std::vector<ParameterRef> Model::parameters() {
  std::vector<ParameterRef> out;
  auto& layers = extractor_.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "extractor." + std::to_string(l);
    out.push_back({prefix + ".weight", &layers[l].weight, true});
    out.push_back({prefix + ".bias", &layers[l].bias, true});
  }
  if (auto* d = std::get_if<DistanceHead>(&head_)) {
    out.push_back({"head.anchors", &d->anchors, !d->frozen});
  } else {
    auto& s = std::get<SoftmaxHead>(head_);
    out.push_back({"head.weight", &s.weight, true});
    out.push_back({"head.bias", &s.bias, true});
  }
  return out;
}

std::vector<ConstParameterRef> Model::parameters() const {
  std::vector<ConstParameterRef> out;
  for (const ParameterRef& p : const_cast<Model*>(this)->parameters()) {
    out.push_back({p.name, p.value, p.trainable});
  }
  return out;
}

double Model::score(std::span<const double> z) const {
  if (auto* d = std::get_if<DistanceHead>(&head_)) {
    const std::vector<double> dist = sq_distances(z, *d);
    return -dist[argmin(dist)];
  }
  const std::vector<double> p = posterior_softmax(z, std::get<SoftmaxHead>(head_));
  return p[argmax(p)];
}

std::size_t Model::predict(std::span<const double> z) const {
  if (auto* d = std::get_if<DistanceHead>(&head_)) return argmin(sq_distances(z, *d));
  return argmax(softmax_logits(z, std::get<SoftmaxHead>(head_)));
}

OpenSetDecision Model::decide(std::span<const double> z, double tau) const {
  if (auto* d = std::get_if<DistanceHead>(&head_)) return decide_distance(z, *d, tau);
  return decide_softmax(z, std::get<SoftmaxHead>(head_), tau);
}

bool Model::operator==(const Model& other) const {
  if (seed_ != other.seed_ || head_type() != other.head_type()) return false;
  if (extractor_.layer_sizes() != other.extractor_.layer_sizes()) return false;
  const auto mine = parameters();
  const auto theirs = other.parameters();
  if (mine.size() != theirs.size()) return false;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i].name != theirs[i].name || mine[i].trainable != theirs[i].trainable ||
        !(*mine[i].value == *theirs[i].value)) {
      return false;
    }
  }
  if (head_type() == HeadType::kDistance &&
      distance_head().priors != other.distance_head().priors) {
    return false;
  }
  return true;
}

// ---- graph binding --------------------------------------------------------------

ad::Var BoundModel::latent(ad::Var x) const {
  ad::Var cur = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    cur = ad::add_bias(ad::matmul(cur, layers[l].first), layers[l].second);
    if (l + 1 < layers.size()) cur = ad::relu(cur);
  }
  return cur;
}

BoundModel bind(ad::Tape& tape, const Model& model) {
  BoundModel out;
  for (const ConstParameterRef& p : model.parameters()) {
    out.params.push_back(tape.leaf(*p.value, p.trainable));
  }
  const std::size_t num_layers = model.extractor().layers().size();
  for (std::size_t l = 0; l < num_layers; ++l) {
    out.layers.emplace_back(out.params[2 * l], out.params[2 * l + 1]);
  }
  out.head = model.head_type();
  if (out.head == HeadType::kDistance) {
    const DistanceHead& h = model.distance_head();
    std::vector<double> log_priors(h.priors.size());
    std::transform(h.priors.begin(), h.priors.end(), log_priors.begin(),
                   [](double p) { return std::log(p); });
    out.distance.anchors = out.params[2 * num_layers];
    out.distance.log_priors = tape.constant(ad::Tensor::vector(std::move(log_priors)));
  } else {
    out.softmax.weight = out.params[2 * num_layers];
    out.softmax.bias = out.params[2 * num_layers + 1];
  }
  return out;
}

ad::Var distance_logits(const DistanceHeadVars& head, ad::Var z) {
  return ad::add_bias(ad::neg(ad::sq_distances(z, head.anchors)), head.log_priors);
}

ad::Var softmax_logits(const SoftmaxHeadVars& head, ad::Var z) {
  return ad::add_bias(ad::matmul(z, ad::transpose(head.weight)), head.bias);
}

ad::Tensor stack_rows(std::span<const std::vector<double>> rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t d = rows.front().size();
  std::vector<double> flat;
  flat.reserve(rows.size() * d);
  for (const auto& r : rows) {
    check_dim("stack_rows", r.size(), d);
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return ad::Tensor::matrix(rows.size(), d, std::move(flat));
}

}  // namespace openset
