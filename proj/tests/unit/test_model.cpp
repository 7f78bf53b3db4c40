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

#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "openset/errors.hpp"
#include "openset/model.hpp"
#include "test_util.hpp"

namespace ad = openset::ad;
using openset::DistanceHead;
using openset::HeadType;
using openset::Model;
using openset::ModelSpec;
using openset::Rng;
using openset::SoftmaxHead;

namespace {

ModelSpec spec(HeadType head, std::size_t classes = 3) {
  ModelSpec s;
  s.layer_sizes = {4, 8, 5};
  s.num_classes = classes;
  s.head = head;
  return s;
}

DistanceHead fixed_distance_head() {
  DistanceHead head;
  head.anchors = ad::Tensor::matrix(3, 2, {0, 0, 4, 0, 0, 4});
  head.priors = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  return head;
}

double norm(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

}  // namespace

TEST(Model, InitializationIsDeterministicPerSeed) {
  for (HeadType head : {HeadType::kDistance, HeadType::kSoftmax}) {
    const Model a = Model::initialize(spec(head), 11);
    const Model b = Model::initialize(spec(head), 11);
    const Model c = Model::initialize(spec(head), 12);
    EXPECT_TRUE(a == b);
    EXPECT_FALSE(a == c);
    EXPECT_EQ(a.seed(), 11u);
  }
}

TEST(Model, ParameterOrderAndShapes) {
  Model m = Model::initialize(spec(HeadType::kDistance), 1);
  const auto params = m.parameters();
  ASSERT_EQ(params.size(), 5u);
  EXPECT_EQ(params[0].name, "extractor.0.weight");
  EXPECT_EQ(params[1].name, "extractor.0.bias");
  EXPECT_EQ(params[2].name, "extractor.1.weight");
  EXPECT_EQ(params[3].name, "extractor.1.bias");
  EXPECT_EQ(params[4].name, "head.anchors");
  EXPECT_EQ(params[0].value->shape(), (ad::Shape{4, 8}));
  EXPECT_EQ(params[3].value->shape(), (ad::Shape{5}));
  EXPECT_EQ(params[4].value->shape(), (ad::Shape{3, 5}));
  for (const auto& p : params) EXPECT_TRUE(p.trainable);
  // Biases start at zero.
  for (double b : params[1].value->data()) EXPECT_EQ(b, 0.0);

  Model s = Model::initialize(spec(HeadType::kSoftmax), 1);
  const auto sp = s.parameters();
  ASSERT_EQ(sp.size(), 6u);
  EXPECT_EQ(sp[4].name, "head.weight");
  EXPECT_EQ(sp[5].name, "head.bias");
}

TEST(Model, FrozenAnchorsAreNotTrainable) {
  ModelSpec s = spec(HeadType::kDistance);
  s.freeze_anchors = true;
  Model m = Model::initialize(s, 3);
  EXPECT_FALSE(m.parameters().back().trainable);
  EXPECT_TRUE(m.distance_head().frozen);
}

TEST(Model, HeadAccessorsCheckType) {
  Model m = Model::initialize(spec(HeadType::kDistance), 1);
  EXPECT_EQ(m.head_type(), HeadType::kDistance);
  EXPECT_THROW(m.softmax_head(), openset::ContractError);
  Model s = Model::initialize(spec(HeadType::kSoftmax), 1);
  EXPECT_THROW(s.distance_head(), openset::ContractError);
}

TEST(Model, SpecValidation) {
  ModelSpec s = spec(HeadType::kDistance);
  s.layer_sizes = {4};
  EXPECT_THROW(s.validate(), openset::ConfigError);
  s.layer_sizes = {4, 0, 2};
  EXPECT_THROW(s.validate(), openset::ConfigError);
  s = spec(HeadType::kDistance, 0);
  EXPECT_THROW(s.validate(), openset::ConfigError);
  EXPECT_THROW(openset::parse_head_type("cosine"), openset::ConfigError);
}

TEST(Model, LatentChecksInputDimension) {
  Model m = Model::initialize(spec(HeadType::kDistance), 1);
  const std::vector<double> bad(3, 0.0);
  EXPECT_THROW(m.latent(bad), openset::ShapeError);
}

TEST(Model, IdentityExtractorPassesInputThrough) {
  openset::DenseLayer layer{ad::Tensor::matrix(2, 2, {1, 0, 0, 1}), ad::Tensor::vector({0, 0})};
  openset::FeatureExtractor fx({2, 2}, {layer});
  const std::vector<double> x = {-1.5, 2.25};
  EXPECT_EQ(fx.latent(x), x);
}

TEST(Argmin, TiesResolveToLowestIndex) {
  const std::vector<double> v = {3.0, 1.0, 1.0, 2.0};
  EXPECT_EQ(openset::argmin(v), 1u);
  const std::vector<double> w = {1.0, 5.0, 5.0};
  EXPECT_EQ(openset::argmax(w), 1u);
}

TEST(DistanceHead, NearestAnchorWinsAndPosteriorSumsToOne) {
  const DistanceHead head = fixed_distance_head();
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> z = {rng.uniform(-3, 7), rng.uniform(-3, 7)};
    const auto d = openset::sq_distances(z, head);
    const auto p = openset::posterior_distance(z, head);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    EXPECT_EQ(openset::argmax(p), openset::argmin(d));
  }
}

TEST(DistanceHead, AcceptanceRegionIsUnionOfBalls) {
  const DistanceHead head = fixed_distance_head();
  const double tau = -1.0;  // radius 1 around each anchor
  Rng rng(9);
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> z = {rng.uniform(-2, 6), rng.uniform(-2, 6)};
    const auto d = openset::sq_distances(z, head);
    const bool inside = *std::min_element(d.begin(), d.end()) <= 1.0;
    const auto dec = openset::decide_distance(z, head, tau);
    EXPECT_EQ(!dec.rejected, inside);
    if (dec.rejected) {
      EXPECT_EQ(dec.predicted_class, 3u);
    }
  }
  // On the boundary the ball is closed.
  const std::vector<double> edge = {1.0, 0.0};
  EXPECT_FALSE(openset::decide_distance(edge, head, tau).rejected);
}

TEST(DistanceHead, FarPointsAreAlwaysRejected) {
  const DistanceHead head = fixed_distance_head();
  for (double r : {10.0, 100.0, 1e4}) {
    const std::vector<double> z = {r, -r};
    EXPECT_TRUE(openset::decide_distance(z, head, -4.0).rejected);
  }
}

TEST(DistanceHead, AcceptedSetShrinksAsTauGrows) {
  const DistanceHead head = fixed_distance_head();
  Rng rng(21);
  std::vector<std::vector<double>> pts;
  for (int i = 0; i < 500; ++i) pts.push_back({rng.uniform(-3, 7), rng.uniform(-3, 7)});
  std::size_t prev = pts.size() + 1;
  for (double tau = -20.0; tau <= 0.0; tau += 1.0) {
    std::size_t accepted = 0;
    for (const auto& z : pts) accepted += !openset::decide_distance(z, head, tau).rejected;
    EXPECT_LE(accepted, prev);
    prev = accepted;
  }
}

TEST(SoftmaxHead, ConfidenceGrowsWithoutBound) {
  // Scaling a latent along a class direction pushes max posterior to 1, so
  // arbitrarily distant inputs are accepted at any tau < 1.
  SoftmaxHead head;
  head.weight = ad::Tensor::matrix(2, 2, {1, 0, 0, 1});
  head.bias = ad::Tensor::vector({0, 0});
  for (double r : {10.0, 100.0, 1000.0}) {
    const std::vector<double> z = {r, 0.0};
    const auto dec = openset::decide_softmax(z, head, 0.99);
    EXPECT_FALSE(dec.rejected);
    EXPECT_EQ(dec.predicted_class, 0u);
  }
  const std::vector<double> z = {0.5, 0.0};
  const auto p = openset::posterior_softmax(z, head);
  EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
  EXPECT_THROW(openset::decide_softmax(z, head, 0.0), openset::DomainError);
  EXPECT_THROW(openset::decide_softmax(z, head, 1.5), openset::DomainError);
}

TEST(Model, ScoreMatchesDecisionRule) {
  Model m = Model::initialize(spec(HeadType::kDistance), 4);
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    const auto z = m.latent(x);
    const double s = m.score(z);
    EXPECT_FALSE(m.decide(z, s).rejected);
    EXPECT_TRUE(m.decide(z, std::nextafter(s, 1.0)).rejected);
    EXPECT_EQ(m.decide(z, s).predicted_class, m.predict(z));
  }
  EXPECT_GT(norm(m.latent(std::vector<double>{1, 2, 3, 4})), 0.0);
}

TEST(Binding, GraphMatchesScalarForward) {
  Model m = Model::initialize(spec(HeadType::kDistance), 8);
  Rng rng(3);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 6; ++i) rows.push_back({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
  ad::Tape tape;
  const auto bound = openset::bind(tape, m);
  EXPECT_EQ(bound.params.size(), m.parameters().size());
  const ad::Var z = bound.latent(tape.constant(openset::stack_rows(rows)));
  const ad::Var logits = openset::distance_logits(bound.distance, z);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto zi = m.latent(rows[i]);
    const auto d = openset::sq_distances(zi, m.distance_head());
    for (std::size_t j = 0; j < zi.size(); ++j) EXPECT_NEAR(z.value().at(i, j), zi[j], 1e-12);
    for (std::size_t c = 0; c < d.size(); ++c) {
      EXPECT_NEAR(logits.value().at(i, c), std::log(1.0 / 3) - d[c], 1e-10);
    }
  }
}
