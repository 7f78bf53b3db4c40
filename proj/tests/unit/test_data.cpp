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
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "openset/data.hpp"
#include "openset/errors.hpp"
#include "test_util.hpp"

using openset::BatchIterator;
using openset::CsvSchema;
using openset::CyclingSampler;
using openset::Dataset;
using openset::DatasetBundle;
using openset::KucMode;
using openset::ParseError;
using openset::SyntheticSpec;

namespace {

std::size_t parse_error_line(const std::string& text, const CsvSchema& schema = {},
                             ParseError::Kind* kind = nullptr) {
  try {
    openset::parse_csv(text, schema);
  } catch (const ParseError& e) {
    if (kind) *kind = e.kind();
    return e.line();
  }
  return 0;
}

}  // namespace

TEST(Dataset, ConstructionChecksShapes) {
  EXPECT_THROW(Dataset(2, {1, 2, 3}, {}, false), openset::ShapeError);
  EXPECT_THROW(Dataset::labeled_set(2, {1, 2, 3, 4}, {0}), openset::ShapeError);
  EXPECT_THROW(Dataset(2, {1, 2}, {0}, false), openset::ShapeError);
  const Dataset d = Dataset::labeled_set(2, {1, 2, 3, 4, 5, 6}, {0, 1, 0});
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.row(1)[1], 4.0);
  const std::vector<std::size_t> idx = {2, 0};
  EXPECT_EQ(d.gather(idx), openset::ad::Tensor::matrix(2, 2, {5, 6, 1, 2}));
  EXPECT_EQ(d.gather_labels(idx), (std::vector<std::size_t>{0, 0}));
  EXPECT_THROW(Dataset::unlabeled(2, {1, 2}).gather_labels(idx), openset::ContractError);
}

TEST(Generate, DeterministicPerSeed) {
  SyntheticSpec spec;
  spec.seed = 5;
  const DatasetBundle a = openset::generate(spec);
  const DatasetBundle b = openset::generate(spec);
  EXPECT_TRUE(a == b);
  spec.seed = 6;
  EXPECT_FALSE(a == openset::generate(spec));
}

TEST(Generate, DefaultShapes) {
  const DatasetBundle b = openset::generate(SyntheticSpec{});
  EXPECT_EQ(b.num_classes(), 6u);
  EXPECT_EQ(b.uuc_classes.size(), 4u);
  EXPECT_EQ(b.train_known.size(), 6u * 100);
  EXPECT_EQ(b.val_known.size(), 6u * 20);
  EXPECT_EQ(b.test_known.size(), 6u * 80);
  EXPECT_EQ(b.test_unknown.size(), 4u * 80);
  EXPECT_EQ(b.background.size(), b.train_known.size());
  EXPECT_TRUE(b.train_known.labeled());
  EXPECT_FALSE(b.background.labeled());
  EXPECT_FALSE(b.test_unknown.labeled());
  for (std::size_t y : b.train_known.labels()) EXPECT_LT(y, 6u);
  // Each class contributes exactly its share of every split.
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_EQ(std::count(b.train_known.labels().begin(), b.train_known.labels().end(), c), 100);
    EXPECT_EQ(std::count(b.test_known.labels().begin(), b.test_known.labels().end(), c), 80);
  }
}

TEST(Generate, SingleClassWithZeroSpreadCollapsesToCenter) {
  SyntheticSpec spec;
  spec.total_classes = 2;
  spec.kkc_count = 1;
  spec.uuc_count = 1;
  spec.cluster_std = 0.0;
  spec.samples_per_class = 20;
  spec.seed = 3;
  const DatasetBundle b = openset::generate(spec);
  const auto first = b.train_known.row(0);
  for (const Dataset* set : {&b.train_known, &b.val_known, &b.test_known}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      EXPECT_TRUE(std::equal(first.begin(), first.end(), set->row(i).begin()));
    }
  }
}

TEST(Generate, KnownAndUnknownClassesAreDisjoint) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    SyntheticSpec spec;
    spec.samples_per_class = 10;
    spec.seed = seed;
    const DatasetBundle b = openset::generate(spec);
    std::set<std::size_t> kkc(b.kkc_classes.begin(), b.kkc_classes.end());
    std::set<std::size_t> uuc(b.uuc_classes.begin(), b.uuc_classes.end());
    ASSERT_EQ(kkc.size(), 6u);
    ASSERT_EQ(uuc.size(), 4u);
    for (std::size_t c : uuc) EXPECT_EQ(kkc.count(c), 0u) << "seed " << seed;
  }
}

TEST(Generate, SplitsAreDistinctSamples) {
  SyntheticSpec spec;
  spec.seed = 12;
  const DatasetBundle b = openset::generate(spec);
  std::set<std::vector<double>> seen;
  for (const Dataset* set : {&b.train_known, &b.val_known, &b.test_known, &b.test_unknown}) {
    for (std::size_t i = 0; i < set->size(); ++i) {
      const auto r = set->row(i);
      EXPECT_TRUE(seen.insert(std::vector<double>(r.begin(), r.end())).second);
    }
  }
}

TEST(Generate, BackgroundModes) {
  for (KucMode mode : {KucMode::kRing, KucMode::kHeldOutBlobs, KucMode::kUniformBox}) {
    SyntheticSpec spec;
    spec.kuc_mode = mode;
    spec.background_count = 300;
    spec.seed = 4;
    const DatasetBundle b = openset::generate(spec);
    EXPECT_EQ(b.background.size(), 300u) << openset::kuc_mode_name(mode);
    EXPECT_EQ(openset::parse_kuc_mode(openset::kuc_mode_name(mode)), mode);
    if (mode == KucMode::kUniformBox) {
      for (double v : b.background.features()) EXPECT_LE(std::abs(v), 1.5 * spec.class_center_scale);
    }
    if (mode == KucMode::kRing) {
      // Every ring point lies outside all class blobs.
      double max_norm = 0.0;
      for (const Dataset* set : {&b.train_known, &b.test_unknown}) {
        for (std::size_t i = 0; i < set->size(); ++i) {
          const auto r = set->row(i);
          max_norm = std::max(max_norm, std::hypot(r[0], r[1]));
        }
      }
      for (std::size_t i = 0; i < b.background.size(); ++i) {
        const auto r = b.background.row(i);
        EXPECT_GT(std::hypot(r[0], r[1]), max_norm - 6 * spec.cluster_std);
      }
    }
  }
  EXPECT_THROW(openset::parse_kuc_mode("spiral"), openset::ConfigError);
}

TEST(Generate, RejectsInfeasibleSpecs) {
  SyntheticSpec spec;
  spec.kkc_count = 7;
  EXPECT_THROW(openset::generate(spec), openset::ConfigError);
  spec = SyntheticSpec{};
  spec.uuc_count = 0;
  EXPECT_THROW(openset::generate(spec), openset::ConfigError);
  spec = SyntheticSpec{};
  spec.train_fraction = 0.95;
  spec.val_fraction = 0.05;
  EXPECT_THROW(openset::generate(spec), openset::ConfigError);
  spec = SyntheticSpec{};
  spec.cluster_std = 5.0;  // centers cannot be separated inside the box
  try {
    openset::generate(spec);
    ADD_FAILURE();
  } catch (const openset::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("class_center_scale"), std::string::npos);
  }
}

TEST(Csv, HandWrittenFile) {
  const Dataset d = openset::parse_csv("f0,f1,label\n0.5,-1,2\n3e2,4.25,1\n");
  ASSERT_EQ(d.size(), 2u);
  EXPECT_TRUE(d.labeled());
  EXPECT_EQ(d.row(0)[0], 0.5);
  EXPECT_EQ(d.row(0)[1], -1.0);
  EXPECT_EQ(d.row(1)[0], 300.0);
  EXPECT_EQ(d.label(0), 1u);
  EXPECT_EQ(d.label(1), 0u);
  const Dataset u = openset::parse_csv("\xEF\xBB\xBF" "f0\r\n1\r\n2\r\n\r\n");
  EXPECT_EQ(u.size(), 2u);
  EXPECT_FALSE(u.labeled());
}

TEST(Csv, ErrorsCarryLineNumbers) {
  ParseError::Kind kind{};
  EXPECT_EQ(parse_error_line("f0,f1\n1,2\n1,abc\n", {}, &kind), 3u);
  EXPECT_EQ(kind, ParseError::Kind::kNonNumeric);
  EXPECT_EQ(parse_error_line("f0,f1\n1,2\n3,4\n5\n", {}, &kind), 4u);
  EXPECT_EQ(kind, ParseError::Kind::kRagged);
  EXPECT_EQ(parse_error_line("f0,f1\n1,2\n", {std::nullopt, true, std::nullopt}, &kind), 1u);
  EXPECT_EQ(kind, ParseError::Kind::kMissingLabel);
  EXPECT_EQ(parse_error_line("x,y\n1,2\n", {}, &kind), 1u);
  EXPECT_EQ(kind, ParseError::Kind::kBadHeader);
  EXPECT_EQ(parse_error_line("f0,f1\n1,2\n", {3, false, std::nullopt}, &kind), 1u);
  EXPECT_EQ(parse_error_line("f0,label\n1,0\n"), 2u);
  EXPECT_EQ(parse_error_line("f0,label\n1,1\n1,4\n", {std::nullopt, false, 3}), 3u);
  EXPECT_EQ(parse_error_line("f0,label\n1,1.5\n"), 2u);
  EXPECT_EQ(parse_error_line("f0\n1\nnan\n"), 3u);
  EXPECT_EQ(parse_error_line(""), 1u);
}

TEST(Csv, ThousandRowRoundTripIsLossless) {
  openset::Rng rng(99);
  std::vector<double> f;
  std::vector<std::size_t> y;
  for (int i = 0; i < 1000; ++i) {
    f.push_back(rng.normal() * std::pow(10.0, rng.uniform(-8, 8)));
    f.push_back(rng.uniform());
    f.push_back(-rng.normal());
    y.push_back(rng.below(5));
  }
  const Dataset d = Dataset::labeled_set(3, f, y);
  const auto dir = openset::testing::temp_dir("csv");
  openset::write_csv(dir / "d.csv", d);
  const Dataset back = openset::load_csv(dir / "d.csv", {3, true, 5});
  EXPECT_TRUE(back == d);
  EXPECT_EQ(openset::format_csv(back), openset::format_csv(d));
  EXPECT_THROW(openset::load_csv(dir / "missing.csv"), openset::IoError);

  std::ofstream(dir / "bad.csv") << "f0\n1\nx\n";
  try {
    openset::load_csv(dir / "bad.csv");
    ADD_FAILURE();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
    EXPECT_NE(std::string(e.what()).find("bad.csv"), std::string::npos);
  }
}

TEST(BatchIterator, SizesAndOrder) {
  const BatchIterator it(10, 4, 1, false);
  const auto batches = it.epoch(0);
  ASSERT_EQ(batches.size(), 3u);
  EXPECT_EQ(batches[0].size(), 4u);
  EXPECT_EQ(batches[1].size(), 4u);
  EXPECT_EQ(batches[2].size(), 2u);
  EXPECT_EQ(it.batches_per_epoch(), 3u);
  std::vector<std::size_t> flat;
  for (const auto& b : batches) flat.insert(flat.end(), b.begin(), b.end());
  std::vector<std::size_t> identity(10);
  std::iota(identity.begin(), identity.end(), std::size_t{0});
  EXPECT_EQ(flat, identity);
  EXPECT_THROW(BatchIterator(10, 0, 1, true), openset::ConfigError);
}

TEST(BatchIterator, ShuffledEpochsArePermutations) {
  const BatchIterator a(50, 7, 123, true);
  const BatchIterator b(50, 7, 124, true);
  EXPECT_NE(a.permutation(0), b.permutation(0));
  EXPECT_NE(a.permutation(0), a.permutation(1));
  EXPECT_EQ(a.permutation(3), BatchIterator(50, 7, 123, true).permutation(3));
  for (std::size_t e = 0; e < 5; ++e) {
    std::vector<std::size_t> flat;
    for (const auto& batch : a.epoch(e)) flat.insert(flat.end(), batch.begin(), batch.end());
    std::sort(flat.begin(), flat.end());
    std::vector<std::size_t> identity(50);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    EXPECT_EQ(flat, identity);
  }
}

TEST(CyclingSampler, FixedSizeBatchesAndResettableState) {
  CyclingSampler s(10, 4, 7);
  s.reset(2);
  std::vector<std::vector<std::size_t>> first;
  for (int i = 0; i < 5; ++i) first.push_back(s.next());
  for (const auto& b : first) EXPECT_EQ(b.size(), 4u);
  // The first 10 indices drawn form one full pass.
  std::vector<std::size_t> pass;
  for (const auto& b : first) pass.insert(pass.end(), b.begin(), b.end());
  pass.resize(10);
  std::sort(pass.begin(), pass.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(pass[i], i);

  s.reset(2);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(s.next(), first[i]);
  s.reset(3);
  EXPECT_NE(s.next(), first[0]);
  EXPECT_THROW(CyclingSampler(0, 4, 1), openset::ContractError);
}
