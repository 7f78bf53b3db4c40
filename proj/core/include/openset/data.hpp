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

// Datasets, the synthetic open-set generator, CSV ingestion and batching.
//
// Dataset roles:
//   train_known   labeled known-class training samples
//   background    unlabeled known-unknown samples used only for training
//   val_known     labeled held-out known samples (threshold selection)
//   test_known    labeled known-class test samples
//   test_unknown  unlabeled samples of classes never seen in training
//
// CSV layout: a header row "f0,f1,...,f{d-1}" optionally followed by
// ",label"; labels are 1-based integers in files and 0-based in memory.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "openset/autodiff.hpp"

namespace openset {

class Dataset {
 public:
  Dataset() = default;
  Dataset(std::size_t dim, std::vector<double> features, std::vector<std::size_t> labels,
          bool labeled);

  static Dataset unlabeled(std::size_t dim, std::vector<double> features);
  static Dataset labeled_set(std::size_t dim, std::vector<double> features,
                             std::vector<std::size_t> labels);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return dim_ == 0 ? 0 : features_.size() / dim_; }
  bool empty() const { return size() == 0; }
  bool labeled() const { return labeled_; }

  std::span<const double> row(std::size_t i) const;
  std::size_t label(std::size_t i) const { return labels_.at(i); }
  const std::vector<double>& features() const { return features_; }
  const std::vector<std::size_t>& labels() const { return labels_; }

  // [indices.size(), dim] tensor of the selected rows.
  ad::Tensor gather(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> gather_labels(std::span<const std::size_t> indices) const;

  bool operator==(const Dataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> features_;
  std::vector<std::size_t> labels_;
  bool labeled_ = false;
};

enum class KucMode { kRing, kHeldOutBlobs, kUniformBox };

const char* kuc_mode_name(KucMode mode);
KucMode parse_kuc_mode(const std::string& name);

struct SyntheticSpec {
  std::size_t input_dim = 2;
  std::size_t total_classes = 10;
  std::size_t kkc_count = 6;
  std::size_t uuc_count = 4;
  std::size_t samples_per_class = 200;
  double class_center_scale = 2.0;
  double cluster_std = 0.15;
  KucMode kuc_mode = KucMode::kHeldOutBlobs;
  std::size_t kuc_blob_count = 4;    // held_out_blobs only
  std::size_t background_count = 0;  // 0: same as the number of training samples
  double train_fraction = 0.5;
  double val_fraction = 0.1;
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct DatasetBundle {
  Dataset train_known;
  Dataset background;
  Dataset val_known;
  Dataset test_known;
  Dataset test_unknown;
  // Source class ids (0..total_classes-1) of the known classes in label
  // order, and of the test-time unknown classes.
  std::vector<std::size_t> kkc_classes;
  std::vector<std::size_t> uuc_classes;

  std::size_t num_classes() const { return kkc_classes.size(); }
  bool operator==(const DatasetBundle&) const = default;
};

// Gaussian blobs with a seeded known/unknown class partition. Every class
// contributes disjoint train / val / test index ranges; background samples
// are drawn by kuc_mode and never from unknown classes.
DatasetBundle generate(const SyntheticSpec& spec);

struct CsvSchema {
  std::optional<std::size_t> expected_dim;
  bool require_label = false;
  // Number of classes; labels outside 1..num_classes are rejected when set.
  std::optional<std::size_t> num_classes;
};

// Throws ParseError carrying the 1-based line number of the offending row.
Dataset parse_csv(std::string_view text, const CsvSchema& schema = {});
Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema = {});
std::string format_csv(const Dataset& data);
void write_csv(const std::filesystem::path& path, const Dataset& data);

// Deterministic mini-batch schedule over n samples. The permutation for an
// epoch depends only on (seed, epoch); the last partial batch is kept.
class BatchIterator {
 public:
  BatchIterator(std::size_t size, std::size_t batch_size, std::uint64_t seed, bool shuffle);

  std::vector<std::vector<std::size_t>> epoch(std::size_t epoch_index) const;
  std::vector<std::size_t> permutation(std::size_t epoch_index) const;
  std::size_t batches_per_epoch() const;

 private:
  std::size_t size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  bool shuffle_;
};

// Endless stream of fixed-size batches cycling through reshuffled passes.
// reset(epoch) rewinds to a state that depends only on (seed, epoch).
class CyclingSampler {
 public:
  CyclingSampler(std::size_t size, std::size_t batch_size, std::uint64_t seed);

  void reset(std::size_t epoch_index);
  std::vector<std::size_t> next();

 private:
  void refill();

  std::size_t size_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t pass_ = 0;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

}  // namespace openset
