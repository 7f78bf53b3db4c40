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

#include "openset/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "openset/errors.hpp"
#include "openset/rng.hpp"

namespace openset {

// ---- Dataset ---------------------------------------------------------------------

Dataset::Dataset(std::size_t dim, std::vector<double> features, std::vector<std::size_t> labels,
                 bool labeled)
    : dim_(dim), features_(std::move(features)), labels_(std::move(labels)), labeled_(labeled) {
  if (dim_ == 0 && !features_.empty()) throw ShapeError("dataset dimension must be positive");
  if (dim_ != 0 && features_.size() % dim_ != 0) {
    throw ShapeError("feature array of length " + std::to_string(features_.size()) +
                     " is not a multiple of dimension " + std::to_string(dim_));
  }
  if (labeled_ && labels_.size() != size()) {
    throw ShapeError("dataset has " + std::to_string(size()) + " rows but " +
                     std::to_string(labels_.size()) + " labels");
  }
  if (!labeled_ && !labels_.empty()) throw ShapeError("unlabeled dataset carries labels");
}

Dataset Dataset::unlabeled(std::size_t dim, std::vector<double> features) {
  return Dataset(dim, std::move(features), {}, false);
}

Dataset Dataset::labeled_set(std::size_t dim, std::vector<double> features,
                             std::vector<std::size_t> labels) {
  return Dataset(dim, std::move(features), std::move(labels), true);
}

std::span<const double> Dataset::row(std::size_t i) const {
  if (i >= size()) throw std::out_of_range("dataset row " + std::to_string(i));
  return std::span<const double>(features_).subspan(i * dim_, dim_);
}

ad::Tensor Dataset::gather(std::span<const std::size_t> indices) const {
  std::vector<double> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t i : indices) {
    auto r = row(i);
    out.insert(out.end(), r.begin(), r.end());
  }
  return ad::Tensor::matrix(indices.size(), dim_, std::move(out));
}

std::vector<std::size_t> Dataset::gather_labels(std::span<const std::size_t> indices) const {
  if (!labeled_) throw ContractError("gather_labels on an unlabeled dataset");
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(labels_.at(i));
  return out;
}

// ---- synthetic generator -----------------------------------------------------------

const char* kuc_mode_name(KucMode mode) {
  switch (mode) {
    case KucMode::kRing: return "ring";
    case KucMode::kHeldOutBlobs: return "held_out_blobs";
    case KucMode::kUniformBox: return "uniform_box";
  }
  return "ring";
}

KucMode parse_kuc_mode(const std::string& name) {
  for (KucMode m : {KucMode::kRing, KucMode::kHeldOutBlobs, KucMode::kUniformBox}) {
    if (name == kuc_mode_name(m)) return m;
  }
  throw ConfigError("data.synthetic.kuc_mode: unknown mode '" + name +
                    "' (expected ring, held_out_blobs or uniform_box)");
}

namespace {

struct SplitCounts {
  std::size_t train, val, test;
};

SplitCounts split_counts(const SyntheticSpec& spec) {
  const auto n = static_cast<double>(spec.samples_per_class);
  const auto train = static_cast<std::size_t>(std::llround(n * spec.train_fraction));
  const auto val = static_cast<std::size_t>(std::llround(n * spec.val_fraction));
  const std::size_t used = train + val;
  return {train, val, used < spec.samples_per_class ? spec.samples_per_class - used : 0};
}

std::vector<double> draw_centers(std::size_t count, const SyntheticSpec& spec, Rng& rng) {
  const double min_sep = 5.0 * spec.cluster_std;
  std::vector<double> centers;
  centers.reserve(count * spec.input_dim);
  std::vector<double> candidate(spec.input_dim);
  for (std::size_t k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < 10000 && !placed; ++attempt) {
      for (double& v : candidate) v = rng.uniform(-spec.class_center_scale, spec.class_center_scale);
      placed = true;
      for (std::size_t j = 0; j < k && placed; ++j) {
        double d2 = 0.0;
        for (std::size_t a = 0; a < spec.input_dim; ++a) {
          const double diff = candidate[a] - centers[j * spec.input_dim + a];
          d2 += diff * diff;
        }
        placed = d2 >= min_sep * min_sep;
      }
    }
    if (!placed) {
      throw ConfigError("data.synthetic.class_center_scale: cannot place " + std::to_string(count) +
                        " centers at least " + std::to_string(min_sep) + " apart");
    }
    centers.insert(centers.end(), candidate.begin(), candidate.end());
  }
  return centers;
}

void append_blob(std::vector<double>& out, std::span<const double> center, double stddev,
                 std::size_t count, Rng& rng) {
  for (std::size_t i = 0; i < count; ++i) {
    for (double c : center) out.push_back(c + stddev * rng.normal());
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(input_dim >= 1, "data.synthetic.input_dim must be >= 1");
  require(total_classes >= 1, "data.synthetic.total_classes must be >= 1");
  require(kkc_count >= 1, "data.synthetic.kkc_count must be >= 1");
  require(uuc_count >= 1, "data.synthetic.uuc_count must be >= 1");
  require(kkc_count + uuc_count <= total_classes,
          "data.synthetic.kkc_count + uuc_count must not exceed total_classes");
  require(samples_per_class >= 1, "data.synthetic.samples_per_class must be >= 1");
  require(std::isfinite(class_center_scale) && class_center_scale > 0.0,
          "data.synthetic.class_center_scale must be positive");
  require(std::isfinite(cluster_std) && cluster_std >= 0.0,
          "data.synthetic.cluster_std must be non-negative");
  require(kuc_mode != KucMode::kHeldOutBlobs || kuc_blob_count >= 1,
          "data.synthetic.kuc_blob_count must be >= 1 for held_out_blobs");
  require(train_fraction > 0.0 && train_fraction < 1.0,
          "data.synthetic.train_fraction must lie in (0, 1)");
  require(val_fraction >= 0.0 && val_fraction < 1.0,
          "data.synthetic.val_fraction must lie in [0, 1)");
  const SplitCounts counts = split_counts(*this);
  require(counts.train >= 1, "data.synthetic.train_fraction leaves no training samples");
  require(counts.test >= 1,
          "data.synthetic.train_fraction + val_fraction leaves no test samples");
}

DatasetBundle generate(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t d = spec.input_dim;
  const SplitCounts counts = split_counts(spec);

  std::vector<std::size_t> classes(spec.total_classes);
  std::iota(classes.begin(), classes.end(), std::size_t{0});
  rng.shuffle(classes);
  DatasetBundle bundle;
  bundle.kkc_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(spec.kkc_count));
  bundle.uuc_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(spec.kkc_count),
                            classes.begin() + static_cast<std::ptrdiff_t>(spec.kkc_count + spec.uuc_count));
  std::sort(bundle.kkc_classes.begin(), bundle.kkc_classes.end());
  std::sort(bundle.uuc_classes.begin(), bundle.uuc_classes.end());

  const std::size_t extra = spec.kuc_mode == KucMode::kHeldOutBlobs ? spec.kuc_blob_count : 0;
  const std::vector<double> centers = draw_centers(spec.total_classes + extra, spec, rng);
  auto center = [&](std::size_t k) {
    return std::span<const double>(centers).subspan(k * d, d);
  };

  std::vector<double> train, val, test, unknown;
  std::vector<std::size_t> train_y, val_y, test_y;
  for (std::size_t label = 0; label < bundle.kkc_classes.size(); ++label) {
    const auto c = center(bundle.kkc_classes[label]);
    append_blob(train, c, spec.cluster_std, counts.train, rng);
    append_blob(val, c, spec.cluster_std, counts.val, rng);
    append_blob(test, c, spec.cluster_std, counts.test, rng);
    train_y.insert(train_y.end(), counts.train, label);
    val_y.insert(val_y.end(), counts.val, label);
    test_y.insert(test_y.end(), counts.test, label);
  }
  for (std::size_t cls : bundle.uuc_classes) {
    append_blob(unknown, center(cls), spec.cluster_std, counts.test, rng);
  }

  const std::size_t background_count =
      spec.background_count > 0 ? spec.background_count : counts.train * spec.kkc_count;
  std::vector<double> background;
  background.reserve(background_count * d);
  switch (spec.kuc_mode) {
    case KucMode::kHeldOutBlobs: {
      for (std::size_t i = 0; i < background_count; ++i) {
        const auto c = center(spec.total_classes + i % extra);
        append_blob(background, c, spec.cluster_std, 1, rng);
      }
      break;
    }
    case KucMode::kRing: {
      double max_norm = 0.0;
      for (std::size_t k = 0; k < spec.total_classes; ++k) {
        double s = 0.0;
        for (double v : center(k)) s += v * v;
        max_norm = std::max(max_norm, std::sqrt(s));
      }
      const double inner = max_norm + 3.0 * spec.cluster_std;
      const double outer = inner + 0.5 * spec.class_center_scale;
      std::vector<double> dir(d);
      for (std::size_t i = 0; i < background_count; ++i) {
        double norm = 0.0;
        while (norm == 0.0) {
          norm = 0.0;
          for (double& v : dir) {
            v = rng.normal();
            norm += v * v;
          }
          norm = std::sqrt(norm);
        }
        const double radius = rng.uniform(inner, outer);
        for (double v : dir) background.push_back(v / norm * radius);
      }
      break;
    }
    case KucMode::kUniformBox: {
      const double half = 1.5 * spec.class_center_scale;
      for (std::size_t i = 0; i < background_count * d; ++i) {
        background.push_back(rng.uniform(-half, half));
      }
      break;
    }
  }

  bundle.train_known = Dataset::labeled_set(d, std::move(train), std::move(train_y));
  bundle.val_known = Dataset::labeled_set(d, std::move(val), std::move(val_y));
  bundle.test_known = Dataset::labeled_set(d, std::move(test), std::move(test_y));
  bundle.test_unknown = Dataset::unlabeled(d, std::move(unknown));
  bundle.background = Dataset::unlabeled(d, std::move(background));
  return bundle;
}

// ---- CSV --------------------------------------------------------------------------

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = line.find(',', pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("cannot format value");
  return std::string(buf, ptr);
}

}  // namespace

Dataset parse_csv(std::string_view text, const CsvSchema& schema) {
  std::vector<std::string_view> lines;
  {
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t next = text.find('\n', pos);
      if (next == std::string_view::npos) next = text.size();
      lines.push_back(text.substr(pos, next - pos));
      pos = next + 1;
    }
  }
  if (lines.empty() || trim(lines[0]).empty()) {
    throw ParseError(ParseError::Kind::kBadHeader, 1, "line 1: missing CSV header");
  }
  // A UTF-8 byte order mark is tolerated on the header.
  std::string_view header_line = lines[0];
  if (header_line.starts_with("\xEF\xBB\xBF")) header_line.remove_prefix(3);
  const auto header = split_commas(header_line);

  std::size_t dim = 0;
  bool has_label = false;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string_view name = trim(header[i]);
    if (name == "label" && i + 1 == header.size()) {
      has_label = true;
    } else if (name == "f" + std::to_string(i)) {
      ++dim;
    } else {
      throw ParseError(ParseError::Kind::kBadHeader, 1,
                       "line 1: unexpected column '" + std::string(name) + "' (expected f" +
                           std::to_string(i) + (i + 1 == header.size() ? " or label" : "") + ")");
    }
  }
  if (dim == 0) throw ParseError(ParseError::Kind::kBadHeader, 1, "line 1: no feature columns");
  if (schema.require_label && !has_label) {
    throw ParseError(ParseError::Kind::kMissingLabel, 1, "line 1: required column 'label' is missing");
  }
  if (schema.expected_dim && *schema.expected_dim != dim) {
    throw ParseError(ParseError::Kind::kBadHeader, 1,
                     "line 1: expected " + std::to_string(*schema.expected_dim) +
                         " feature columns, found " + std::to_string(dim));
  }

  std::vector<double> features;
  std::vector<std::size_t> labels;
  const std::size_t width = dim + (has_label ? 1 : 0);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    const auto cells = split_commas(lines[li]);
    if (cells.size() != width) {
      throw ParseError(ParseError::Kind::kRagged, line_no,
                       "line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                           " fields, found " + std::to_string(cells.size()));
    }
    for (std::size_t c = 0; c < dim; ++c) {
      const std::string_view cell = trim(cells[c]);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw ParseError(ParseError::Kind::kNonNumeric, line_no,
                         "line " + std::to_string(line_no) + ": column f" + std::to_string(c) +
                             " is not a finite number: '" + std::string(cell) + "'");
      }
      features.push_back(v);
    }
    if (has_label) {
      const std::string_view cell = trim(cells[dim]);
      long long y = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), y);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
        throw ParseError(ParseError::Kind::kNonNumeric, line_no,
                         "line " + std::to_string(line_no) + ": label is not an integer: '" +
                             std::string(cell) + "'");
      }
      if (y < 1 || (schema.num_classes && static_cast<std::size_t>(y) > *schema.num_classes)) {
        throw ParseError(ParseError::Kind::kNonNumeric, line_no,
                         "line " + std::to_string(line_no) + ": label " + std::to_string(y) +
                             " out of range");
      }
      labels.push_back(static_cast<std::size_t>(y - 1));
    }
  }
  return Dataset(dim, std::move(features), std::move(labels), has_label);
}

Dataset load_csv(const std::filesystem::path& path, const CsvSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open CSV file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_csv(buf.str(), schema);
  } catch (const ParseError& e) {
    throw ParseError(e.kind(), e.line(), path.string() + ": " + e.what());
  }
}

std::string format_csv(const Dataset& data) {
  std::string out;
  for (std::size_t j = 0; j < data.dim(); ++j) {
    if (j) out += ',';
    out += 'f' + std::to_string(j);
  }
  if (data.labeled()) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto r = data.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j) out += ',';
      out += format_double(r[j]);
    }
    if (data.labeled()) out += ',' + std::to_string(data.label(i) + 1);
    out += '\n';
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open CSV file for writing: " + path.string());
  out << format_csv(data);
  if (!out) throw IoError("failed writing CSV file: " + path.string());
}

// ---- batching ------------------------------------------------------------------------

BatchIterator::BatchIterator(std::size_t size, std::size_t batch_size, std::uint64_t seed,
                             bool shuffle)
    : size_(size), batch_size_(batch_size), seed_(seed), shuffle_(shuffle) {
  if (batch_size_ == 0) throw ConfigError("batch size must be positive");
}

std::vector<std::size_t> BatchIterator::permutation(std::size_t epoch_index) const {
  std::vector<std::size_t> order(size_);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle_) {
    Rng rng(mix_seed(seed_, epoch_index));
    rng.shuffle(order);
  }
  return order;
}

std::vector<std::vector<std::size_t>> BatchIterator::epoch(std::size_t epoch_index) const {
  const std::vector<std::size_t> order = permutation(epoch_index);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size_) {
    const std::size_t stop = std::min(order.size(), start + batch_size_);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (size_ + batch_size_ - 1) / batch_size_;
}

CyclingSampler::CyclingSampler(std::size_t size, std::size_t batch_size, std::uint64_t seed)
    : size_(size), batch_size_(batch_size), seed_(seed) {
  if (size_ == 0) throw ContractError("cannot sample batches from an empty set");
  if (batch_size_ == 0) throw ConfigError("batch size must be positive");
  reset(0);
}

void CyclingSampler::reset(std::size_t epoch_index) {
  epoch_ = epoch_index;
  pass_ = 0;
  refill();
}

void CyclingSampler::refill() {
  order_.resize(size_);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  Rng rng(mix_seed(mix_seed(seed_, epoch_), pass_));
  rng.shuffle(order_);
  cursor_ = 0;
}

std::vector<std::size_t> CyclingSampler::next() {
  std::vector<std::size_t> batch;
  batch.reserve(batch_size_);
  while (batch.size() < batch_size_) {
    if (cursor_ == order_.size()) {
      ++pass_;
      refill();
    }
    batch.push_back(order_[cursor_++]);
  }
  return batch;
}

}  // namespace openset
