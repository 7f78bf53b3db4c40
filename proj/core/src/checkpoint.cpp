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

#include "openset/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "openset/errors.hpp"

namespace openset {
namespace {

constexpr std::string_view kMagic = "openset-checkpoint 1";

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw ParseError(ParseError::Kind::kFormat, line, "checkpoint line " + std::to_string(line) +
                                                        ": " + what);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    const std::size_t next = line.find(' ', pos);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    if (next > pos) out.push_back(line.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

template <typename Int>
Int parse_int(std::string_view tok, std::size_t line) {
  Int v{};
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    fail(line, "expected integer, got '" + std::string(tok) + "'");
  }
  return v;
}

void write_values(std::ostream& out, std::span<const double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ' ';
    out << format_hex(values[i]);
  }
  out << '\n';
}

void write_tensor(std::ostream& out, std::string_view tag, const std::string& name,
                  const ad::Tensor& t) {
  out << tag << ' ' << name << ' ' << t.rank();
  for (std::size_t d : t.shape()) out << ' ' << d;
  out << '\n';
  write_values(out, t.values());
}

class Reader {
 public:
  explicit Reader(std::string_view text) {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      std::size_t next = text.find('\n', pos);
      if (next == std::string_view::npos) next = text.size();
      std::string_view line = text.substr(pos, next - pos);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines_.push_back(line);
      pos = next + 1;
    }
    while (!lines_.empty() && lines_.back().empty()) lines_.pop_back();
  }

  bool done() const { return cursor_ >= lines_.size(); }
  std::size_t line_no() const { return cursor_; }  // 1-based number of the last line read

  std::vector<std::string_view> next() {
    if (done()) fail(cursor_ + 1, "unexpected end of file");
    return split(lines_[cursor_++]);
  }

  std::vector<std::string_view> expect(std::string_view key, std::size_t min_tokens) {
    auto toks = next();
    if (toks.empty() || toks[0] != key) fail(cursor_, "expected '" + std::string(key) + "'");
    if (toks.size() < min_tokens) fail(cursor_, "truncated '" + std::string(key) + "' record");
    return toks;
  }

  std::string_view peek_key() const {
    if (done()) return {};
    auto toks = split(lines_[cursor_]);
    return toks.empty() ? std::string_view{} : toks[0];
  }

  std::string_view raw_next() {
    if (done()) fail(cursor_ + 1, "unexpected end of file");
    return lines_[cursor_++];
  }

 private:
  std::vector<std::string_view> lines_;
  std::size_t cursor_ = 0;
};

std::vector<double> read_values(Reader& r, std::size_t count) {
  auto toks = r.next();
  if (toks.size() != count) {
    fail(r.line_no(), "expected " + std::to_string(count) + " values, got " +
                          std::to_string(toks.size()));
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    try {
      out[i] = parse_hex(toks[i]);
    } catch (const ParseError&) {
      fail(r.line_no(), "bad value '" + std::string(toks[i]) + "'");
    }
  }
  return out;
}

std::pair<std::string, ad::Tensor> read_tensor(Reader& r, std::string_view tag) {
  auto toks = r.expect(tag, 3);
  const std::size_t line = r.line_no();
  const auto rank = parse_int<std::size_t>(toks[2], line);
  if (toks.size() != 3 + rank) fail(line, "rank does not match dimension count");
  ad::Shape shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    shape.push_back(parse_int<std::size_t>(toks[3 + i], line));
    count *= shape.back();
  }
  std::vector<double> values = read_values(r, count);
  try {
    return {std::string(toks[1]), ad::Tensor(std::move(shape), std::move(values))};
  } catch (const ShapeError& e) {
    fail(line, e.what());
  }
}

}  // namespace

std::string format_hex(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::hex);
  if (ec != std::errc()) throw NumericError("cannot format value");
  return std::string(buf, ptr);
}

double parse_hex(std::string_view token) {
  double v = 0.0;
  auto [ptr, ec] =
      std::from_chars(token.data(), token.data() + token.size(), v, std::chars_format::hex);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(ParseError::Kind::kNonNumeric, 0,
                     "not a hex float: '" + std::string(token) + "'");
  }
  return v;
}

std::string serialize_checkpoint(const Model& model, const TrainingState* training) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "seed " << model.seed() << '\n';
  out << "head " << head_type_name(model.head_type()) << '\n';
  const auto& sizes = model.extractor().layer_sizes();
  out << "layer_sizes " << sizes.size();
  for (std::size_t s : sizes) out << ' ' << s;
  out << '\n';
  out << "num_classes " << model.num_classes() << '\n';
  if (model.head_type() == HeadType::kDistance) {
    const DistanceHead& h = model.distance_head();
    out << "frozen_anchors " << (h.frozen ? 1 : 0) << '\n';
    out << "priors " << h.priors.size() << ' ';
    write_values(out, h.priors);
  }
  const auto params = model.parameters();
  for (const auto& p : params) write_tensor(out, "tensor", p.name, *p.value);
  if (training) {
    if (training->velocity.size() != params.size()) {
      throw ContractError("training state has " + std::to_string(training->velocity.size()) +
                          " velocity tensors for " + std::to_string(params.size()) +
                          " parameters");
    }
    out << "training " << training->epochs_completed << '\n';
    for (std::size_t i = 0; i < params.size(); ++i) {
      write_tensor(out, "velocity", params[i].name, training->velocity[i]);
    }
    out << "trace " << training->trace.size() << '\n';
    for (const EpochRecord& rec : training->trace) {
      out << rec.epoch;
      for (double v : {rec.lr, rec.loss_cf, rec.loss_bg_k, rec.loss_bg_u, rec.loss_reg,
                       rec.loss_total, rec.train_accuracy}) {
        out << ' ' << format_hex(v);
      }
      out << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

Checkpoint parse_checkpoint(std::string_view text) {
  Reader r(text);
  if (r.raw_next() != kMagic) fail(1, "missing '" + std::string(kMagic) + "' header");

  const auto seed = parse_int<std::uint64_t>(r.expect("seed", 2)[1], r.line_no());
  const HeadType head = [&] {
    auto toks = r.expect("head", 2);
    try {
      return parse_head_type(std::string(toks[1]));
    } catch (const ConfigError& e) {
      fail(r.line_no(), e.what());
    }
  }();

  auto size_toks = r.expect("layer_sizes", 2);
  const auto count = parse_int<std::size_t>(size_toks[1], r.line_no());
  if (size_toks.size() != count + 2 || count < 2) fail(r.line_no(), "malformed layer_sizes");
  std::vector<std::size_t> sizes;
  for (std::size_t i = 0; i < count; ++i) {
    sizes.push_back(parse_int<std::size_t>(size_toks[2 + i], r.line_no()));
  }
  const auto num_classes = parse_int<std::size_t>(r.expect("num_classes", 2)[1], r.line_no());

  bool frozen = false;
  std::vector<double> priors;
  if (head == HeadType::kDistance) {
    frozen = parse_int<int>(r.expect("frozen_anchors", 2)[1], r.line_no()) != 0;
    auto toks = r.expect("priors", 2);
    const auto c = parse_int<std::size_t>(toks[1], r.line_no());
    if (toks.size() != c + 2) fail(r.line_no(), "malformed priors");
    for (std::size_t i = 0; i < c; ++i) priors.push_back(parse_hex(toks[2 + i]));
  }

  auto take = [&](const std::string& want) {
    auto [name, tensor] = read_tensor(r, "tensor");
    if (name != want) fail(r.line_no() - 1, "expected tensor '" + want + "', got '" + name + "'");
    return tensor;
  };

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::string prefix = "extractor." + std::to_string(l);
    DenseLayer layer;
    layer.weight = take(prefix + ".weight");
    layer.bias = take(prefix + ".bias");
    layers.push_back(std::move(layer));
  }

  Checkpoint out;
  try {
    FeatureExtractor extractor(sizes, std::move(layers));
    if (head == HeadType::kDistance) {
      DistanceHead h;
      h.anchors = take("head.anchors");
      h.priors = std::move(priors);
      h.frozen = frozen;
      out.model = Model(std::move(extractor), std::move(h), seed);
    } else {
      SoftmaxHead h;
      h.weight = take("head.weight");
      h.bias = take("head.bias");
      out.model = Model(std::move(extractor), std::move(h), seed);
    }
  } catch (const ShapeError& e) {
    fail(r.line_no(), e.what());
  } catch (const DomainError& e) {
    fail(r.line_no(), e.what());
  }
  if (out.model.num_classes() != num_classes) fail(r.line_no(), "num_classes mismatch");

  if (r.peek_key() == "training") {
    TrainingState state;
    state.epochs_completed = parse_int<std::size_t>(r.expect("training", 2)[1], r.line_no());
    for (const auto& p : out.model.parameters()) {
      auto [name, tensor] = read_tensor(r, "velocity");
      if (name != p.name || tensor.shape() != p.value->shape()) {
        fail(r.line_no() - 1, "velocity '" + name + "' does not match parameter '" + p.name + "'");
      }
      state.velocity.push_back(std::move(tensor));
    }
    const auto rows = parse_int<std::size_t>(r.expect("trace", 2)[1], r.line_no());
    for (std::size_t i = 0; i < rows; ++i) {
      auto toks = r.next();
      if (toks.size() != 8) fail(r.line_no(), "trace row needs 8 fields");
      EpochRecord rec;
      rec.epoch = parse_int<std::size_t>(toks[0], r.line_no());
      double* fields[] = {&rec.lr,       &rec.loss_cf,    &rec.loss_bg_k,     &rec.loss_bg_u,
                          &rec.loss_reg, &rec.loss_total, &rec.train_accuracy};
      for (std::size_t k = 0; k < 7; ++k) *fields[k] = parse_hex(toks[k + 1]);
      state.trace.push_back(rec);
    }
    out.training = std::move(state);
  }
  if (r.raw_next() != "end") fail(r.line_no(), "expected 'end'");
  if (!r.done()) fail(r.line_no() + 1, "trailing content after 'end'");
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model,
                     const TrainingState* training) {
  const std::string text = serialize_checkpoint(model, training);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out << text;
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_checkpoint(buf.str());
}

}  // namespace openset
