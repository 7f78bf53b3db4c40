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

#include "openset/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "openset/errors.hpp"

namespace openset {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Walks one JSON object, remembering which keys were read so that the
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(display() + " must be an object");
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    if (it == node_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json kEmpty = json::object();
    auto it = node_.find(key);
    if (it == node_.end()) return Section(kEmpty, key_path(key));
    return Section(*it, key_path(key));
  }

  void read(const std::string& key, std::size_t& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_unsigned()) {
        throw ConfigError(key_path(key) + " must be a non-negative integer");
      }
      out = v->get<std::size_t>();
    }
  }

  void read_u64(const std::string& key, std::uint64_t& out) {
    std::size_t tmp = out;
    read(key, tmp);
    out = tmp;
  }

  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key) + " must be a number");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, std::optional<double>& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(key_path(key) + " must be a number or null");
      out = v->get<double>();
    }
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(key_path(key) + " must be true or false");
      out = v->get<bool>();
    }
  }

  void read(const std::string& key, std::string& out) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(key_path(key) + " must be a string");
      out = v->get<std::string>();
    }
  }

  void read(const std::string& key, std::vector<std::size_t>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(key_path(key) + " must be an array of integers");
      out.clear();
      for (const json& e : *v) {
        if (!e.is_number_unsigned()) {
          throw ConfigError(key_path(key) + " must be an array of non-negative integers");
        }
        out.push_back(e.get<std::size_t>());
      }
    }
  }

  // Throws for keys that were never read.
  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key: " + key_path(it.key()));
    }
  }

 private:
  std::string display() const { return path_.empty() ? "config" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

void set_path(json& root, const std::string& dotted, json value) {
  json* node = &root;
  std::size_t pos = 0;
  while (true) {
    const std::size_t dot = dotted.find('.', pos);
    const std::string key = dotted.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (key.empty()) throw ConfigError("malformed override key: " + dotted);
    if (!node->is_object()) throw ConfigError("override " + dotted + " descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    pos = dot + 1;
  }
}

void apply_override(json& root, const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value: " + assignment);
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_path(root, key, std::move(value));
}

ExperimentConfig from_json(const json& root) {
  ExperimentConfig cfg;
  Section top(root, "");
  top.read_u64("seed", cfg.seed);
  top.read("output_dir", cfg.output_dir);

  {
    Section data = top.child("data");
    std::string source = data_source_name(cfg.source);
    data.read("source", source);
    if (source == "synthetic") {
      cfg.source = DataSource::kSynthetic;
    } else if (source == "csv") {
      cfg.source = DataSource::kCsv;
    } else {
      throw ConfigError("data.source must be \"synthetic\" or \"csv\", got \"" + source + "\"");
    }
    Section syn = data.child("synthetic");
    SyntheticSpec& s = cfg.synthetic;
    syn.read("input_dim", s.input_dim);
    syn.read("total_classes", s.total_classes);
    syn.read("kkc_count", s.kkc_count);
    syn.read("uuc_count", s.uuc_count);
    syn.read("samples_per_class", s.samples_per_class);
    syn.read("class_center_scale", s.class_center_scale);
    syn.read("cluster_std", s.cluster_std);
    std::string mode = kuc_mode_name(s.kuc_mode);
    syn.read("kuc_mode", mode);
    s.kuc_mode = parse_kuc_mode(mode);
    syn.read("kuc_blob_count", s.kuc_blob_count);
    syn.read("background_count", s.background_count);
    syn.read("train_fraction", s.train_fraction);
    syn.read("val_fraction", s.val_fraction);
    syn.finish();

    Section csv = data.child("csv");
    csv.read("train_known", cfg.csv.train_known);
    csv.read("background", cfg.csv.background);
    csv.read("val_known", cfg.csv.val_known);
    csv.read("test_known", cfg.csv.test_known);
    csv.read("test_unknown", cfg.csv.test_unknown);
    csv.read("num_classes", cfg.csv.num_classes);
    csv.finish();
    data.finish();
  }

  {
    Section model = top.child("model");
    model.read("hidden", cfg.model.hidden);
    model.read("latent_dim", cfg.model.latent_dim);
    std::string head = cfg.model.head ? head_type_name(*cfg.model.head) : "auto";
    model.read("head", head);
    if (head == "auto") {
      cfg.model.head.reset();
    } else {
      try {
        cfg.model.head = parse_head_type(head);
      } catch (const ConfigError&) {
        throw ConfigError("model.head must be \"auto\", \"distance\" or \"softmax\", got \"" +
                          head + "\"");
      }
    }
    model.read("freeze_anchors", cfg.model.freeze_anchors);
    model.finish();
  }

  {
    Section loss = top.child("loss");
    std::string family = loss_family_name(cfg.loss.family);
    loss.read("family", family);
    try {
      cfg.loss.family = parse_loss_family(family);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("loss.family: ") + e.what());
    }
    loss.read("lambda", cfg.loss.lambda);
    loss.read("triplet_margin", cfg.loss.triplet_margin);
    loss.read("objectosphere_xi", cfg.loss.objectosphere_xi);
    loss.read("energy_m_in", cfg.loss.energy_m_in);
    loss.read("energy_m_out", cfg.loss.energy_m_out);
    loss.finish();
  }

  {
    Section optim = top.child("optim");
    optim.read("epochs", cfg.optim.epochs);
    optim.read("batch_size_known", cfg.optim.batch_size_known);
    optim.read("batch_size_background", cfg.optim.batch_size_background);
    optim.read("lr_init", cfg.optim.lr_init);
    optim.read("warmup_epochs", cfg.optim.warmup_epochs);
    optim.read("momentum", cfg.optim.momentum);
    optim.read("checkpoint_every", cfg.optim.checkpoint_every);
    optim.finish();
  }

  {
    Section eval = top.child("eval");
    eval.read("fpr_target", cfg.eval.fpr_target);
    eval.read("tpr_target", cfg.eval.tpr_target);
    Section f1 = eval.child("f1_threshold");
    std::string policy = f1_policy_name(cfg.eval.f1_policy);
    f1.read("policy", policy);
    if (policy == "val_accept") {
      cfg.eval.f1_policy = F1Policy::kValAccept;
    } else if (policy == "fixed") {
      cfg.eval.f1_policy = F1Policy::kFixed;
    } else {
      throw ConfigError("eval.f1_threshold.policy must be \"val_accept\" or \"fixed\", got \"" +
                        policy + "\"");
    }
    f1.read("accept_fraction", cfg.eval.f1_accept_fraction);
    f1.read("value", cfg.eval.f1_value);
    f1.finish();
    eval.finish();
  }
  top.finish();
  return cfg;
}

}  // namespace

const char* data_source_name(DataSource source) {
  return source == DataSource::kCsv ? "csv" : "synthetic";
}

const char* f1_policy_name(F1Policy policy) {
  return policy == F1Policy::kFixed ? "fixed" : "val_accept";
}

HeadType ExperimentConfig::head() const { return model.head.value_or(required_head(loss.family)); }

ModelSpec ExperimentConfig::model_spec(std::size_t input_dim, std::size_t num_classes) const {
  ModelSpec spec;
  spec.layer_sizes.push_back(input_dim);
  spec.layer_sizes.insert(spec.layer_sizes.end(), model.hidden.begin(), model.hidden.end());
  spec.layer_sizes.push_back(model.latent_dim);
  spec.num_classes = num_classes;
  spec.head = head();
  spec.freeze_anchors = model.freeze_anchors;
  return spec;
}

SyntheticSpec ExperimentConfig::synthetic_spec() const {
  SyntheticSpec s = synthetic;
  s.seed = seed;
  return s;
}

OptimConfig ExperimentConfig::optim_config() const {
  OptimConfig o = optim;
  o.seed = seed;
  return o;
}

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (source == DataSource::kSynthetic) {
    synthetic.validate();
  } else {
    const std::pair<const char*, const std::string*> required[] = {
        {"train_known", &csv.train_known},
        {"test_known", &csv.test_known},
        {"test_unknown", &csv.test_unknown}};
    for (const auto& [name, value] : required) {
      if (value->empty()) throw ConfigError(std::string("data.csv.") + name + " must be set");
    }
    if (loss.family != LossFamily::kNone && csv.background.empty()) {
      throw ConfigError("data.csv.background must be set for loss family " +
                        std::string(loss_family_name(loss.family)));
    }
    if (csv.num_classes < 1) throw ConfigError("data.csv.num_classes must be >= 1");
  }

  if (model.latent_dim < 1) throw ConfigError("model.latent_dim must be >= 1");
  for (std::size_t h : model.hidden) {
    if (h < 1) throw ConfigError("model.hidden entries must be >= 1");
  }
  if (!family_supports_head(loss.family, head())) {
    throw ConfigError("loss.family " + std::string(loss_family_name(loss.family)) +
                      " cannot train a " + head_type_name(head()) + " head (model.head)");
  }
  if (model.freeze_anchors && head() != HeadType::kDistance) {
    throw ConfigError("model.freeze_anchors requires a distance head");
  }
  loss.validate();
  optim.validate();

  if (!(eval.fpr_target >= 0.0 && eval.fpr_target <= 1.0)) {
    throw ConfigError("eval.fpr_target must lie in [0, 1]");
  }
  if (!(eval.tpr_target >= 0.0 && eval.tpr_target <= 1.0)) {
    throw ConfigError("eval.tpr_target must lie in [0, 1]");
  }
  if (!(eval.f1_accept_fraction > 0.0 && eval.f1_accept_fraction <= 1.0)) {
    throw ConfigError("eval.f1_threshold.accept_fraction must lie in (0, 1]");
  }
  if (!std::isfinite(eval.f1_value)) throw ConfigError("eval.f1_threshold.value must be finite");
  if (eval.f1_policy == F1Policy::kFixed && head() == HeadType::kSoftmax &&
      !(eval.f1_value > 0.0 && eval.f1_value <= 1.0)) {
    throw ConfigError("eval.f1_threshold.value must lie in (0, 1] for a softmax head");
  }
  if (eval.f1_policy == F1Policy::kValAccept) {
    const bool has_val = source == DataSource::kSynthetic
                             ? static_cast<long long>(std::llround(
                                   static_cast<double>(synthetic.samples_per_class) *
                                   synthetic.val_fraction)) > 0
                             : !csv.val_known.empty();
    if (!has_val) {
      throw ConfigError(
          "eval.f1_threshold.policy val_accept needs a validation split "
          "(data.synthetic.val_fraction or data.csv.val_known)");
    }
  }
}

ExperimentConfig parse_config(std::string_view json_text, const std::vector<std::string>& overrides) {
  json root = json::parse(json_text.begin(), json_text.end(), nullptr, false);
  if (root.is_discarded()) throw ConfigError("config is not valid JSON");
  if (!root.is_object()) throw ConfigError("config must be a JSON object");
  for (const std::string& o : overrides) apply_override(root, o);
  ExperimentConfig cfg = from_json(root);
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  const SyntheticSpec& s = cfg.synthetic;
  j["data"]["source"] = data_source_name(cfg.source);
  j["data"]["synthetic"] = {{"input_dim", s.input_dim},
                            {"total_classes", s.total_classes},
                            {"kkc_count", s.kkc_count},
                            {"uuc_count", s.uuc_count},
                            {"samples_per_class", s.samples_per_class},
                            {"class_center_scale", s.class_center_scale},
                            {"cluster_std", s.cluster_std},
                            {"kuc_mode", kuc_mode_name(s.kuc_mode)},
                            {"kuc_blob_count", s.kuc_blob_count},
                            {"background_count", s.background_count},
                            {"train_fraction", s.train_fraction},
                            {"val_fraction", s.val_fraction}};
  j["data"]["csv"] = {{"train_known", cfg.csv.train_known},
                      {"background", cfg.csv.background},
                      {"val_known", cfg.csv.val_known},
                      {"test_known", cfg.csv.test_known},
                      {"test_unknown", cfg.csv.test_unknown},
                      {"num_classes", cfg.csv.num_classes}};
  j["model"] = {{"hidden", cfg.model.hidden},
                {"latent_dim", cfg.model.latent_dim},
                {"head", cfg.model.head ? head_type_name(*cfg.model.head) : "auto"},
                {"freeze_anchors", cfg.model.freeze_anchors}};
  j["loss"] = {{"family", loss_family_name(cfg.loss.family)},
               {"lambda", cfg.loss.lambda},
               {"triplet_margin", cfg.loss.triplet_margin},
               {"objectosphere_xi", cfg.loss.objectosphere_xi
                                        ? ordered_json(*cfg.loss.objectosphere_xi)
                                        : ordered_json(nullptr)},
               {"energy_m_in", cfg.loss.energy_m_in},
               {"energy_m_out", cfg.loss.energy_m_out}};
  j["optim"] = {{"epochs", cfg.optim.epochs},
                {"batch_size_known", cfg.optim.batch_size_known},
                {"batch_size_background", cfg.optim.batch_size_background},
                {"lr_init", cfg.optim.lr_init},
                {"warmup_epochs", cfg.optim.warmup_epochs},
                {"momentum", cfg.optim.momentum},
                {"checkpoint_every", cfg.optim.checkpoint_every}};
  j["eval"] = {{"fpr_target", cfg.eval.fpr_target},
               {"tpr_target", cfg.eval.tpr_target},
               {"f1_threshold",
                {{"policy", f1_policy_name(cfg.eval.f1_policy)},
                 {"accept_fraction", cfg.eval.f1_accept_fraction},
                 {"value", cfg.eval.f1_value}}}};
  return j.dump(2) + "\n";
}

}  // namespace openset
