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

#include "openset/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "openset/errors.hpp"

namespace openset {
namespace {

struct Population {
  std::size_t known = 0;
  std::size_t unknown = 0;
};

Population count_population(std::span<const ScoredSample> samples) {
  Population p;
  for (const auto& s : samples) {
    if (std::isnan(s.score)) throw DomainError("score is NaN");
    (s.is_known ? p.known : p.unknown) += 1;
  }
  return p;
}

Population require_mixed(std::span<const ScoredSample> samples, const char* metric) {
  const Population p = count_population(samples);
  if (p.known == 0 || p.unknown == 0) {
    throw ContractError(std::string(metric) + " needs at least one known and one unknown sample");
  }
  return p;
}

// Cumulative counts after accepting every sample with score >= threshold.
struct SweepStep {
  double threshold;
  std::size_t known;
  std::size_t known_correct;
  std::size_t unknown;
};

std::vector<SweepStep> sweep(std::span<const ScoredSample> samples) {
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return samples[a].score > samples[b].score; });
  std::vector<SweepStep> steps;
  SweepStep acc{0.0, 0, 0, 0};
  for (std::size_t i = 0; i < order.size();) {
    const double t = samples[order[i]].score;
    for (; i < order.size() && samples[order[i]].score == t; ++i) {
      const auto& s = samples[order[i]];
      if (s.is_known) {
        ++acc.known;
        if (s.predicted == s.true_label) ++acc.known_correct;
      } else {
        ++acc.unknown;
      }
    }
    acc.threshold = t;
    steps.push_back(acc);
  }
  return steps;
}

void check_fraction(double v, const char* name) {
  if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(name) + " must lie in [0, 1]");
}

std::string number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

double accuracy(std::span<const ScoredSample> samples) {
  std::size_t known = 0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (!s.is_known) continue;
    ++known;
    if (s.predicted == s.true_label) ++correct;
  }
  if (known == 0) throw ContractError("accuracy needs at least one known sample");
  return static_cast<double>(correct) / static_cast<double>(known);
}

double auroc(std::span<const ScoredSample> samples) {
  const Population p = require_mixed(samples, "auroc");
  // Twice the Mann-Whitney statistic, kept integral so ties are exact.
  unsigned long long twice_wins = 0;
  std::size_t unknown_below = 0;
  const auto steps = sweep(samples);
  // Walk ascending: each group's knowns beat every unknown strictly below
  // and tie with the unknowns of the same group.
  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const std::size_t next_known = (it + 1 == steps.rend()) ? 0 : (it + 1)->known;
    const std::size_t next_unknown = (it + 1 == steps.rend()) ? 0 : (it + 1)->unknown;
    const std::size_t group_known = it->known - next_known;
    const std::size_t group_unknown = it->unknown - next_unknown;
    twice_wins += 2ULL * group_known * unknown_below + 1ULL * group_known * group_unknown;
    unknown_below += group_unknown;
  }
  return static_cast<double>(twice_wins) /
         (2.0 * static_cast<double>(p.known) * static_cast<double>(p.unknown));
}

double aupr(std::span<const ScoredSample> samples) {
  const Population p = require_mixed(samples, "aupr");
  double area = 0.0;
  double prev_recall = 0.0;
  for (const auto& step : sweep(samples)) {
    const double recall = static_cast<double>(step.known) / static_cast<double>(p.known);
    const double precision =
        static_cast<double>(step.known) / static_cast<double>(step.known + step.unknown);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double fpr_at_tpr(std::span<const ScoredSample> samples, double tpr_target) {
  check_fraction(tpr_target, "tpr_target");
  const Population p = require_mixed(samples, "fpr_at_tpr");
  double best = 1.0;
  for (const auto& step : sweep(samples)) {
    const double tpr = static_cast<double>(step.known) / static_cast<double>(p.known);
    const double fpr = static_cast<double>(step.unknown) / static_cast<double>(p.unknown);
    if (tpr >= tpr_target) best = std::min(best, fpr);
  }
  return best;
}

std::vector<OscrPoint> oscr_curve(std::span<const ScoredSample> samples) {
  const Population p = require_mixed(samples, "oscr");
  std::vector<OscrPoint> curve{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  for (const auto& step : sweep(samples)) {
    curve.push_back({step.threshold,
                     static_cast<double>(step.unknown) / static_cast<double>(p.unknown),
                     static_cast<double>(step.known_correct) / static_cast<double>(p.known)});
  }
  return curve;
}

double oscr_ccr_at_fpr(std::span<const ScoredSample> samples, double fpr_target) {
  check_fraction(fpr_target, "fpr_target");
  const auto curve = oscr_curve(samples);
  std::size_t last = 0;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    if (curve[i].fpr <= fpr_target) last = i;
  }
  const OscrPoint& lo = curve[last];
  if (lo.fpr == fpr_target || last + 1 == curve.size()) return lo.ccr;
  const OscrPoint& hi = curve[last + 1];
  const double t = (fpr_target - lo.fpr) / (hi.fpr - lo.fpr);
  return lo.ccr + t * (hi.ccr - lo.ccr);
}

double macro_f1(std::span<const ScoredSample> samples, double tau, std::size_t num_classes) {
  if (samples.empty()) throw ContractError("macro_f1 needs at least one sample");
  const std::size_t k = num_classes + 1;
  std::vector<std::size_t> tp(k, 0), fp(k, 0), fn(k, 0);
  for (const auto& s : samples) {
    if (s.predicted >= num_classes || (s.is_known && s.true_label >= num_classes)) {
      throw ContractError("class index out of range in macro_f1");
    }
    const std::size_t truth = s.is_known ? s.true_label : num_classes;
    const std::size_t pred = s.score < tau ? num_classes : s.predicted;
    if (truth == pred) {
      ++tp[truth];
    } else {
      ++fp[pred];
      ++fn[truth];
    }
  }
  double sum = 0.0;
  std::size_t populated = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    ++populated;
    sum += 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
  }
  return sum / static_cast<double>(populated);
}

double acceptance_threshold(std::span<const double> scores, double accept_fraction) {
  if (scores.empty()) throw ContractError("acceptance_threshold needs at least one score");
  if (!(accept_fraction > 0.0 && accept_fraction <= 1.0)) {
    throw DomainError("accept_fraction must lie in (0, 1]");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  auto k = static_cast<std::size_t>(std::ceil(accept_fraction * static_cast<double>(sorted.size())));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

MetricReport compute_report(std::span<const ScoredSample> samples, std::size_t num_classes,
                            double f1_tau, const MetricOptions& options) {
  MetricReport r;
  r.accuracy = accuracy(samples);
  r.auroc = auroc(samples);
  r.aupr = aupr(samples);
  r.fpr95 = fpr_at_tpr(samples, options.tpr_target);
  r.oscr_ccr_at_fpr = oscr_ccr_at_fpr(samples, options.fpr_target);
  r.macro_f1 = macro_f1(samples, f1_tau, num_classes);
  r.threshold_used_for_f1 = f1_tau;
  return r;
}

std::string report_to_json(const MetricReport& report) {
  nlohmann::ordered_json j;
  j["accuracy"] = report.accuracy;
  j["auroc"] = report.auroc;
  j["aupr"] = report.aupr;
  j["fpr95"] = report.fpr95;
  j["oscr_ccr_at_fpr"] = report.oscr_ccr_at_fpr;
  j["macro_f1"] = report.macro_f1;
  j["threshold_used_for_f1"] = report.threshold_used_for_f1;
  return j.dump(2) + "\n";
}

std::string scores_to_csv(std::span<const ScoredSample> samples, std::size_t num_classes) {
  std::string out = "score,predicted,label,is_known\n";
  for (const auto& s : samples) {
    out += number(s.score);
    out += ',' + std::to_string(s.predicted + 1);
    out += ',' + std::to_string((s.is_known ? s.true_label : num_classes) + 1);
    out += s.is_known ? ",1\n" : ",0\n";
  }
  return out;
}

std::string oscr_curve_to_csv(std::span<const OscrPoint> curve) {
  std::string out = "threshold,fpr,ccr\n";
  for (const auto& p : curve) {
    out += (std::isinf(p.threshold) ? std::string("inf") : number(p.threshold)) + ',' +
           number(p.fpr) + ',' + number(p.ccr) + '\n';
  }
  return out;
}

}  // namespace openset
