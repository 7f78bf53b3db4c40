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

// Quadratic-time reference implementations of the sweep metrics. Each one
// enumerates every distinct threshold and recounts the whole sample list,
// sharing nothing with the production sweep.

#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "openset/metrics.hpp"

namespace openset::testing::brute {

struct Counts {
  std::size_t known = 0, unknown = 0, known_correct = 0;
};

inline Counts accepted_at(const std::vector<ScoredSample>& s, double t) {
  Counts c;
  for (const auto& x : s) {
    if (x.score < t) continue;
    if (x.is_known) {
      ++c.known;
      if (x.predicted == x.true_label) ++c.known_correct;
    } else {
      ++c.unknown;
    }
  }
  return c;
}

inline Counts totals(const std::vector<ScoredSample>& s) {
  return accepted_at(s, -std::numeric_limits<double>::infinity());
}

inline std::vector<double> thresholds_descending(const std::vector<ScoredSample>& s) {
  std::vector<double> t;
  for (const auto& x : s) t.push_back(x.score);
  std::sort(t.begin(), t.end(), std::greater<>());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  return t;
}

inline double auroc(const std::vector<ScoredSample>& s) {
  unsigned long long twice = 0, pairs = 0;
  for (const auto& k : s) {
    if (!k.is_known) continue;
    for (const auto& u : s) {
      if (u.is_known) continue;
      ++pairs;
      if (k.score > u.score) twice += 2;
      if (k.score == u.score) twice += 1;
    }
  }
  return static_cast<double>(twice) / (2.0 * static_cast<double>(pairs));
}

inline double aupr(const std::vector<ScoredSample>& s) {
  const Counts all = totals(s);
  double area = 0.0, prev = 0.0;
  for (double t : thresholds_descending(s)) {
    const Counts c = accepted_at(s, t);
    const double recall = static_cast<double>(c.known) / static_cast<double>(all.known);
    const double precision = static_cast<double>(c.known) / static_cast<double>(c.known + c.unknown);
    area += (recall - prev) * precision;
    prev = recall;
  }
  return area;
}

inline double fpr_at_tpr(const std::vector<ScoredSample>& s, double target) {
  const Counts all = totals(s);
  double best = 1.0;
  for (double t : thresholds_descending(s)) {
    const Counts c = accepted_at(s, t);
    if (static_cast<double>(c.known) / static_cast<double>(all.known) >= target) {
      best = std::min(best, static_cast<double>(c.unknown) / static_cast<double>(all.unknown));
    }
  }
  return best;
}

inline double oscr(const std::vector<ScoredSample>& s, double fpr_target) {
  const Counts all = totals(s);
  std::vector<std::pair<double, double>> pts = {{0.0, 0.0}};  // (fpr, ccr)
  for (double t : thresholds_descending(s)) {
    const Counts c = accepted_at(s, t);
    pts.emplace_back(static_cast<double>(c.unknown) / static_cast<double>(all.unknown),
                     static_cast<double>(c.known_correct) / static_cast<double>(all.known));
  }
  std::size_t last = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i].first <= fpr_target) last = i;
  }
  if (pts[last].first == fpr_target || last + 1 == pts.size()) return pts[last].second;
  const auto& lo = pts[last];
  const auto& hi = pts[last + 1];
  const double w = (fpr_target - lo.first) / (hi.first - lo.first);
  return lo.second + w * (hi.second - lo.second);
}

inline double macro_f1(const std::vector<ScoredSample>& s, double tau, std::size_t classes) {
  // Full (C+1) x (C+1) confusion matrix.
  const std::size_t k = classes + 1;
  std::vector<std::vector<std::size_t>> m(k, std::vector<std::size_t>(k, 0));
  for (const auto& x : s) {
    const std::size_t truth = x.is_known ? x.true_label : classes;
    const std::size_t pred = x.score >= tau ? x.predicted : classes;
    ++m[truth][pred];
  }
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < k; ++j) {
      row += m[c][j];
      col += m[j][c];
    }
    if (row == 0 && col == 0) continue;
    ++used;
    const double tp = static_cast<double>(m[c][c]);
    const double precision = col ? tp / static_cast<double>(col) : 0.0;
    const double recall = row ? tp / static_cast<double>(row) : 0.0;
    sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / static_cast<double>(used);
}

}  // namespace openset::testing::brute
