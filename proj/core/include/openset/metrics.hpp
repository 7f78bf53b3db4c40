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

// Open-set evaluation measures.
//
// Every threshold sweep uses the distinct observed scores as thresholds and
// accepts a sample when score >= threshold, so equal scores always move
// together. Known samples are the positive class throughout.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace openset {

struct ScoredSample {
  double score = 0.0;          // higher means "more known"
  std::size_t predicted = 0;   // closed-set prediction, 0-based
  std::size_t true_label = 0;  // 0-based; ignored for unknown samples
  bool is_known = true;
};

struct MetricReport {
  double accuracy = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
  double oscr_ccr_at_fpr = 0.0;
  double macro_f1 = 0.0;
  double threshold_used_for_f1 = 0.0;

  bool operator==(const MetricReport&) const = default;
};

struct MetricOptions {
  double fpr_target = 0.1;
  double tpr_target = 0.95;
};

// Fraction of known samples with predicted == true_label.
double accuracy(std::span<const ScoredSample> samples);

// P(score_known > score_unknown) + 0.5 P(tie).
double auroc(std::span<const ScoredSample> samples);

// Average precision: sum over thresholds of (R_i - R_{i-1}) * P_i.
double aupr(std::span<const ScoredSample> samples);

// Smallest FPR over thresholds whose TPR reaches tpr_target.
double fpr_at_tpr(std::span<const ScoredSample> samples, double tpr_target = 0.95);

struct OscrPoint {
  double threshold;  // +inf for the empty-acceptance start point
  double fpr;
  double ccr;
};

// (0, 0) at threshold +inf followed by one point per distinct score,
// descending.
std::vector<OscrPoint> oscr_curve(std::span<const ScoredSample> samples);

// CCR at fpr_target, interpolated linearly in FPR between the last curve
// point with FPR <= target and the next one.
double oscr_ccr_at_fpr(std::span<const ScoredSample> samples, double fpr_target = 0.1);

// Macro F1 over classes 0..num_classes, class num_classes being "unknown".
// A sample is predicted unknown when score < tau. Classes that occur
// neither in the truth nor in the predictions are left out of the mean.
double macro_f1(std::span<const ScoredSample> samples, double tau, std::size_t num_classes);

// Threshold accepting at least accept_fraction of the given scores: the
// ceil(accept_fraction * N)-th largest score.
double acceptance_threshold(std::span<const double> scores, double accept_fraction);

MetricReport compute_report(std::span<const ScoredSample> samples, std::size_t num_classes,
                            double f1_tau, const MetricOptions& options = {});

// Flat JSON object with snake_case keys.
std::string report_to_json(const MetricReport& report);
// Header "score,predicted,label,is_known"; labels 1-based, unknown = C+1.
std::string scores_to_csv(std::span<const ScoredSample> samples, std::size_t num_classes);
std::string oscr_curve_to_csv(std::span<const OscrPoint> curve);

}  // namespace openset
