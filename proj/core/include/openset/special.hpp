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

// Scalar special functions behind the chi-square probability of inclusion.
//
// All functions are pure and thread-safe. Domain violations throw
// openset::DomainError; an iteration that exceeds kMaxIterations throws
// openset::NumericError carrying the iteration count.

#pragma once

#include <cstddef>

namespace openset::special {

inline constexpr std::size_t kMaxIterations = 500;
inline constexpr double kTermTolerance = 1e-15;

// Lower clamp applied to probabilities before they reach a logarithm.
inline constexpr double kMinProbability = 1e-300;

// ln Gamma(a) for a > 0.
double log_gamma(double a);

// Regularized lower incomplete gamma P(a, x) = gamma(a, x) / Gamma(a).
double reg_lower_inc_gamma(double a, double x);

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).
// Uses the power series for x < a + 1 and a continued fraction otherwise.
double reg_upper_inc_gamma(double a, double x);

// Chi-square upper tail with n degrees of freedom evaluated at d_sq, i.e.
// the probability that a standard normal vector in R^n lies farther from
// the origin than sqrt(d_sq). Equals Q(n/2, d_sq/2).
double prob_inclusion(double d_sq, int n);

// d/d(d_sq) of prob_inclusion: the negated chi-square density.
// At d_sq == 0 the result is -1/2 for n == 2 and 0 for n >= 3; n == 1 is
// singular there and throws DomainError.
double prob_inclusion_grad(double d_sq, int n);

// h(x) = sqrt(x + 1) - 1, the distance rescaling used by the hypersphere
// classifier loss.
double h_scale(double x);

// Clamp into [kMinProbability, 1]. NaN passes through unchanged.
double clamp_probability(double p);

namespace detail {

// Both branches of reg_upper_inc_gamma, exposed so the switch point can be
// checked for consistency. Each is valid for any a > 0, x > 0 but converges
// quickly only on its own side of x = a + 1.
double upper_gamma_by_series(double a, double x);
double upper_gamma_by_continued_fraction(double a, double x);

}  // namespace detail

}  // namespace openset::special
