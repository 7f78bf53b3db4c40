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

#include <benchmark/benchmark.h>

#include "openset/special.hpp"

namespace {

void BM_UpperGamma(benchmark::State& state) {
  const double a = static_cast<double>(state.range(0)) / 2.0;
  double x = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(openset::special::reg_upper_inc_gamma(a, x));
    x = x < 2.0 * a + 20.0 ? x + 0.37 : 0.5;
  }
}
BENCHMARK(BM_UpperGamma)->Arg(1)->Arg(8)->Arg(128)->Arg(1024);

void BM_ProbInclusionWithGradient(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  double d_sq = 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(openset::special::prob_inclusion(d_sq, n));
    benchmark::DoNotOptimize(openset::special::prob_inclusion_grad(d_sq, n));
    d_sq = d_sq < 3.0 * n ? d_sq + 0.71 : 0.1;
  }
}
BENCHMARK(BM_ProbInclusionWithGradient)->Arg(2)->Arg(6)->Arg(128);

}  // namespace
