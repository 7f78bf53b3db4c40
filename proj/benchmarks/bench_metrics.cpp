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

#include <vector>

#include <benchmark/benchmark.h>

#include "openset/metrics.hpp"
#include "openset/rng.hpp"

namespace {

std::vector<openset::ScoredSample> random_samples(std::size_t n) {
  openset::Rng rng(9);
  std::vector<openset::ScoredSample> s(n);
  for (auto& x : s) {
    x.is_known = rng.uniform() < 0.6;
    x.score = rng.normal() + (x.is_known ? 1.0 : 0.0);
    x.true_label = rng.below(6);
    x.predicted = rng.uniform() < 0.8 ? x.true_label : rng.below(6);
  }
  return s;
}

void BM_Auroc(benchmark::State& state) {
  const auto s = random_samples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(openset::auroc(s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Auroc)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

void BM_FullReport(benchmark::State& state) {
  const auto s = random_samples(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(openset::compute_report(s, 6, 0.0, {}));
}
BENCHMARK(BM_FullReport)->Arg(1000)->Arg(100000);

}  // namespace
