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

#include "openset/data.hpp"
#include "openset/losses.hpp"
#include "openset/model.hpp"
#include "openset/trainer.hpp"

namespace ad = openset::ad;

namespace {

// Forward and backward pass of one batch, the inner step of training.
void BM_LossForwardBackward(benchmark::State& state) {
  const auto family = static_cast<openset::LossFamily>(state.range(0));
  const auto head = openset::required_head(family);
  openset::SyntheticSpec spec;
  const auto bundle = openset::generate(spec);
  const auto model = openset::Model::initialize(
      {{bundle.train_known.dim(), 64, 64, 6}, bundle.num_classes(), head, false}, 1);
  std::vector<std::size_t> idx(64);
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const ad::Tensor xk = bundle.train_known.gather(idx);
  const auto labels = bundle.train_known.gather_labels(idx);
  const ad::Tensor xb = bundle.background.gather(idx);
  openset::LossConfig lc;
  lc.family = family;
  for (auto _ : state) {
    ad::Tape tape;
    const auto bound = openset::bind(tape, model);
    const auto parts =
        openset::compute_loss(bound, tape.constant(xk), labels, tape.constant(xb), lc);
    tape.backward(parts.total);
    benchmark::DoNotOptimize(tape.grad(bound.params.front()));
  }
  state.SetLabel(openset::loss_family_name(family));
}
BENCHMARK(BM_LossForwardBackward)
    ->Arg(static_cast<int>(openset::LossFamily::kClassInclusion))
    ->Arg(static_cast<int>(openset::LossFamily::kHsc))
    ->Arg(static_cast<int>(openset::LossFamily::kObjectosphere))
    ->Arg(static_cast<int>(openset::LossFamily::kNone));

void BM_TrainTwoEpochs(benchmark::State& state) {
  openset::SyntheticSpec spec;
  const auto bundle = openset::generate(spec);
  const auto model = openset::Model::initialize(
      {{bundle.train_known.dim(), 64, 64, 6}, bundle.num_classes(),
       openset::HeadType::kDistance, false},
      1);
  openset::LossConfig lc;
  openset::OptimConfig oc;
  oc.epochs = 2;
  oc.warmup_epochs = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(openset::train(bundle, model, lc, oc));
  }
}
BENCHMARK(BM_TrainTwoEpochs)->Unit(benchmark::kMillisecond);

}  // namespace
