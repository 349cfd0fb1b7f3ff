// benchmarks/bench_core.cpp

// Copyright 2026  The sasv-backend Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.
#include <benchmark/benchmark.h>

#include <array>
#include <cstddef>
#include <vector>

#include "sasv/decision.hpp"
#include "sasv/metrics.hpp"
#include "sasv/nn.hpp"
#include "sasv/rng.hpp"

namespace {

using namespace sasv;

std::vector<LabeledScore> random_trials(std::size_t n, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<LabeledScore> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const TrialLabel label = kAllLabels[i % 3];
    const double mean = label == TrialLabel::kTargetBonafide ? 2.0 : -1.0;
    out[i] = {mean + rng.normal(), label};
  }
  return out;
}

void BM_MinAdcf(benchmark::State& state) {
  const auto trials = random_trials(state.range(0), 1);
  const CostModel cm;
  for (auto _ : state) benchmark::DoNotOptimize(min_adcf(trials, cm));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MinAdcf)->RangeMultiplier(10)->Range(1000, 1000000);

void BM_FuseNonlinear(benchmark::State& state) {
  CounterRng rng(2);
  std::vector<double> a(4096), c(4096);
  for (auto& v : a) v = 4.0 * rng.normal();
  for (auto& v : c) v = 4.0 * rng.normal();
  for (auto _ : state) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      acc += fuse_nonlinear(a[i], c[i], 0.05);
    benchmark::DoNotOptimize(acc);
  }
  state.SetItemsProcessed(state.iterations() * a.size());
}
BENCHMARK(BM_FuseNonlinear);

// Default 384/160 head on a batch of embedding pairs.
void BM_MlpForwardBackward(benchmark::State& state) {
  CounterRng rng(3);
  const std::size_t in = 384, batch = state.range(0);
  const std::array<std::size_t, 2> hidden{kDefaultHidden[0], kDefaultHidden[1]};
  const MlpParams p = MlpParams::random(in, hidden, Activation::kLeakyRelu, rng);
  Eigen::MatrixXd x(in, batch);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const Eigen::VectorXd up = Eigen::VectorXd::Ones(batch);
  for (auto _ : state) {
    const MlpBatchOutput fwd = mlp_forward_batch(p, x);
    benchmark::DoNotOptimize(mlp_backward_batch(p, fwd.tape, up));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_MlpForwardBackward)->Arg(32)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
