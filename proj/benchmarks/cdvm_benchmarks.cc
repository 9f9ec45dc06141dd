// Copyright 2026 The CDVM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <vector>

#include "cdvm/attribution.h"
#include "cdvm/cdvm.h"
#include "cdvm/dataset.h"
#include "cdvm/games.h"
#include "cdvm/rng.h"
#include "cdvm/semivalues.h"

namespace cdvm {
namespace {

ClusteredGame ClustersOfTwo(std::size_t n) {
  std::vector<std::size_t> sizes(n / 2, 2);
  if (n % 2) sizes.push_back(1);
  return ClusteredGame(sizes, std::vector<double>(sizes.size(), 1.0));
}

AttributionMatrix RandomT(std::size_t n, std::size_t m, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<double> dense(n * m, 0.0);
  for (double& v : dense) {
    if (rng.Uniform() < 0.3) v = rng.Uniform() * 2.0 - 1.0;
  }
  return AttributionMatrix::FromDense(n, m, dense);
}

void BM_ExactShapley(benchmark::State& state) {
  const auto game = ClustersOfTwo(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ExactShapley(game, 1));
}
BENCHMARK(BM_ExactShapley)->DenseRange(8, 16, 4);

void BM_ExactBanzhaf(benchmark::State& state) {
  const auto game = ClustersOfTwo(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(ExactBanzhaf(game, 1));
}
BENCHMARK(BM_ExactBanzhaf)->DenseRange(8, 16, 4);

void BM_MsrFig1(benchmark::State& state) {
  const auto data = GenerateClustered(Fig1Spec(), 1);
  MsrConfig cfg;
  cfg.p = 0.2;
  cfg.num_models = static_cast<std::size_t>(state.range(0));
  cfg.threads = 1;
  for (auto _ : state) benchmark::DoNotOptimize(MsrEstimate(data, cfg));
}
BENCHMARK(BM_MsrFig1)->Arg(1000)->Arg(5000);

void BM_SolveLp(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto t = RandomT(n, n / 2, 7);
  const auto problem = BuildProblem(t, n / 4, 0.5, DefaultKappa(t, n / 4));
  for (auto _ : state) benchmark::DoNotOptimize(SolveLp(problem));
}
BENCHMARK(BM_SolveLp)->RangeMultiplier(2)->Range(16, 256);

void BM_GridSearchWarmStart(benchmark::State& state) {
  const auto t = RandomT(128, 64, 11);
  const std::size_t budget = 32;
  const auto alphas = DefaultAlphaGrid();
  const auto kappas = DefaultKappaGrid(t, budget);
  const SubsetScorer scorer = [](std::span<const std::size_t> s) {
    return static_cast<double>(s.front());
  };
  for (auto _ : state) benchmark::DoNotOptimize(GridSearch(t, budget, alphas, kappas, scorer));
}
BENCHMARK(BM_GridSearchWarmStart);

}  // namespace
}  // namespace cdvm

BENCHMARK_MAIN();
