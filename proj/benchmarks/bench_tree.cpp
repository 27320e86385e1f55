#include <benchmark/benchmark.h>

#include "hetmed/rng.hpp"
#include "hetmed/subgroups.hpp"

using namespace hetmed;

namespace {

IndividualDataset tree_data(int n, int p, std::uint64_t seed) {
  Rng rng(seed);
  IndividualDataset data;
  data.covariates.resize(p);
  for (int j = 0; j < p; ++j) {
    data.covariate_names.push_back("x" + std::to_string(j + 1));
  }
  for (int i = 0; i < n; ++i) {
    const double t = rng.uniform() < 0.5 ? 1.0 : 0.0;
    data.treatment.push_back(t);
    double x1 = 0.0;
    for (int j = 0; j < p; ++j) {
      const double x = rng.uniform();
      if (j == 0) x1 = x;
      data.covariates[j].push_back(x);
    }
    const double gamma = x1 > 0.5 ? 3.0 : 1.0;
    data.mediator.push_back(1.0 + gamma * t + rng.normal());
    data.outcome.push_back(1.0 + t + data.mediator.back() + rng.normal());
  }
  return data;
}

void BM_FitCausalTree(benchmark::State& state) {
  const IndividualDataset data =
      tree_data(static_cast<int>(state.range(0)), 5, 11);
  TreeConfig cfg;
  cfg.seed = 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_causal_tree(data, TreeTarget::mediator, cfg));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitCausalTree)
    ->RangeMultiplier(2)
    ->Range(2048, 16384)
    ->Complexity();

void BM_EstimateGroupEffects(benchmark::State& state) {
  IndividualDataset data = tree_data(static_cast<int>(state.range(0)), 2, 12);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data.group_labels.push_back("g" + std::to_string(i % 10));
  }
  const Partition part = partition_from_labels(data);
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_group_effects(data, part));
  }
}
BENCHMARK(BM_EstimateGroupEffects)->Arg(5000)->Arg(20000);

}  // namespace
