#include <benchmark/benchmark.h>

#include <vector>

#include "hetmed/dataset.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/rng.hpp"

using namespace hetmed;

namespace {

EffectDataset synthetic(int K, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SubgroupEffect> raw(K);
  for (int k = 0; k < K; ++k) {
    const double gamma = 2.0 + rng.normal();
    raw[k].group_id = "k" + std::to_string(k);
    // Mild measurement noise keeps the BCES denominator well-posed at
    // every benchmarked K.
    raw[k].se_gamma = 0.4 * rng.gamma(1.0, 1.0);
    raw[k].se_tau = 0.4 * rng.gamma(1.0, 1.0);
    raw[k].gamma_hat = gamma + raw[k].se_gamma * rng.normal();
    raw[k].tau_hat = 4.0 + 2.0 * gamma + rng.normal() +
                     raw[k].se_tau * rng.normal();
    raw[k].n = 100;
  }
  return validate_dataset(std::move(raw));
}

void BM_OlsSlope(benchmark::State& state) {
  const EffectDataset ds = synthetic(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ols_slope(ds.gammas(), ds.taus()));
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_OlsSlope)->RangeMultiplier(4)->Range(8, 8192)->Complexity();

void BM_BcesEstimate(benchmark::State& state) {
  const EffectDataset ds = synthetic(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bces_estimate(ds));
  }
}
BENCHMARK(BM_BcesEstimate)->Arg(30)->Arg(100)->Arg(1000);

void BM_SimexNoOuter(benchmark::State& state) {
  const EffectDataset ds = synthetic(static_cast<int>(state.range(0)), 3);
  SimexConfig cfg;
  cfg.seed = 5;
  cfg.outer_reps = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simex_estimate(ds, cfg));
  }
}
BENCHMARK(BM_SimexNoOuter)->Arg(10)->Arg(30)->Arg(100);

void BM_SimexWithSe(benchmark::State& state) {
  const EffectDataset ds = synthetic(static_cast<int>(state.range(0)), 4);
  SimexConfig cfg;
  cfg.seed = 5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(simex_estimate(ds, cfg));
  }
}
BENCHMARK(BM_SimexWithSe)->Arg(10)->Arg(30);

void BM_BcesWildBootstrap(benchmark::State& state) {
  const EffectDataset ds = synthetic(static_cast<int>(state.range(0)), 6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        bces_bootstrap(ds, BootstrapMode::wild_restricted, 499, 9));
  }
}
BENCHMARK(BM_BcesWildBootstrap)->Arg(30)->Arg(100);

}  // namespace
