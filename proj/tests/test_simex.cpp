#include <doctest.h>

#include <cmath>
#include <vector>

#include "hetmed/dataset.hpp"
#include "hetmed/dist.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/rng.hpp"

using namespace hetmed;

namespace {

EffectDataset dataset_from(const std::vector<double>& g,
                           const std::vector<double>& t,
                           const std::vector<double>& se_g) {
  std::vector<SubgroupEffect> raw;
  for (std::size_t k = 0; k < g.size(); ++k) {
    SubgroupEffect e;
    e.group_id = "g" + std::to_string(k);
    e.gamma_hat = g[k];
    e.tau_hat = t[k];
    e.se_gamma = se_g[k];
    e.se_tau = 0.1;
    e.n = 10;
    raw.push_back(e);
  }
  return validate_dataset(std::move(raw));
}

}  // namespace

TEST_CASE("simex with zero measurement error is exactly the naive slope") {
  const EffectDataset ds =
      dataset_from({1.2, 2.1, 3.3, 4.0}, {2.5, 4.4, 6.1, 8.3}, {0, 0, 0, 0});
  const SlopeFit naive = ols_slope(ds.gammas(), ds.taus());
  SimexConfig cfg;
  cfg.seed = 5;
  const SimexFit fit = simex_estimate(ds, cfg);
  CHECK(fit.fit.beta_hat == naive.beta_hat);  // bit-level
  CHECK(fit.fit.intercept_hat == naive.intercept_hat);
  CHECK(fit.curve.size() == cfg.zeta_grid.size());
  for (const SimexPoint& p : fit.curve) CHECK(p.slope == naive.beta_hat);
}

TEST_CASE("simex g(0) equals the naive slope bit-for-bit even with noise") {
  const EffectDataset ds = dataset_from({1, 2, 3, 4, 5},
                                        {2.2, 3.9, 6.4, 8.0, 9.7},
                                        {0.4, 0.4, 0.4, 0.4, 0.4});
  const SlopeFit naive = ols_slope(ds.gammas(), ds.taus());
  SimexConfig cfg;
  cfg.seed = 17;
  const SimexFit fit = simex_estimate(ds, cfg);
  CHECK(fit.curve.front().zeta == 0.0);
  CHECK(fit.curve.front().slope == naive.beta_hat);  // bit-level
  CHECK(fit.fit.diagnostics.at("g0") == naive.beta_hat);
}

TEST_CASE("simex is deterministic in the seed") {
  const EffectDataset ds = dataset_from({1, 2, 3, 4, 5, 6},
                                        {2.2, 3.9, 6.4, 8.0, 9.7, 12.1},
                                        {0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
  SimexConfig cfg;
  cfg.seed = 99;
  const SimexFit a = simex_estimate(ds, cfg);
  const SimexFit b = simex_estimate(ds, cfg);
  CHECK(a.fit.beta_hat == b.fit.beta_hat);
  CHECK(a.fit.se_beta == b.fit.se_beta);
  for (std::size_t i = 0; i < a.curve.size(); ++i) {
    CHECK(a.curve[i].slope == b.curve[i].slope);
  }
  cfg.seed = 100;
  const SimexFit c = simex_estimate(ds, cfg);
  CHECK(a.fit.beta_hat != c.fit.beta_hat);
}

TEST_CASE("simex config validation") {
  const EffectDataset ds = dataset_from({1, 2, 3}, {1, 2, 3}, {0.1, 0.1, 0.1});
  SimexConfig cfg;
  cfg.zeta_grid = {0.0, 1.0};
  CHECK_THROWS_WITH_AS(simex_estimate(ds, cfg), "underdetermined extrapolant",
                       InputError);
  cfg.zeta_grid = {0.5, 1.0, 1.5};
  CHECK_THROWS_AS(simex_estimate(ds, cfg), InputError);
  cfg.zeta_grid = {0.0, 1.0, 0.5};
  CHECK_THROWS_AS(simex_estimate(ds, cfg), InputError);
  cfg.zeta_grid = {0.0, 0.5, 1.0};
  cfg.B = 10;
  CHECK_THROWS_AS(simex_estimate(ds, cfg), InputError);
}

TEST_CASE("simex recovers most of the attenuation at lambda = 0.8") {
  // gamma ~ N(2,1), se = 0.5: naive converges to 0.8 * beta; the quadratic
  // extrapolant recovers to within a few percent (Monte Carlo oracle).
  Rng rng(4242);
  const int K = 200;
  const double beta = 2.0;
  std::vector<double> g(K), t(K), se(K, 0.5);
  for (int k = 0; k < K; ++k) {
    const double gamma = 2.0 + rng.normal();
    t[k] = 4.0 + beta * gamma + 0.2 * rng.normal();
    g[k] = gamma + 0.5 * rng.normal();
  }
  const EffectDataset ds = dataset_from(g, t, se);
  const SlopeFit naive = ols_slope(ds.gammas(), ds.taus());
  CHECK(naive.beta_hat == doctest::Approx(1.6).epsilon(0.08));

  SimexConfig cfg;
  cfg.seed = 31;
  cfg.se_method = SimexSeMethod::none;
  const SimexFit fit = simex_estimate(ds, cfg);
  CHECK(fit.fit.beta_hat > 1.9);
  CHECK(fit.fit.beta_hat < 2.1);
  // The curve attenuates monotonically in zeta.
  for (std::size_t i = 1; i < fit.curve.size(); ++i) {
    CHECK(fit.curve[i].slope < fit.curve[i - 1].slope);
  }
}

TEST_CASE("both SE methods produce positive deterministic errors") {
  Rng rng(7);
  const int K = 20;
  std::vector<double> g(K), t(K), se(K, 0.3);
  for (int k = 0; k < K; ++k) {
    const double gamma = 2.0 + rng.normal();
    g[k] = gamma + 0.3 * rng.normal();
    t[k] = 4.0 + gamma + rng.normal();
  }
  const EffectDataset ds = dataset_from(g, t, se);

  SimexConfig cfg;
  cfg.seed = 11;
  const SimexFit extrap = simex_estimate(ds, cfg);
  CHECK(extrap.fit.se_beta > 0.0);
  CHECK(extrap.fit.diagnostics.at("small_sample_factor") ==
        doctest::Approx(student_t_quantile(0.975, 18.0) /
                        normal_quantile(0.975)));

  cfg.se_method = SimexSeMethod::pairs_bootstrap;
  cfg.outer_reps = 50;
  const SimexFit boot = simex_estimate(ds, cfg);
  CHECK(boot.fit.se_beta > 0.0);
  CHECK(boot.fit.diagnostics.at("outer_replicates") +
            boot.fit.diagnostics.at("outer_invalid") ==
        50.0);
  // Same point estimate either way; only the SE path differs.
  CHECK(boot.fit.beta_hat == extrap.fit.beta_hat);
}

TEST_CASE("zero-noise SE reduces to the adjusted classical error") {
  const std::vector<double> g = {1.2, 2.1, 3.3, 4.0};
  const std::vector<double> t = {2.5, 4.6, 6.1, 8.3};
  const EffectDataset ds = dataset_from(g, t, {0, 0, 0, 0});
  SimexConfig cfg;
  cfg.seed = 2;
  const SimexFit fit = simex_estimate(ds, cfg);

  // Classical slope variance of the naive fit times the t/z factor.
  const SlopeFit naive = ols_slope(ds.gammas(), ds.taus());
  double rss = 0.0, sxx = 0.0, gbar = 0.0;
  for (double v : g) gbar += v;
  gbar /= 4.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double e = t[i] - naive.intercept_hat - naive.beta_hat * g[i];
    rss += e * e;
    sxx += (g[i] - gbar) * (g[i] - gbar);
  }
  const double expected = std::sqrt(rss / 2.0 / sxx) *
                          student_t_quantile(0.975, 2.0) /
                          normal_quantile(0.975);
  CHECK(fit.fit.se_beta == doctest::Approx(expected).epsilon(1e-10));
}
