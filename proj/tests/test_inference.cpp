#include <doctest.h>

#include <cmath>
#include <vector>

#include "hetmed/dataset.hpp"
#include "hetmed/dist.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/inference.hpp"
#include "hetmed/rng.hpp"

using namespace hetmed;

TEST_CASE("aggregate_gamma") {
  SUBCASE("constant gammas aggregate to the constant") {
    const GammaAggregate a = aggregate_gamma(
        std::vector<double>{1, 1, 1}, std::vector<double>{0.2, 0.5, 0.3},
        std::vector<double>{0.1, 0.2, 0.3});
    CHECK(a.gamma0_hat == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("hand arithmetic oracle") {
    const GammaAggregate a =
        aggregate_gamma(std::vector<double>{0, 2}, std::vector<double>{0.5, 0.5},
                        std::vector<double>{1, 1});
    CHECK(a.gamma0_hat == doctest::Approx(1.0));
    CHECK(a.var_gamma0 == doctest::Approx(0.5));
  }
  SUBCASE("no noise, no variance") {
    const GammaAggregate a =
        aggregate_gamma(std::vector<double>{1, 2, 3},
                        std::vector<double>{0.3, 0.3, 0.4},
                        std::vector<double>{0, 0, 0});
    CHECK(a.var_gamma0 == 0.0);
  }
}

namespace {

SlopeFit fit_with(double beta, double se) {
  SlopeFit f;
  f.beta_hat = beta;
  f.se_beta = se;
  return f;
}

GammaAggregate agg_with(double gamma0, double var) {
  GammaAggregate a;
  a.gamma0_hat = gamma0;
  a.var_gamma0 = var;
  a.K = 3;
  return a;
}

}  // namespace

TEST_CASE("iu_test applies the max rule") {
  // Build z-statistics whose two-sided p-values are 0.03 and 0.04.
  const double z_beta = normal_quantile(1.0 - 0.015);
  const double z_gamma = normal_quantile(1.0 - 0.02);
  const IuTest t =
      iu_test(fit_with(z_beta, 1.0), agg_with(z_gamma, 1.0), 0.05);
  CHECK(t.p_beta == doctest::Approx(0.03).epsilon(1e-9));
  CHECK(t.p_gamma == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(t.p_overall == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(t.reject);

  const double z_gamma2 = normal_quantile(1.0 - 0.10);
  const IuTest t2 =
      iu_test(fit_with(z_beta, 1.0), agg_with(z_gamma2, 1.0), 0.05);
  CHECK(t2.p_gamma == doctest::Approx(0.20).epsilon(1e-9));
  CHECK(t2.p_overall == doctest::Approx(0.20).epsilon(1e-9));
  CHECK_FALSE(t2.reject);
}

TEST_CASE("iu_test with a null beta never rejects") {
  const IuTest t = iu_test(fit_with(0.0, 1.0), agg_with(5.0, 1.0), 0.05);
  CHECK(t.p_beta == doctest::Approx(1.0));
  CHECK_FALSE(t.reject);
}

TEST_CASE("iu_test honors a bootstrap p-value override") {
  SlopeFit f = fit_with(3.0, 1.0);
  f.diagnostics["p_value"] = 0.77;
  const IuTest t = iu_test(f, agg_with(5.0, 0.01), 0.05);
  CHECK(t.p_beta == doctest::Approx(0.77));
  CHECK_FALSE(t.reject);
}

TEST_CASE("iu_test degenerate SE") {
  CHECK_THROWS_WITH_AS(iu_test(fit_with(1.0, 0.0), agg_with(1.0, 1.0), 0.05),
                       "degenerate test", NumericError);
}

TEST_CASE("conservative_ci endpoint modes diverge as documented") {
  // Component intervals [1,2] for beta and [3,4] for gamma0.
  const double alpha = 0.05;
  const double q = normal_quantile((1.0 + std::sqrt(1.0 - alpha)) / 2.0);
  const SlopeFit beta = fit_with(1.5, 0.5 / q);
  const GammaAggregate gamma = agg_with(3.5, (0.5 / q) * (0.5 / q));

  const auto [plo, phi] =
      conservative_ci(beta, gamma, alpha, CiMode::endpoint_product);
  CHECK(plo == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(phi == doctest::Approx(8.0).epsilon(1e-9));

  const auto [llo, lhi] =
      conservative_ci(beta, gamma, alpha, CiMode::paper_literal);
  CHECK(llo == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(lhi == doctest::Approx(4.0).epsilon(1e-9));
}

TEST_CASE("conservative_ci degenerate point mass") {
  const auto [lo, hi] = conservative_ci(fit_with(0.0, 0.0), agg_with(0.0, 0.0),
                                        0.05, CiMode::endpoint_product);
  CHECK(lo == 0.0);
  CHECK(hi == 0.0);
  const auto [llo, lhi] = conservative_ci(fit_with(0.0, 0.0),
                                          agg_with(0.0, 0.0), 0.05,
                                          CiMode::paper_literal);
  CHECK(llo == 0.0);
  CHECK(lhi == 0.0);
}

TEST_CASE("conservative_ci symmetric case") {
  const double alpha = 0.05;
  const double q = normal_quantile((1.0 + std::sqrt(1.0 - alpha)) / 2.0);
  const auto [lo, hi] =
      conservative_ci(fit_with(0.0, 1.0 / q), agg_with(0.0, 1.0 / (q * q)),
                      alpha, CiMode::endpoint_product);
  CHECK(lo == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(hi == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("conservative_ci rejects alpha outside (0, 0.5]") {
  CHECK_THROWS_AS(conservative_ci(fit_with(1, 1), agg_with(1, 1), 0.7,
                                  CiMode::endpoint_product),
                  InputError);
  CHECK_THROWS_AS(conservative_ci(fit_with(1, 1), agg_with(1, 1), 0.0,
                                  CiMode::endpoint_product),
                  InputError);
}

TEST_CASE("acme products") {
  CHECK(acme(fit_with(2.0, 0.1), agg_with(0.5, 0.1)) == doctest::Approx(1.0));
  CHECK(acme(fit_with(0.0, 0.1), agg_with(5.0, 0.1)) == doctest::Approx(0.0));
}

TEST_CASE("acme for a polynomial fit averages beta(gamma_k) gamma_k") {
  // theta = (1, 1, 0): beta(g) = 1 + g. Groups at gamma 1 and 2 with equal
  // weight (third group weighted 0 to satisfy K >= 3):
  // 0.5*(1+1)*1 + 0.5*(1+2)*2 = 4.
  std::vector<SubgroupEffect> raw(3);
  raw[0] = {"a", 1.0, 0.1, 2.0, 0.1, 0.0, 10, {}};
  raw[1] = {"b", 2.0, 0.1, 6.0, 0.1, 0.0, 10, {}};
  raw[2] = {"c", 9.0, 0.1, 9.0, 0.1, 0.0, 10, {}};
  const EffectDataset ds =
      validate_dataset(std::move(raw), {0.5, 0.5, 0.0});

  SlopeFit fit;
  fit.method = FitMethod::polynomial;
  fit.extra_coefs = {{"theta0", 1.0}, {"theta1", 1.0}, {"theta2", 0.0}};
  CHECK(acme(fit, ds) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("heterogeneity_stats") {
  SUBCASE("no spread means Q = 0 and I2 = 0") {
    const Heterogeneity h = heterogeneity_stats(
        std::vector<double>{2, 2, 2}, std::vector<double>{1, 0.5, 1});
    CHECK(h.Q == doctest::Approx(0.0));
    CHECK(h.I2 == 0.0);
    CHECK(h.p_Q == doctest::Approx(1.0));
  }
  SUBCASE("hand arithmetic oracle") {
    const Heterogeneity h = heterogeneity_stats(std::vector<double>{0, 2},
                                                std::vector<double>{1, 1});
    CHECK(h.Q == doctest::Approx(2.0));
    CHECK(h.df == 1);
    CHECK(h.I2 == doctest::Approx(0.5));
    CHECK(h.p_Q == doctest::Approx(0.15729920705028105).epsilon(1e-8));
  }
  SUBCASE("guards") {
    CHECK_THROWS_WITH_AS(heterogeneity_stats(std::vector<double>{1.0},
                                             std::vector<double>{1.0}),
                         "insufficient subgroups", InputError);
    CHECK_THROWS_WITH_AS(heterogeneity_stats(std::vector<double>{1, 2},
                                             std::vector<double>{1, 0}),
                         "infinite weight", NumericError);
  }
}

TEST_CASE("I2 is invariant to rescaling gammas and SEs together") {
  Rng rng(88);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t K = 3 + rng.below(10);
    std::vector<double> g(K), se(K);
    for (std::size_t k = 0; k < K; ++k) {
      g[k] = rng.normal() * 2.0;
      se[k] = 0.2 + rng.gamma(1.0, 1.0);
    }
    const double c = 0.1 + rng.gamma(2.0, 1.0);
    std::vector<double> gs(K), ses(K);
    for (std::size_t k = 0; k < K; ++k) {
      gs[k] = c * g[k];
      ses[k] = c * se[k];
    }
    const Heterogeneity h1 = heterogeneity_stats(g, se);
    const Heterogeneity h2 = heterogeneity_stats(gs, ses);
    CHECK(h1.I2 == doctest::Approx(h2.I2).epsilon(1e-10));
    CHECK(h1.Q == doctest::Approx(h2.Q).epsilon(1e-10));
  }
}

TEST_CASE("p_overall dominates the component p-values; rejection is monotone "
          "in alpha") {
  Rng rng(555);
  for (int trial = 0; trial < 200; ++trial) {
    const SlopeFit f = fit_with(rng.normal(), 0.1 + rng.gamma(1.0, 2.0));
    const GammaAggregate a =
        agg_with(rng.normal() * 2.0, 0.01 + rng.gamma(1.0, 2.0));
    const IuTest t1 = iu_test(f, a, 0.05);
    CHECK(t1.p_overall >= t1.p_beta);
    CHECK(t1.p_overall >= t1.p_gamma);
    const IuTest t2 = iu_test(f, a, 0.20);
    if (t1.reject) CHECK(t2.reject);  // monotone in alpha
  }
}

TEST_CASE("endpoint_product interval always contains beta*gamma0") {
  Rng rng(321);
  for (int trial = 0; trial < 1000; ++trial) {
    const SlopeFit f = fit_with(3.0 * rng.normal(), rng.gamma(1.0, 1.0));
    const GammaAggregate a =
        agg_with(3.0 * rng.normal(), rng.gamma(1.0, 1.0));
    const double alpha = 0.01 + 0.49 * rng.uniform();
    const auto [lo, hi] =
        conservative_ci(f, a, alpha, CiMode::endpoint_product);
    const double point = f.beta_hat * a.gamma0_hat;
    CHECK(lo <= point + 1e-12);
    CHECK(point <= hi + 1e-12);
  }
}

TEST_CASE("mediate assembles a coherent result") {
  std::vector<SubgroupEffect> raw(4);
  raw[0] = {"a", 1.0, 0.2, 2.1, 0.2, 0.0, 50, {}};
  raw[1] = {"b", 2.0, 0.2, 4.2, 0.2, 0.0, 50, {}};
  raw[2] = {"c", 3.0, 0.2, 5.9, 0.2, 0.0, 50, {}};
  raw[3] = {"d", 4.0, 0.2, 8.1, 0.2, 0.0, 50, {}};
  const EffectDataset ds = validate_dataset(std::move(raw));
  const SlopeFit fit = ols_slope(ds.gammas(), ds.taus());
  const MediationResult r = mediate(ds, fit, 0.05, CiMode::endpoint_product);
  CHECK(r.acme_hat ==
        doctest::Approx(fit.beta_hat * r.gamma_agg.gamma0_hat).epsilon(1e-12));
  CHECK(r.p_overall == doctest::Approx(std::max(r.p_beta, r.p_gamma)));
  CHECK(r.ci_lower <= r.acme_hat);
  CHECK(r.acme_hat <= r.ci_upper);
  CHECK(r.heterogeneity.df == 3);
  CHECK(r.alpha == 0.05);
}

TEST_CASE("subgroup_acme_ci combines the component intervals per group") {
  const double alpha = 0.05;
  const double q = normal_quantile((1.0 + std::sqrt(1.0 - alpha)) / 2.0);
  SlopeFit f;
  f.beta_hat = 1.5;
  f.se_beta = 0.5 / q;  // beta interval [1, 2]
  SubgroupEffect e;
  e.gamma_hat = 3.5;
  e.se_gamma = 0.5 / q;  // gamma interval [3, 4]
  const auto [lo, hi] =
      subgroup_acme_ci(f, e, alpha, CiMode::endpoint_product);
  CHECK(lo == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(hi == doctest::Approx(8.0).epsilon(1e-9));
}
