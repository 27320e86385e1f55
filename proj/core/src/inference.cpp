#include "hetmed/inference.hpp"

#include <algorithm>
#include <cmath>

#include "hetmed/dist.hpp"
#include "hetmed/errors.hpp"

namespace hetmed {

GammaAggregate aggregate_gamma(std::span<const double> gammas,
                               std::span<const double> weights,
                               std::span<const double> se_gammas) {
  if (gammas.size() != weights.size() || gammas.size() != se_gammas.size()) {
    throw InputError("length mismatch");
  }
  GammaAggregate agg;
  agg.K = static_cast<int>(gammas.size());
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    agg.gamma0_hat += weights[k] * gammas[k];
    agg.var_gamma0 += weights[k] * weights[k] * se_gammas[k] * se_gammas[k];
  }
  return agg;
}

GammaAggregate aggregate_gamma(const EffectDataset& dataset) {
  return aggregate_gamma(dataset.gammas(), dataset.weights(),
                         dataset.se_gammas());
}

IuTest iu_test(const SlopeFit& beta_fit, const GammaAggregate& gamma_agg,
               double alpha) {
  IuTest t;
  if (beta_fit.has_diagnostic("p_value")) {
    t.p_beta = beta_fit.diagnostics.at("p_value");
  } else {
    t.p_beta = two_sided_p(beta_fit.beta_hat, beta_fit.se_beta);
  }
  t.p_gamma = two_sided_p(gamma_agg.gamma0_hat, std::sqrt(gamma_agg.var_gamma0));
  t.p_overall = std::max(t.p_beta, t.p_gamma);
  t.reject = t.p_beta <= alpha && t.p_gamma <= alpha;
  return t;
}

std::pair<double, double> conservative_ci(const SlopeFit& beta_fit,
                                          const GammaAggregate& gamma_agg,
                                          double alpha, CiMode mode) {
  if (!(alpha > 0.0 && alpha <= 0.5)) {
    throw InputError("alpha must lie in (0, 0.5]");
  }
  const double q = normal_quantile((1.0 + std::sqrt(1.0 - alpha)) / 2.0);
  const double sd_gamma = std::sqrt(gamma_agg.var_gamma0);
  const double a1 = gamma_agg.gamma0_hat - q * sd_gamma;
  const double a2 = gamma_agg.gamma0_hat + q * sd_gamma;
  const double a3 = beta_fit.beta_hat - q * beta_fit.se_beta;
  const double a4 = beta_fit.beta_hat + q * beta_fit.se_beta;

  if (mode == CiMode::paper_literal) {
    const double lo = std::min(std::min(a1, a2), std::min(a3, a4));
    const double hi = std::max(std::max(a1, a2), std::max(a3, a4));
    return {lo, hi};
  }
  const double products[4] = {a1 * a3, a1 * a4, a2 * a3, a2 * a4};
  const auto [lo, hi] = std::minmax_element(products, products + 4);
  return {*lo, *hi};
}

double acme(const SlopeFit& beta_fit, const GammaAggregate& gamma_agg) {
  return beta_fit.beta_hat * gamma_agg.gamma0_hat;
}

double acme(const SlopeFit& beta_fit, const EffectDataset& dataset) {
  if (beta_fit.method == FitMethod::polynomial &&
      beta_fit.extra_coefs.size() == 3) {
    const double t0 = beta_fit.extra_coefs[0].second;
    const double t1 = beta_fit.extra_coefs[1].second;
    const double t2 = beta_fit.extra_coefs[2].second;
    double total = 0.0;
    for (std::size_t k = 0; k < dataset.size(); ++k) {
      const double g = dataset.gammas()[k];
      total += dataset.weights()[k] * (t0 + t1 * g + t2 * g * g) * g;
    }
    return total;
  }
  return beta_fit.beta_hat * aggregate_gamma(dataset).gamma0_hat;
}

Heterogeneity heterogeneity_stats(std::span<const double> gammas,
                                  std::span<const double> se_gammas) {
  if (gammas.size() != se_gammas.size()) throw InputError("length mismatch");
  const std::size_t K = gammas.size();
  if (K < 2) throw InputError("insufficient subgroups");

  double sum_w = 0.0, sum_wg = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    if (se_gammas[k] <= 0.0) throw NumericError("infinite weight");
    const double w = 1.0 / (se_gammas[k] * se_gammas[k]);
    sum_w += w;
    sum_wg += w * gammas[k];
  }
  const double fe_mean = sum_wg / sum_w;

  Heterogeneity h;
  h.df = static_cast<int>(K) - 1;
  for (std::size_t k = 0; k < K; ++k) {
    const double d = gammas[k] - fe_mean;
    h.Q += d * d / (se_gammas[k] * se_gammas[k]);
  }
  h.p_Q = chi2_sf(h.Q, static_cast<double>(h.df));
  h.I2 = h.Q > 0.0 ? std::max(0.0, (h.Q - h.df) / h.Q) : 0.0;
  return h;
}

Heterogeneity heterogeneity_stats(const EffectDataset& dataset) {
  return heterogeneity_stats(dataset.gammas(), dataset.se_gammas());
}

MediationResult mediate(const EffectDataset& dataset, const SlopeFit& beta_fit,
                        double alpha, CiMode mode) {
  MediationResult r;
  r.beta_fit = beta_fit;
  r.gamma_agg = aggregate_gamma(dataset);
  r.acme_hat = acme(beta_fit, dataset);
  const IuTest t = iu_test(beta_fit, r.gamma_agg, alpha);
  r.p_beta = t.p_beta;
  r.p_gamma = t.p_gamma;
  r.p_overall = t.p_overall;
  r.reject = t.reject;
  std::tie(r.ci_lower, r.ci_upper) =
      conservative_ci(beta_fit, r.gamma_agg, alpha, mode);
  r.ci_mode = mode;
  r.alpha = alpha;
  try {
    r.heterogeneity = heterogeneity_stats(dataset);
  } catch (const NumericError&) {
    r.heterogeneity = Heterogeneity{0.0, static_cast<int>(dataset.size()) - 1,
                                    1.0, 0.0};
  }
  return r;
}

std::pair<double, double> subgroup_acme_ci(const SlopeFit& beta_fit,
                                           const SubgroupEffect& subgroup,
                                           double alpha, CiMode mode) {
  GammaAggregate single;
  single.gamma0_hat = subgroup.gamma_hat;
  single.var_gamma0 = subgroup.se_gamma * subgroup.se_gamma;
  single.K = 1;
  return conservative_ci(beta_fit, single, alpha, mode);
}

}  // namespace hetmed
