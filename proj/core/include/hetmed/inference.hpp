#pragma once

#include <span>
#include <utility>

#include "hetmed/types.hpp"

namespace hetmed {

/// Weighted aggregate gamma0_hat = sum_k w_k gamma_k and its variance
/// sum_k w_k^2 se_gamma_k^2 under independent subgroup estimates.
GammaAggregate aggregate_gamma(std::span<const double> gammas,
                               std::span<const double> weights,
                               std::span<const double> se_gammas);
GammaAggregate aggregate_gamma(const EffectDataset& dataset);

struct IuTest {
  double p_beta = 1.0;
  double p_gamma = 1.0;
  double p_overall = 1.0;
  bool reject = false;
};

/// Intersection-union test of the null "beta = 0 OR gamma0 = 0".
/// p_beta is the two-sided normal p-value of beta_hat/se_beta, unless the
/// fit carries a bootstrap p-value in diagnostics ("p_value", set by the
/// bootstrap modes), which takes precedence. p_gamma standardizes gamma0 by
/// the square root of its variance. The null is rejected only when both
/// component p-values are <= alpha; p_overall = max(p_beta, p_gamma).
IuTest iu_test(const SlopeFit& beta_fit, const GammaAggregate& gamma_agg,
               double alpha);

/// Conservative confidence interval for beta * gamma0 from the two
/// component intervals at level sqrt(1-alpha) each.
///   endpoint_product (default): min/max over the four products of the
///     component interval endpoints; always contains beta_hat*gamma0_hat.
///   paper_literal: min/max over the four endpoints themselves.
std::pair<double, double> conservative_ci(const SlopeFit& beta_fit,
                                          const GammaAggregate& gamma_agg,
                                          double alpha, CiMode mode);

/// Average causal mediation effect. The plain form is beta_hat * gamma0_hat;
/// the dataset-aware form evaluates polynomial fits as
/// sum_k w_k beta(gamma_k) gamma_k.
double acme(const SlopeFit& beta_fit, const GammaAggregate& gamma_agg);
double acme(const SlopeFit& beta_fit, const EffectDataset& dataset);

/// Cochran's Q against the fixed-effect mean, its chi-square p-value, and
/// Higgins-Thompson I^2 = max(0, (Q - df)/Q). Requires K >= 2 and all
/// se_gammas > 0 ("infinite weight").
Heterogeneity heterogeneity_stats(std::span<const double> gammas,
                                  std::span<const double> se_gammas);
Heterogeneity heterogeneity_stats(const EffectDataset& dataset);

/// Assembles the full mediation answer for one beta fit: aggregate gamma,
/// ACME, intersection-union p-values, conservative CI, heterogeneity.
/// Heterogeneity is reported as Q=0/I2=0 when some se_gamma is zero (the
/// statistic is undefined there and the rest of the result still stands).
MediationResult mediate(const EffectDataset& dataset, const SlopeFit& beta_fit,
                        double alpha = 0.05,
                        CiMode mode = CiMode::endpoint_product);

/// Experimental: conservative interval for one subgroup's mediated effect
/// beta * gamma_k, combining the beta interval with the single-group
/// gamma_k interval under the same endpoint rules as conservative_ci.
std::pair<double, double> subgroup_acme_ci(const SlopeFit& beta_fit,
                                           const SubgroupEffect& subgroup,
                                           double alpha, CiMode mode);

}  // namespace hetmed
