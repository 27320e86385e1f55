#pragma once

#include <cstdint>
#include <span>

#include "hetmed/ols.hpp"
#include "hetmed/types.hpp"

namespace hetmed {

enum class VarianceMethod { dersimonian_laird, paule_mandel };

/// Attenuation factor lambda = sigma2_gamma / (sigma2_gamma + mean se^2).
/// Equals 1 when all measurement SDs are zero; "zero signal variance" when
/// sigma2_gamma is zero but measurement error is not (the correction would
/// divide by zero).
double attenuation_lambda(double sigma2_gamma,
                          std::span<const double> se_gammas);

/// Inter-study variance of the latent gamma_k (the tau^2 of random-effects
/// meta-analysis). DerSimonian-Laird is the closed-form default;
/// Paule-Mandel solves the moment equation iteratively (tolerance 1e-8,
/// at most 100 iterations). All se_gammas must be positive ("infinite
/// weight" otherwise).
double inter_study_variance(std::span<const double> gammas,
                            std::span<const double> se_gammas,
                            VarianceMethod method);
double inter_study_variance(
    const EffectDataset& dataset,
    VarianceMethod method = VarianceMethod::dersimonian_laird);

/// Naive slope divided by the estimated attenuation factor. The SE scales
/// the naive HC1 error by 1/lambda, treating lambda as fixed; lambda's own
/// sampling error is not propagated. Diagnostics carry lambda_hat,
/// sigma2_gamma and the naive slope.
SlopeFit attenuation_corrected(
    const EffectDataset& dataset,
    VarianceMethod method = VarianceMethod::dersimonian_laird);

/// BCES slope: centered cross-moment minus the summed error covariances
/// over centered x-moment minus the summed error variances. SE is the
/// Akritas-Bershady influence-function sandwich. A non-positive denominator
/// means measurement variance exceeds the observed spread ("noise dominates
/// signal"); SIMEX is the recommended fallback.
SlopeFit bces_estimate(std::span<const double> gammas,
                       std::span<const double> taus,
                       std::span<const double> se_gammas,
                       std::span<const double> cov_uvs);
SlopeFit bces_estimate(const EffectDataset& dataset);

enum class BootstrapMode { pairs, wild_restricted };

/// Bootstrap inference for the BCES slope.
///   pairs: resample subgroups with replacement; se_beta is the standard
///     deviation across valid replicates, the 95% percentile interval
///     lands in diagnostics (ci_pctl_lower / ci_pctl_upper), and p_value
///     carries the equal-tail bootstrap p-value.
///   wild_restricted: impose the null beta = 0, flip the tau residuals
///     around their mean with Rademacher signs, and recompute; diagnostics
///     carry p_value = fraction of |beta*| >= |beta_hat|.
/// Replicates with an invalid BCES denominator are dropped and counted
/// (diagnostics invalid_replicates); more than 50% invalid is an error
/// ("bootstrap unstable"). Pure function of (dataset, mode, B, seed).
SlopeFit bces_bootstrap(const EffectDataset& dataset, BootstrapMode mode,
                        int B, std::uint64_t seed);

/// Simulation-extrapolation estimator. For each zeta > 0 on the grid,
/// gamma_hat is perturbed B times with sqrt(zeta) * se_gamma * Z noise
/// (one deterministic substream per (replicate, grid point, record)), the
/// naive slope is averaged into g(zeta), and a quadratic in zeta is
/// extrapolated to zeta = -1. g(0) is the exact naive slope on the
/// observed data. The SE comes from an outer pairs bootstrap of the whole
/// procedure (config.outer_reps replicates; 0 skips it).
SimexFit simex_estimate(const EffectDataset& dataset,
                        const SimexConfig& config);

/// Polynomial-beta fit for testing whether beta is constant. Degree 1
/// delegates to the naive slope. Degree 2 fits
/// tau = c + theta0*gamma + theta1*gamma^2 + theta2*gamma^3 by least
/// squares; extra_coefs carry theta0..theta2, and beta_hat is the
/// weight-averaged beta(gamma_k) = theta0 + theta1*gamma_k + theta2*gamma_k^2
/// with a delta-method SE. Requires K >= degree + 3.
SlopeFit polynomial_fit(const EffectDataset& dataset, int degree);

enum class AdjustMethod { naive, simex };

/// Covariate-adjusted fit: least squares of tau_hat on gamma_hat and the
/// per-group covariate means (which are treated as error-free). The simex
/// variant perturbs only gamma_hat. Zero-variance covariate columns are
/// dropped (diagnostics dropped_covariates) rather than failing the rank
/// check; a genuinely rank-deficient design is "collinear covariates".
SlopeFit adjusted_fit(const EffectDataset& dataset, AdjustMethod method,
                      const SimexConfig& config = SimexConfig{});

}  // namespace hetmed
