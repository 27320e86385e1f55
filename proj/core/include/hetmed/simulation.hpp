#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hetmed/types.hpp"

namespace hetmed {

/// Individual-level DGP with a shared unobserved confounder:
///   M = 1 + gamma_g * T + kappa * u + eps_M
///   Y = 1 + T + M + kappa * u + eps_Y
/// T, u and both noise terms are standard normal; groups are the entries
/// of gamma_set. The true ACME is mean(gamma_set) (the mediator's
/// coefficient in Y is 1).
struct ConfoundedDgpConfig {
  double kappa = 0.0;
  std::vector<double> gamma_set = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  int n_per_group = 500;
  std::uint64_t seed = 0;
};

struct ConfoundedDraw {
  IndividualDataset data;
  double true_acme = 0.0;
};

ConfoundedDraw dgp_confounded(const ConfoundedDgpConfig& config);

/// Aggregate-level calibration DGP: gamma_k ~ N(gamma_mean, gamma_sd),
/// tau_k = delta_mean + beta * gamma_k + N(0,1), per-group measurement SDs
/// drawn from Gamma(se_shape, se_rate), observed values perturbed with
/// N(0, sd) noise. fixed_se_gamma / fixed_se_tau override the drawn SDs
/// (0 turns measurement error off entirely). Weights are equal.
struct AggregateDgpConfig {
  int K = 10;
  double beta = 0.0;
  double delta_mean = 4.0;
  double gamma_mean = 2.0;
  double gamma_sd = 1.0;
  double se_shape = 1.0;
  double se_rate = 1.0;
  std::optional<double> fixed_se_gamma;
  std::optional<double> fixed_se_tau;
  std::uint64_t seed = 0;
};

struct AggregateDraw {
  EffectDataset dataset;
  LatentEffects latent;
};

AggregateDraw dgp_aggregate(const AggregateDgpConfig& config);

/// Product-of-coefficients baseline under sequential ignorability: pooled
/// least squares of Y on (T, M) and M on T; ACME = beta_tilde * gamma_tilde
/// with a nonparametric percentile bootstrap CI over units.
struct TraditionalAcme {
  double estimate = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double beta_tilde = 0.0;
  double gamma_tilde = 0.0;
};

TraditionalAcme traditional_acme(const IndividualDataset& data, int B,
                                 double alpha, std::uint64_t seed);

/// One confounded-DGP replication pushed through both pipelines: grouped
/// effects -> SIMEX -> intersection-union inference versus the traditional
/// baseline.
struct Table2Sample {
  double hte_acme = 0.0;
  double hte_ci_lower = 0.0;
  double hte_ci_upper = 0.0;
  double trad_acme = 0.0;
  double trad_ci_lower = 0.0;
  double trad_ci_upper = 0.0;
};

Table2Sample table2_once(const ConfoundedDgpConfig& config, double alpha,
                         CiMode mode, std::uint64_t seed);

struct Table2Row {
  double kappa = 0.0;
  int reps = 0;
  double hte_acme = 0.0;
  double hte_ci_lower = 0.0;
  double hte_ci_upper = 0.0;
  double hte_cover_rate = 0.0;  // fraction of runs whose CI covers the truth
  double trad_acme = 0.0;
  double trad_ci_lower = 0.0;
  double trad_ci_upper = 0.0;
  double trad_cover_rate = 0.0;
};

std::vector<Table2Row> run_table2(std::span<const double> kappas, int reps,
                                  const ConfoundedDgpConfig& base, double alpha,
                                  CiMode mode, std::uint64_t seed);

enum class CalibrationEstimator { bces, bces_pairs, bces_wild, simex };

const char* to_string(CalibrationEstimator e);

struct CalibrationCell {
  int K = 0;
  CalibrationEstimator estimator = CalibrationEstimator::simex;
  int reps = 0;
  int failures = 0;  // replications the estimator refused (BCES denominator)
  double rejection_rate = 0.0;  // over the successful replications
};

/// Rejection-rate table over the aggregate DGP: size when beta = 0, power
/// otherwise. Replications use substreams keyed by (seed, rep), so results
/// do not depend on scheduling.
std::vector<CalibrationCell> run_calibration(
    double beta, std::span<const int> K_list, int reps,
    std::span<const CalibrationEstimator> estimators, double alpha,
    std::uint64_t seed);

/// Exact SE shrink factor when k*n/base_groups extra units are spread over
/// the existing groups: 1/sqrt(1 + k/base_groups).
double grow_arm_se_multiplier(int k, int base_groups = 10);

struct PowerPoint {
  int k = 0;
  double power_add_groups = 0.0;
  double power_grow_groups = 0.0;
};

/// Budget comparison of SI-style designs: spend k*n extra units on k new
/// groups (fresh gamma and SE draws) or on shrinking every group's SEs by
/// grow_arm_se_multiplier(k). Power of the SIMEX intersection-union test
/// at level alpha, with common random numbers across k so the curves are
/// comparable point to point.
std::vector<PowerPoint> power_curve(int base_groups, int n, int k_max,
                                    int k_step, int reps, double beta,
                                    double alpha, std::uint64_t seed);

}  // namespace hetmed
