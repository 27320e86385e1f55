#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hetmed {

/// One subgroup's estimated treatment effects on the mediator (gamma_hat)
/// and on the outcome (tau_hat), with the standard errors of those
/// estimates and, optionally, the covariance of the two estimation errors.
/// covariate_means carry per-group averages of adjustment covariates for
/// the covariate-adjusted fit; leave empty when unused.
struct SubgroupEffect {
  std::string group_id;
  double gamma_hat = 0.0;
  double se_gamma = 0.0;
  double tau_hat = 0.0;
  double se_tau = 0.0;
  double cov_uv = 0.0;
  std::int64_t n = 1;
  std::vector<double> covariate_means;
};

class EffectDataset;

namespace detail {
EffectDataset assemble_dataset(std::vector<SubgroupEffect> raw,
                               std::vector<double> weights);
}

/// A validated collection of subgroup effects plus normalized population
/// weights. Construct through validate_dataset(); immutable afterwards and
/// safe to share across threads.
class EffectDataset {
 public:
  std::size_t size() const { return effects_.size(); }
  const std::vector<SubgroupEffect>& effects() const { return effects_; }
  const std::vector<double>& weights() const { return weights_; }

  // Dense columns, kept in record order for the estimators' inner loops.
  const std::vector<double>& gammas() const { return gammas_; }
  const std::vector<double>& se_gammas() const { return se_gammas_; }
  const std::vector<double>& taus() const { return taus_; }
  const std::vector<double>& se_taus() const { return se_taus_; }
  const std::vector<double>& cov_uvs() const { return cov_uvs_; }

  /// Number of adjustment covariates (0 when none were provided).
  std::size_t covariate_dim() const { return covariate_dim_; }
  /// covariate_means()[k][j] = mean of covariate j in group k.
  const std::vector<std::vector<double>>& covariate_means() const {
    return covariate_means_;
  }

 private:
  EffectDataset() = default;
  friend EffectDataset detail::assemble_dataset(std::vector<SubgroupEffect> raw,
                                                std::vector<double> weights);

  std::vector<SubgroupEffect> effects_;
  std::vector<double> weights_;
  std::vector<double> gammas_, se_gammas_, taus_, se_taus_, cov_uvs_;
  std::size_t covariate_dim_ = 0;
  std::vector<std::vector<double>> covariate_means_;
};

/// Unit-level records for subgroup discovery and simulation. Covariates are
/// stored column-major: covariates[j][i] is covariate j of unit i.
struct IndividualDataset {
  std::vector<double> treatment;
  std::vector<double> mediator;
  std::vector<double> outcome;
  std::vector<std::string> covariate_names;
  std::vector<std::vector<double>> covariates;
  std::vector<std::string> group_labels;  // empty, or one label per unit

  std::size_t size() const { return treatment.size(); }
  bool has_labels() const { return !group_labels.empty(); }
  /// True when every treatment value is exactly 0 or 1.
  bool treatment_is_binary() const;
};

/// True effect draws behind a synthetic dataset (simulation only).
/// tau[k] = delta[k] + beta * gamma[k] holds exactly when beta is constant.
struct LatentEffects {
  std::vector<double> gamma;
  std::vector<double> delta;
  std::vector<double> tau;
  double beta = 0.0;
};

enum class FitMethod {
  naive_ols,
  attenuation,
  bces,
  bces_pairs_boot,
  bces_wild_boot,
  simex,
  adjusted,
  polynomial,
};

const char* to_string(FitMethod m);

/// An estimate of the mediator-on-outcome slope beta with its standard
/// error. intercept_hat estimates the mean direct effect. extra_coefs hold
/// adjustment coefficients (covariate-adjusted fit) or the polynomial
/// theta coefficients. diagnostics carry method-specific numbers such as
/// the attenuation factor, inter-study variance, or bootstrap p-value.
struct SlopeFit {
  double beta_hat = 0.0;
  double se_beta = 0.0;
  double intercept_hat = 0.0;
  FitMethod method = FitMethod::naive_ols;
  std::vector<std::pair<std::string, double>> extra_coefs;
  std::map<std::string, double> diagnostics;

  bool has_diagnostic(const std::string& key) const {
    return diagnostics.count(key) > 0;
  }
};

/// How the SIMEX standard error is produced.
///   variance_extrapolation: extrapolate the net variance curve
///     v(zeta) = mean asymptotic variance of the perturbed fits minus the
///     across-replicate scatter, to zeta = -1 (the measurement-error
///     jackknife of Stefanski & Cook). Cheap and matches the calibration
///     tables.
///   pairs_bootstrap: resample subgroups and re-run the whole procedure
///     outer_reps times; robust but conservative at small K.
///   none: skip the SE (point estimate only).
enum class SimexSeMethod { variance_extrapolation, pairs_bootstrap, none };

/// Configuration of the simulation-extrapolation estimator. The grid must
/// start at exactly 0 and be strictly increasing; B is the number of
/// perturbation replicates averaged at each positive grid point.
struct SimexConfig {
  std::vector<double> zeta_grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  int B = 200;
  SimexSeMethod se_method = SimexSeMethod::variance_extrapolation;
  int outer_reps = 100;  // pairs_bootstrap replicates
  std::uint64_t seed = 0;
};

struct SimexPoint {
  double zeta = 0.0;
  double slope = 0.0;      // g(zeta), mean over the B replicates
  double intercept = 0.0;  // the intercept path, extrapolated alongside
};

/// SIMEX result: the extrapolated fit plus the (zeta, g(zeta)) curve and
/// the quadratic extrapolant coefficients (slope as a function of zeta).
struct SimexFit {
  SlopeFit fit;
  std::vector<SimexPoint> curve;
  double extrap_c0 = 0.0;
  double extrap_c1 = 0.0;
  double extrap_c2 = 0.0;

  /// Extrapolant evaluated at an arbitrary zeta (beta_hat is value at -1).
  double extrapolant(double zeta) const {
    return extrap_c0 + extrap_c1 * zeta + extrap_c2 * zeta * zeta;
  }
};

/// Weighted aggregate of the subgroup mediator effects:
/// gamma0_hat = sum_k w_k * gamma_hat_k, with its variance under
/// independent subgroup estimates.
struct GammaAggregate {
  double gamma0_hat = 0.0;
  double var_gamma0 = 0.0;
  int K = 0;
};

struct Heterogeneity {
  double Q = 0.0;
  int df = 0;
  double p_Q = 1.0;
  double I2 = 0.0;
};

enum class CiMode { paper_literal, endpoint_product };

const char* to_string(CiMode m);

/// Full mediation answer for one beta estimator: the slope fit, the gamma
/// aggregate, the ACME point estimate, the intersection-union p-values,
/// and the conservative confidence interval.
struct MediationResult {
  SlopeFit beta_fit;
  GammaAggregate gamma_agg;
  double acme_hat = 0.0;
  double p_beta = 1.0;
  double p_gamma = 1.0;
  double p_overall = 1.0;
  bool reject = false;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  CiMode ci_mode = CiMode::endpoint_product;
  double alpha = 0.05;
  Heterogeneity heterogeneity;
};

}  // namespace hetmed
