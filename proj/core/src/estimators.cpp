#include "hetmed/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hetmed/errors.hpp"
#include "hetmed/rng.hpp"

namespace hetmed {

double attenuation_lambda(double sigma2_gamma,
                          std::span<const double> se_gammas) {
  if (se_gammas.empty()) throw InputError("empty input");
  if (sigma2_gamma < 0.0) throw InputError("negative signal variance");
  double mean_var = 0.0;
  for (double se : se_gammas) mean_var += se * se;
  mean_var /= static_cast<double>(se_gammas.size());
  if (mean_var == 0.0) return 1.0;
  if (sigma2_gamma == 0.0) throw NumericError("zero signal variance");
  return sigma2_gamma / (sigma2_gamma + mean_var);
}

namespace {

struct FixedEffect {
  double mean = 0.0;  // inverse-variance weighted mean
  double Q = 0.0;     // weighted squared deviation around it
  double sum_w = 0.0;
  double sum_w2 = 0.0;
};

FixedEffect fixed_effect_stats(std::span<const double> gammas,
                               std::span<const double> variances) {
  FixedEffect fe;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    const double w = 1.0 / variances[k];
    fe.sum_w += w;
    fe.sum_w2 += w * w;
    fe.mean += w * gammas[k];
  }
  fe.mean /= fe.sum_w;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    const double d = gammas[k] - fe.mean;
    fe.Q += d * d / variances[k];
  }
  return fe;
}

double paule_mandel(std::span<const double> gammas,
                    std::span<const double> variances) {
  const std::size_t K = gammas.size();
  const double target = static_cast<double>(K - 1);

  auto moment = [&](double tau2) {
    double sw = 0.0, swg = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double w = 1.0 / (variances[k] + tau2);
      sw += w;
      swg += w * gammas[k];
    }
    const double mu = swg / sw;
    double f = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      const double d = gammas[k] - mu;
      f += d * d / (variances[k] + tau2);
    }
    return f - target;
  };

  if (moment(0.0) <= 0.0) return 0.0;

  // The moment function decreases in tau^2; bracket then bisect.
  double lo = 0.0;
  double hi = 1.0;
  int expansions = 0;
  while (moment(hi) > 0.0) {
    hi *= 4.0;
    if (++expansions > 60) {
      throw NumericError("no convergence (bracketing failed at tau2=" +
                         std::to_string(hi) + ")");
    }
  }
  std::ostringstream trace;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (moment(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-8) return 0.5 * (lo + hi);
    if (it >= 94) trace << " [" << it << "] " << lo << ".." << hi;
  }
  throw NumericError("no convergence; trace:" + trace.str());
}

}  // namespace

double inter_study_variance(std::span<const double> gammas,
                            std::span<const double> se_gammas,
                            VarianceMethod method) {
  if (gammas.size() != se_gammas.size()) throw InputError("length mismatch");
  const std::size_t K = gammas.size();
  if (K < 3) throw InputError("insufficient subgroups");

  std::vector<double> variances(K);
  for (std::size_t k = 0; k < K; ++k) {
    if (se_gammas[k] <= 0.0) throw NumericError("infinite weight");
    variances[k] = se_gammas[k] * se_gammas[k];
  }

  if (method == VarianceMethod::paule_mandel) {
    return paule_mandel(gammas, variances);
  }

  const FixedEffect fe = fixed_effect_stats(gammas, variances);
  const double denom = fe.sum_w - fe.sum_w2 / fe.sum_w;
  if (denom <= 0.0) throw NumericError("degenerate weights");
  return std::max(0.0, (fe.Q - static_cast<double>(K - 1)) / denom);
}

double inter_study_variance(const EffectDataset& dataset,
                            VarianceMethod method) {
  return inter_study_variance(dataset.gammas(), dataset.se_gammas(), method);
}

SlopeFit attenuation_corrected(const EffectDataset& dataset,
                               VarianceMethod method) {
  SlopeFit naive = ols_slope(dataset.gammas(), dataset.taus());

  bool any_noise = false;
  for (double se : dataset.se_gammas()) any_noise |= se > 0.0;

  double lambda = 1.0;
  double sigma2_gamma = 0.0;
  if (any_noise) {
    sigma2_gamma = inter_study_variance(dataset, method);
    lambda = attenuation_lambda(sigma2_gamma, dataset.se_gammas());
  }

  SlopeFit fit;
  fit.method = FitMethod::attenuation;
  fit.beta_hat = naive.beta_hat / lambda;
  // Delta method with lambda treated as fixed; understates the error of
  // the correction itself.
  fit.se_beta = naive.se_beta / lambda;
  const CenteredMoments m = centered_moments(dataset.gammas(), dataset.taus());
  fit.intercept_hat = m.ybar - fit.beta_hat * m.xbar;
  fit.diagnostics["lambda_hat"] = lambda;
  fit.diagnostics["sigma2_gamma"] = sigma2_gamma;
  fit.diagnostics["naive_beta"] = naive.beta_hat;
  return fit;
}

SlopeFit bces_estimate(std::span<const double> gammas,
                       std::span<const double> taus,
                       std::span<const double> se_gammas,
                       std::span<const double> cov_uvs) {
  const std::size_t K = gammas.size();
  if (K < 3) throw InputError("insufficient subgroups");

  const CenteredMoments m = centered_moments(gammas, taus);
  double sum_var_u = 0.0;
  double sum_cov = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    sum_var_u += se_gammas[k] * se_gammas[k];
    sum_cov += cov_uvs.empty() ? 0.0 : cov_uvs[k];
  }

  const double denom = m.sxx - sum_var_u;
  if (denom <= 0.0) {
    throw NumericError(
        "noise dominates signal (BCES denominator <= 0; consider SIMEX)");
  }

  SlopeFit fit;
  fit.method = FitMethod::bces;
  fit.beta_hat = (m.sxy - sum_cov) / denom;
  fit.intercept_hat = m.ybar - fit.beta_hat * m.xbar;

  // Akritas-Bershady influence-function sandwich.
  const double dn = static_cast<double>(K);
  const double scale = denom / dn;  // corrected covariance of the regressor
  double xi_sum = 0.0;
  std::vector<double> xi(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double resid = taus[k] - fit.beta_hat * gammas[k] - fit.intercept_hat;
    const double cov = cov_uvs.empty() ? 0.0 : cov_uvs[k];
    xi[k] = ((gammas[k] - m.xbar) * resid +
             fit.beta_hat * se_gammas[k] * se_gammas[k] - cov) /
            scale;
    xi_sum += xi[k];
  }
  const double xi_bar = xi_sum / dn;
  double xi_var = 0.0;
  for (double v : xi) xi_var += (v - xi_bar) * (v - xi_bar);
  xi_var /= dn - 1.0;
  fit.se_beta = std::sqrt(xi_var / dn);
  fit.diagnostics["denominator"] = denom;
  return fit;
}

SlopeFit bces_estimate(const EffectDataset& dataset) {
  return bces_estimate(dataset.gammas(), dataset.taus(), dataset.se_gammas(),
                       dataset.cov_uvs());
}

namespace {

double stddev(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / (n - 1.0));
}

double percentile(std::vector<double> sorted, double q) {
  // linear interpolation between order statistics
  std::sort(sorted.begin(), sorted.end());
  const double idx = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(idx);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = idx - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

SlopeFit bces_bootstrap(const EffectDataset& dataset, BootstrapMode mode,
                        int B, std::uint64_t seed) {
  if (B < 199) throw InputError("bootstrap replicates must be >= 199");

  SlopeFit point = bces_estimate(dataset);
  const std::size_t K = dataset.size();
  const Rng base(seed);

  std::vector<double> betas;
  betas.reserve(static_cast<std::size_t>(B));
  int invalid = 0;

  if (mode == BootstrapMode::pairs) {
    std::vector<double> g(K), t(K), se(K), cov(K);
    for (int b = 0; b < B; ++b) {
      Rng rng = base.fork("bces-pairs", static_cast<std::uint64_t>(b));
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t j = static_cast<std::size_t>(rng.below(K));
        g[k] = dataset.gammas()[j];
        t[k] = dataset.taus()[j];
        se[k] = dataset.se_gammas()[j];
        cov[k] = dataset.cov_uvs()[j];
      }
      try {
        betas.push_back(bces_estimate(g, t, se, cov).beta_hat);
      } catch (const NumericError&) {
        ++invalid;
      }
    }
  } else {
    // Null-restricted wild bootstrap: under beta = 0 the model for tau is
    // just its mean, so flip the centered taus with Rademacher signs and
    // re-estimate. gamma_hat and the error variances stay fixed.
    double tau_bar = 0.0;
    for (double t : dataset.taus()) tau_bar += t;
    tau_bar /= static_cast<double>(K);

    std::vector<double> t_star(K);
    for (int b = 0; b < B; ++b) {
      Rng rng = base.fork("bces-wild", static_cast<std::uint64_t>(b));
      for (std::size_t k = 0; k < K; ++k) {
        t_star[k] = tau_bar + (dataset.taus()[k] - tau_bar) * rng.rademacher();
      }
      try {
        betas.push_back(bces_estimate(dataset.gammas(), t_star,
                                      dataset.se_gammas(), dataset.cov_uvs())
                            .beta_hat);
      } catch (const NumericError&) {
        ++invalid;
      }
    }
  }

  if (betas.size() * 2 < static_cast<std::size_t>(B)) {
    throw NumericError("bootstrap unstable (" + std::to_string(invalid) + "/" +
                       std::to_string(B) + " invalid replicates)");
  }

  SlopeFit fit = point;
  fit.method = mode == BootstrapMode::pairs ? FitMethod::bces_pairs_boot
                                            : FitMethod::bces_wild_boot;
  fit.se_beta = stddev(betas);
  fit.diagnostics["replicates"] = static_cast<double>(betas.size());
  fit.diagnostics["invalid_replicates"] = static_cast<double>(invalid);

  if (mode == BootstrapMode::pairs) {
    fit.diagnostics["ci_pctl_lower"] = percentile(betas, 0.025);
    fit.diagnostics["ci_pctl_upper"] = percentile(betas, 0.975);
    // Equal-tail bootstrap p-value: the smallest level at which the
    // percentile interval excludes zero. The plain SD is useless for
    // testing here (near-degenerate denominators throw huge replicate
    // outliers into it).
    std::size_t non_positive = 0, non_negative = 0;
    for (double b : betas) {
      non_positive += b <= 0.0;
      non_negative += b >= 0.0;
    }
    fit.diagnostics["p_value"] =
        std::min(1.0, 2.0 *
                          static_cast<double>(
                              std::min(non_positive, non_negative)) /
                          static_cast<double>(betas.size()));
  } else {
    std::size_t exceed = 0;
    for (double b : betas) {
      if (std::fabs(b) >= std::fabs(point.beta_hat)) ++exceed;
    }
    fit.diagnostics["p_value"] =
        static_cast<double>(exceed) / static_cast<double>(betas.size());
  }
  return fit;
}

}  // namespace hetmed
