#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "hetmed/dist.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/rng.hpp"

namespace hetmed {

namespace {

struct MultiFit {
  Eigen::VectorXd coef;
  Eigen::MatrixXd cov_hc1;
  double cond = 0.0;
};

MultiFit least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const auto n = X.rows();
  const auto p = X.cols();

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const double smin = svd.singularValues()(p - 1);
  const double smax = svd.singularValues()(0);
  MultiFit out;
  out.cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() < p) throw NumericError("collinear covariates");
  out.coef = qr.solve(y);

  // HC1 sandwich: (X'X)^-1 X' diag(e^2) X (X'X)^-1 * n/(n-p).
  const Eigen::VectorXd resid = y - X * out.coef;
  const Eigen::MatrixXd xtx_inv =
      (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd meat =
      X.transpose() * resid.array().square().matrix().asDiagonal() * X;
  const double dof_adjust =
      static_cast<double>(n) / static_cast<double>(n - p);
  out.cov_hc1 = dof_adjust * xtx_inv * meat * xtx_inv;
  return out;
}

Eigen::VectorXd solve_coef(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.colPivHouseholderQr().solve(y);
}

// Quadratic-in-zeta extrapolation of a coefficient path, evaluated at -1.
double extrapolate_to_minus_one(const std::vector<double>& zetas,
                                const std::vector<double>& values) {
  const std::size_t m = zetas.size();
  Eigen::MatrixXd Z(m, 3);
  Eigen::VectorXd v(m);
  for (std::size_t i = 0; i < m; ++i) {
    Z(i, 0) = 1.0;
    Z(i, 1) = zetas[i];
    Z(i, 2) = zetas[i] * zetas[i];
    v(i) = values[i];
  }
  const Eigen::VectorXd c = Z.colPivHouseholderQr().solve(v);
  return c(0) - c(1) + c(2);
}

}  // namespace

SlopeFit polynomial_fit(const EffectDataset& dataset, int degree) {
  if (degree != 1 && degree != 2) {
    throw InputError("polynomial degree must be 1 or 2");
  }
  const std::size_t K = dataset.size();
  if (K < static_cast<std::size_t>(degree) + 3) {
    throw InputError("insufficient subgroups");
  }
  if (degree == 1) {
    return ols_slope(dataset.gammas(), dataset.taus());
  }

  // beta(gamma) = theta0 + theta1 g + theta2 g^2 substituted into the
  // decomposition gives a cubic regression of tau on gamma.
  Eigen::MatrixXd X(K, 4);
  Eigen::VectorXd y(K);
  for (std::size_t k = 0; k < K; ++k) {
    const double g = dataset.gammas()[k];
    X(k, 0) = 1.0;
    X(k, 1) = g;
    X(k, 2) = g * g;
    X(k, 3) = g * g * g;
    y(k) = dataset.taus()[k];
  }

  MultiFit ls;
  try {
    ls = least_squares(X, y);
  } catch (const NumericError&) {
    throw NumericError("ill-conditioned design");
  }
  if (ls.cond > 1e10) throw NumericError("ill-conditioned design");

  SlopeFit fit;
  fit.method = FitMethod::polynomial;
  fit.intercept_hat = ls.coef(0);
  fit.extra_coefs = {{"theta0", ls.coef(1)},
                     {"theta1", ls.coef(2)},
                     {"theta2", ls.coef(3)}};

  // Population-weighted average slope and its delta-method SE.
  double m1 = 0.0, m2 = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    m1 += dataset.weights()[k] * dataset.gammas()[k];
    m2 += dataset.weights()[k] * dataset.gammas()[k] * dataset.gammas()[k];
  }
  fit.beta_hat = ls.coef(1) + ls.coef(2) * m1 + ls.coef(3) * m2;
  Eigen::Vector4d grad(0.0, 1.0, m1, m2);
  fit.se_beta = std::sqrt(grad.transpose() * ls.cov_hc1 * grad);
  fit.diagnostics["condition_number"] = ls.cond;
  return fit;
}

SlopeFit adjusted_fit(const EffectDataset& dataset, AdjustMethod method,
                      const SimexConfig& config) {
  const std::size_t K = dataset.size();
  const std::size_t p = dataset.covariate_dim();
  if (p == 0) throw InputError("dataset carries no covariate means");
  if (K < p + 3) throw InputError("insufficient subgroups");

  // Zero-variance covariate columns carry no information next to the
  // intercept; drop them instead of tripping the rank check.
  std::vector<std::size_t> kept;
  for (std::size_t j = 0; j < p; ++j) {
    const double first = dataset.covariate_means()[0][j];
    bool varies = false;
    for (std::size_t k = 1; k < K; ++k) {
      varies |= dataset.covariate_means()[k][j] != first;
    }
    if (varies) kept.push_back(j);
  }
  const std::size_t dropped = p - kept.size();

  if (kept.empty()) {
    // Nothing to adjust for; fall back to the unadjusted estimator so the
    // result matches it exactly.
    SlopeFit fit;
    if (method == AdjustMethod::simex) {
      fit = simex_estimate(dataset, config).fit;
    } else {
      fit = ols_slope(dataset.gammas(), dataset.taus());
    }
    fit.method = FitMethod::adjusted;
    fit.diagnostics["dropped_covariates"] = static_cast<double>(dropped);
    return fit;
  }

  const std::size_t cols = 2 + kept.size();
  Eigen::MatrixXd X(K, cols);
  Eigen::VectorXd y(K);
  for (std::size_t k = 0; k < K; ++k) {
    X(k, 0) = 1.0;
    X(k, 1) = dataset.gammas()[k];
    for (std::size_t j = 0; j < kept.size(); ++j) {
      X(k, 2 + j) = dataset.covariate_means()[k][kept[j]];
    }
    y(k) = dataset.taus()[k];
  }

  SlopeFit fit;
  fit.method = FitMethod::adjusted;
  fit.diagnostics["dropped_covariates"] = static_cast<double>(dropped);

  const MultiFit ls = least_squares(X, y);

  auto coef_name = [&](std::size_t j) {
    return "beta_x" + std::to_string(kept[j] + 1);
  };

  if (method == AdjustMethod::naive) {
    fit.intercept_hat = ls.coef(0);
    fit.beta_hat = ls.coef(1);
    fit.se_beta = std::sqrt(ls.cov_hc1(1, 1));
    for (std::size_t j = 0; j < kept.size(); ++j) {
      fit.extra_coefs.emplace_back(coef_name(j), ls.coef(2 + j));
    }
    return fit;
  }

  // SIMEX variant: only gamma_hat carries measurement error, so only
  // column 1 is perturbed; every coefficient path is extrapolated.
  const Rng base(config.seed);
  const Rng perturb_root = base.fork("adjusted-simex-perturb");
  const std::size_t m = config.zeta_grid.size();
  if (m < 3) throw InputError("underdetermined extrapolant");

  const bool want_variance =
      config.se_method == SimexSeMethod::variance_extrapolation;
  auto slope_var = [&](const Eigen::MatrixXd& Xf, const Eigen::VectorXd& coef) {
    const Eigen::VectorXd resid = y - Xf * coef;
    const double sigma2 = resid.squaredNorm() /
                          static_cast<double>(K - cols);
    const Eigen::MatrixXd xtx_inv =
        (Xf.transpose() * Xf)
            .ldlt()
            .solve(Eigen::MatrixXd::Identity(cols, cols));
    return sigma2 * xtx_inv(1, 1);
  };

  std::vector<std::vector<double>> paths(cols, std::vector<double>(m));
  std::vector<double> net_var(m, 0.0);
  for (std::size_t c = 0; c < cols; ++c) paths[c][0] = ls.coef(c);
  if (want_variance) net_var[0] = slope_var(X, ls.coef);

  Eigen::MatrixXd Xp = X;
  for (std::size_t zi = 1; zi < m; ++zi) {
    const double root_zeta = std::sqrt(config.zeta_grid[zi]);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(cols);
    double beta_sumsq = 0.0, var_sum = 0.0;
    for (int b = 0; b < config.B; ++b) {
      for (std::size_t k = 0; k < K; ++k) {
        Rng draw = perturb_root.fork_idx(static_cast<std::uint64_t>(b), zi, k);
        Xp(k, 1) = dataset.gammas()[k] +
                   root_zeta * dataset.se_gammas()[k] * draw.normal();
      }
      const Eigen::VectorXd coef = solve_coef(Xp, y);
      acc += coef;
      if (want_variance) {
        beta_sumsq += coef(1) * coef(1);
        var_sum += slope_var(Xp, coef);
      }
    }
    const double nb = static_cast<double>(config.B);
    acc /= nb;
    for (std::size_t c = 0; c < cols; ++c) paths[c][zi] = acc(c);
    if (want_variance) {
      const double scatter =
          (beta_sumsq - nb * acc(1) * acc(1)) / (nb - 1.0);
      net_var[zi] = var_sum / nb - scatter;
    }
  }

  std::vector<double> zetas(config.zeta_grid.begin(), config.zeta_grid.end());
  fit.intercept_hat = extrapolate_to_minus_one(zetas, paths[0]);
  fit.beta_hat = extrapolate_to_minus_one(zetas, paths[1]);
  for (std::size_t j = 0; j < kept.size(); ++j) {
    fit.extra_coefs.emplace_back(coef_name(j),
                                 extrapolate_to_minus_one(zetas, paths[2 + j]));
  }

  if (want_variance) {
    double v = extrapolate_to_minus_one(zetas, net_var);
    if (v < net_var[0]) {
      v = net_var[0];
      fit.diagnostics["se_floored"] = 1.0;
    }
    const double dof = static_cast<double>(K - cols);
    const double factor =
        student_t_quantile(0.975, dof) / normal_quantile(0.975);
    fit.se_beta = std::sqrt(v) * factor;
    fit.diagnostics["small_sample_factor"] = factor;
    return fit;
  }
  if (config.se_method == SimexSeMethod::none) return fit;

  if (config.outer_reps > 0) {
    const Rng resample_root = base.fork("adjusted-simex-outer");
    std::vector<double> betas;
    int invalid = 0;
    for (int r = 0; r < config.outer_reps; ++r) {
      Rng pick = resample_root.fork_idx(static_cast<std::uint64_t>(r));
      Eigen::MatrixXd Xr(K, cols);
      Eigen::VectorXd yr(K);
      std::vector<double> gr(K), ser(K);
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t j = static_cast<std::size_t>(pick.below(K));
        Xr.row(k) = X.row(j);
        yr(k) = y(j);
        gr[k] = dataset.gammas()[j];
        ser[k] = dataset.se_gammas()[j];
      }
      // Re-run the extrapolation on the resample.
      try {
        std::vector<double> path(m);
        path[0] = solve_coef(Xr, yr)(1);
        Eigen::MatrixXd Xrp = Xr;
        Rng rep_root = resample_root.fork_idx(static_cast<std::uint64_t>(r),
                                              0x5e, 0x11);
        for (std::size_t zi = 1; zi < m; ++zi) {
          const double root_zeta = std::sqrt(config.zeta_grid[zi]);
          double acc = 0.0;
          for (int b = 0; b < config.B; ++b) {
            for (std::size_t k = 0; k < K; ++k) {
              Rng draw = rep_root.fork_idx(static_cast<std::uint64_t>(b), zi, k);
              Xrp(k, 1) = gr[k] + root_zeta * ser[k] * draw.normal();
            }
            acc += solve_coef(Xrp, yr)(1);
          }
          path[zi] = acc / static_cast<double>(config.B);
        }
        betas.push_back(extrapolate_to_minus_one(zetas, path));
      } catch (const std::exception&) {
        ++invalid;
      }
    }
    if (betas.size() * 2 < static_cast<std::size_t>(config.outer_reps)) {
      throw NumericError("bootstrap unstable");
    }
    double mean = 0.0;
    for (double b : betas) mean += b;
    mean /= static_cast<double>(betas.size());
    double ss = 0.0;
    for (double b : betas) ss += (b - mean) * (b - mean);
    fit.se_beta = std::sqrt(ss / (static_cast<double>(betas.size()) - 1.0));
    fit.diagnostics["outer_invalid"] = static_cast<double>(invalid);
  }
  return fit;
}

}  // namespace hetmed
