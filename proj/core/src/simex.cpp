#include <cmath>
#include <vector>

#include "hetmed/dist.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/rng.hpp"

namespace hetmed {

namespace {

void validate_config(const SimexConfig& config) {
  if (config.zeta_grid.size() < 3) {
    throw InputError("underdetermined extrapolant");
  }
  if (config.zeta_grid.front() != 0.0) {
    throw InputError("zeta grid must start at 0");
  }
  for (std::size_t i = 1; i < config.zeta_grid.size(); ++i) {
    if (config.zeta_grid[i] <= config.zeta_grid[i - 1]) {
      throw InputError("zeta grid must be strictly increasing");
    }
  }
  if (config.B < 50) throw InputError("simex B must be >= 50");
}

struct Quadratic {
  double c0 = 0.0, c1 = 0.0, c2 = 0.0;
  double at(double z) const { return c0 + c1 * z + c2 * z * z; }
};

// Least-squares quadratic through the (zeta, value) grid points.
Quadratic fit_quadratic(const std::vector<double>& z,
                        const std::vector<double>& y) {
  const std::size_t m = z.size();
  long double s[5] = {0, 0, 0, 0, 0};
  long double t[3] = {0, 0, 0};
  for (std::size_t i = 0; i < m; ++i) {
    long double p = 1.0L;
    for (int d = 0; d <= 4; ++d) {
      s[d] += p;
      if (d <= 2) t[d] += p * y[i];
      p *= z[i];
    }
  }
  long double a[3][4] = {{s[0], s[1], s[2], t[0]},
                         {s[1], s[2], s[3], t[1]},
                         {s[2], s[3], s[4], t[2]}};
  // Gaussian elimination with partial pivoting on the 3x3 system.
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(static_cast<double>(a[r][col])) >
          std::fabs(static_cast<double>(a[piv][col]))) {
        piv = r;
      }
    }
    for (int c = 0; c < 4; ++c) std::swap(a[piv][c], a[col][c]);
    if (a[col][col] == 0.0L) throw NumericError("underdetermined extrapolant");
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const long double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  Quadratic q;
  q.c0 = static_cast<double>(a[0][3] / a[0][0]);
  q.c1 = static_cast<double>(a[1][3] / a[1][1]);
  q.c2 = static_cast<double>(a[2][3] / a[2][2]);
  return q;
}

struct SlopeVar {
  double beta = 0.0;
  double intercept = 0.0;
  double var = 0.0;  // classical slope variance, s^2 / sxx
};

// Classical (homoskedastic) variance rather than HC1 here: the variance
// curve gets differenced and extrapolated, and the robust meat is far too
// noisy at small K to survive that (it over-rejects badly at K = 5).
SlopeVar slope_with_var(std::span<const double> x, std::span<const double> y) {
  const CenteredMoments m = centered_moments(x, y);
  if (m.sxx <= 0.0) throw NumericError("degenerate regressor");
  SlopeVar s;
  s.beta = m.sxy / m.sxx;
  s.intercept = m.ybar - s.beta * m.xbar;
  double rss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - s.intercept - s.beta * x[i];
    rss += e * e;
  }
  const double n = static_cast<double>(x.size());
  s.var = rss / (n - 2.0) / m.sxx;
  return s;
}

struct SimexCore {
  std::vector<SimexPoint> curve;
  Quadratic slope_extrap;
  Quadratic intercept_extrap;
  double beta = 0.0;
  double intercept = 0.0;
  // Net variance curve for the Stefanski-Cook extrapolation: mean
  // asymptotic variance of the perturbed fits minus the across-replicate
  // scatter, per grid point. Empty unless requested.
  std::vector<double> net_var;
};

// One full SIMEX pass over (gammas, taus, se_gammas) with perturbation
// streams drawn from perturb_root; throws NumericError on degenerate data.
SimexCore simex_core(std::span<const double> gammas,
                     std::span<const double> taus,
                     std::span<const double> se_gammas,
                     const SimexConfig& config, const Rng& perturb_root,
                     bool want_variance) {
  const std::size_t K = gammas.size();
  const std::size_t m = config.zeta_grid.size();

  SimexCore core;
  core.curve.resize(m);
  if (want_variance) core.net_var.resize(m);

  const SlopeVar naive = slope_with_var(gammas, taus);
  core.curve[0] = {0.0, naive.beta, naive.intercept};
  if (want_variance) core.net_var[0] = naive.var;

  bool any_noise = false;
  for (double se : se_gammas) any_noise |= se > 0.0;

  if (!any_noise) {
    // No measurement error: every perturbed fit reproduces the naive fit,
    // so the curve is flat and the extrapolant is the exact constant.
    for (std::size_t zi = 1; zi < m; ++zi) {
      core.curve[zi] = {config.zeta_grid[zi], naive.beta, naive.intercept};
      if (want_variance) core.net_var[zi] = naive.var;
    }
    core.slope_extrap = {naive.beta, 0.0, 0.0};
    core.intercept_extrap = {naive.intercept, 0.0, 0.0};
    core.beta = naive.beta;
    core.intercept = naive.intercept;
    return core;
  }

  std::vector<double> perturbed(K);
  for (std::size_t zi = 1; zi < m; ++zi) {
    const double zeta = config.zeta_grid[zi];
    const double root_zeta = std::sqrt(zeta);
    double slope_sum = 0.0, slope_sumsq = 0.0;
    double intercept_sum = 0.0;
    double var_sum = 0.0;
    for (int b = 0; b < config.B; ++b) {
      for (std::size_t k = 0; k < K; ++k) {
        Rng draw = perturb_root.fork_idx(static_cast<std::uint64_t>(b), zi, k);
        perturbed[k] = gammas[k] + root_zeta * se_gammas[k] * draw.normal();
      }
      if (want_variance) {
        const SlopeVar fit = slope_with_var(perturbed, taus);
        slope_sum += fit.beta;
        slope_sumsq += fit.beta * fit.beta;
        intercept_sum += fit.intercept;
        var_sum += fit.var;
      } else {
        const SlopeOnly fit = slope_only(perturbed, taus);
        slope_sum += fit.beta;
        intercept_sum += fit.intercept;
      }
    }
    const double nb = static_cast<double>(config.B);
    const double mean_slope = slope_sum / nb;
    core.curve[zi] = {zeta, mean_slope, intercept_sum / nb};
    if (want_variance) {
      const double scatter =
          (slope_sumsq - nb * mean_slope * mean_slope) / (nb - 1.0);
      core.net_var[zi] = var_sum / nb - scatter;
    }
  }

  std::vector<double> zs(m), gs(m), is(m);
  for (std::size_t i = 0; i < m; ++i) {
    zs[i] = core.curve[i].zeta;
    gs[i] = core.curve[i].slope;
    is[i] = core.curve[i].intercept;
  }
  core.slope_extrap = fit_quadratic(zs, gs);
  core.intercept_extrap = fit_quadratic(zs, is);
  core.beta = core.slope_extrap.at(-1.0);
  core.intercept = core.intercept_extrap.at(-1.0);
  return core;
}

}  // namespace

SimexFit simex_estimate(const EffectDataset& dataset,
                        const SimexConfig& config) {
  validate_config(config);
  const std::size_t K = dataset.size();

  const bool want_variance =
      config.se_method == SimexSeMethod::variance_extrapolation;
  const Rng base(config.seed);
  const SimexCore core =
      simex_core(dataset.gammas(), dataset.taus(), dataset.se_gammas(), config,
                 base.fork("simex-perturb"), want_variance);

  SimexFit out;
  out.curve = core.curve;
  out.extrap_c0 = core.slope_extrap.c0;
  out.extrap_c1 = core.slope_extrap.c1;
  out.extrap_c2 = core.slope_extrap.c2;
  out.fit.method = FitMethod::simex;
  out.fit.beta_hat = core.beta;
  out.fit.intercept_hat = core.intercept;
  out.fit.diagnostics["g0"] = core.curve.front().slope;

  if (want_variance) {
    std::vector<double> zs(core.curve.size());
    for (std::size_t i = 0; i < zs.size(); ++i) zs[i] = core.curve[i].zeta;
    const Quadratic var_extrap = fit_quadratic(zs, core.net_var);
    const double v_naive = core.net_var.front();
    double v = var_extrap.at(-1.0);
    // The extrapolated estimator cannot be more precise than the naive fit
    // it amplifies; clamp extrapolation artifacts from below.
    if (v < v_naive) {
      v = v_naive;
      out.fit.diagnostics["se_floored"] = 1.0;
    }
    // Small-sample adjustment: downstream tests standardize by the normal,
    // so fold the t-to-normal quantile ratio at the 95% level into the SE
    // (Hartung-Knapp style). Fades as K grows.
    const double dof = static_cast<double>(K) - 2.0;
    const double factor =
        student_t_quantile(0.975, dof) / normal_quantile(0.975);
    out.fit.se_beta = std::sqrt(v) * factor;
    out.fit.diagnostics["small_sample_factor"] = factor;
    return out;
  }

  if (config.se_method == SimexSeMethod::pairs_bootstrap &&
      config.outer_reps > 0) {
    const Rng resample_root = base.fork("simex-outer-resample");
    const Rng perturb_root = base.fork("simex-outer-perturb");
    std::vector<double> betas;
    betas.reserve(static_cast<std::size_t>(config.outer_reps));
    int invalid = 0;
    std::vector<double> g(K), t(K), se(K);
    for (int r = 0; r < config.outer_reps; ++r) {
      Rng pick = resample_root.fork_idx(static_cast<std::uint64_t>(r));
      for (std::size_t k = 0; k < K; ++k) {
        const std::size_t j = static_cast<std::size_t>(pick.below(K));
        g[k] = dataset.gammas()[j];
        t[k] = dataset.taus()[j];
        se[k] = dataset.se_gammas()[j];
      }
      try {
        betas.push_back(
            simex_core(g, t, se, config,
                       perturb_root.fork_idx(static_cast<std::uint64_t>(r)),
                       false)
                .beta);
      } catch (const NumericError&) {
        ++invalid;
      }
    }
    if (betas.size() * 2 < static_cast<std::size_t>(config.outer_reps)) {
      throw NumericError("bootstrap unstable (" + std::to_string(invalid) +
                         "/" + std::to_string(config.outer_reps) +
                         " invalid replicates)");
    }
    double mean = 0.0;
    for (double b : betas) mean += b;
    mean /= static_cast<double>(betas.size());
    double ss = 0.0;
    for (double b : betas) ss += (b - mean) * (b - mean);
    out.fit.se_beta = std::sqrt(ss / (static_cast<double>(betas.size()) - 1.0));
    out.fit.diagnostics["outer_replicates"] =
        static_cast<double>(betas.size());
    out.fit.diagnostics["outer_invalid"] = static_cast<double>(invalid);
  }
  return out;
}

}  // namespace hetmed
