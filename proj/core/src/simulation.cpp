#include "hetmed/simulation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "hetmed/dataset.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/inference.hpp"
#include "hetmed/parallel.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/subgroups.hpp"

namespace hetmed {

const char* to_string(CalibrationEstimator e) {
  switch (e) {
    case CalibrationEstimator::bces: return "bces";
    case CalibrationEstimator::bces_pairs: return "bces_pairs";
    case CalibrationEstimator::bces_wild: return "bces_wild";
    case CalibrationEstimator::simex: return "simex";
  }
  return "unknown";
}

ConfoundedDraw dgp_confounded(const ConfoundedDgpConfig& config) {
  if (config.gamma_set.empty()) throw InputError("empty gamma_set");
  if (config.n_per_group < 1) throw InputError("n_per_group must be >= 1");

  const std::size_t G = config.gamma_set.size();
  const std::size_t n = G * static_cast<std::size_t>(config.n_per_group);

  ConfoundedDraw draw;
  draw.data.treatment.reserve(n);
  draw.data.mediator.reserve(n);
  draw.data.outcome.reserve(n);
  draw.data.group_labels.reserve(n);

  const Rng base = Rng(config.seed).fork("dgp-confounded");
  double gamma_mean = 0.0;
  for (std::size_t g = 0; g < G; ++g) {
    const double gamma_g = config.gamma_set[g];
    gamma_mean += gamma_g;
    const std::string label = "g" + std::to_string(g + 1);
    Rng rng = base.fork_idx(g);
    for (int i = 0; i < config.n_per_group; ++i) {
      const double t = rng.normal();
      const double u = rng.normal();
      const double eps_m = rng.normal();
      const double eps_y = rng.normal();
      const double m = 1.0 + gamma_g * t + config.kappa * u + eps_m;
      const double y = 1.0 + t + m + config.kappa * u + eps_y;
      draw.data.treatment.push_back(t);
      draw.data.mediator.push_back(m);
      draw.data.outcome.push_back(y);
      draw.data.group_labels.push_back(label);
    }
  }
  draw.true_acme = gamma_mean / static_cast<double>(G);
  return draw;
}

AggregateDraw dgp_aggregate(const AggregateDgpConfig& config) {
  if (config.K < 3) throw InputError("K must be >= 3");

  const Rng base = Rng(config.seed).fork("dgp-aggregate");
  LatentEffects latent;
  latent.beta = config.beta;
  std::vector<SubgroupEffect> effects;
  effects.reserve(static_cast<std::size_t>(config.K));

  for (int k = 0; k < config.K; ++k) {
    Rng rng = base.fork_idx(static_cast<std::uint64_t>(k));
    const double gamma = config.gamma_mean + config.gamma_sd * rng.normal();
    const double eps = rng.normal();
    const double delta = config.delta_mean + eps;
    const double tau = delta + config.beta * gamma;

    double se_u = config.fixed_se_gamma ? *config.fixed_se_gamma
                                        : rng.gamma(config.se_shape, config.se_rate);
    double se_v = config.fixed_se_tau ? *config.fixed_se_tau
                                      : rng.gamma(config.se_shape, config.se_rate);

    latent.gamma.push_back(gamma);
    latent.delta.push_back(delta);
    latent.tau.push_back(tau);

    SubgroupEffect e;
    e.group_id = "k" + std::to_string(k + 1);
    e.gamma_hat = gamma + se_u * (se_u > 0.0 ? rng.normal() : 0.0);
    e.tau_hat = tau + se_v * (se_v > 0.0 ? rng.normal() : 0.0);
    e.se_gamma = se_u;
    e.se_tau = se_v;
    e.n = 1;  // equal population weights
    effects.push_back(e);
  }

  AggregateDraw draw{validate_dataset(std::move(effects)), std::move(latent)};
  return draw;
}

namespace {

struct PooledFits {
  double gamma_tilde = 0.0;  // slope of M on T
  double beta_tilde = 0.0;   // coefficient of M in Y ~ T + M
};

PooledFits pooled_fits(const IndividualDataset& data,
                       std::span<const std::size_t> idx) {
  const std::size_t n = idx.size();
  double t_mean = 0.0, m_mean = 0.0;
  for (std::size_t i : idx) {
    t_mean += data.treatment[i];
    m_mean += data.mediator[i];
  }
  t_mean /= static_cast<double>(n);
  m_mean /= static_cast<double>(n);

  double stt = 0.0, stm = 0.0;
  for (std::size_t i : idx) {
    const double dt = data.treatment[i] - t_mean;
    stt += dt * dt;
    stm += dt * data.mediator[i];
  }
  if (stt <= 0.0) throw NumericError("degenerate regression");

  PooledFits out;
  out.gamma_tilde = stm / stt;

  // Y on (1, T, M) by the normal equations.
  Eigen::Matrix3d xtx = Eigen::Matrix3d::Zero();
  Eigen::Vector3d xty = Eigen::Vector3d::Zero();
  for (std::size_t i : idx) {
    const Eigen::Vector3d row(1.0, data.treatment[i], data.mediator[i]);
    xtx += row * row.transpose();
    xty += row * data.outcome[i];
  }
  const Eigen::Vector3d coef = xtx.ldlt().solve(xty);
  if (!coef.allFinite()) throw NumericError("degenerate regression");
  out.beta_tilde = coef(2);
  return out;
}

}  // namespace

TraditionalAcme traditional_acme(const IndividualDataset& data, int B,
                                 double alpha, std::uint64_t seed) {
  if (B < 199) throw InputError("bootstrap replicates must be >= 199");
  const std::size_t n = data.size();
  if (n < 4) throw InputError("insufficient data");

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const PooledFits point = pooled_fits(data, all);

  TraditionalAcme out;
  out.gamma_tilde = point.gamma_tilde;
  out.beta_tilde = point.beta_tilde;
  out.estimate = point.gamma_tilde * point.beta_tilde;

  const Rng base = Rng(seed).fork("traditional-boot");
  std::vector<double> acmes;
  acmes.reserve(static_cast<std::size_t>(B));
  std::vector<std::size_t> pick(n);
  for (int b = 0; b < B; ++b) {
    Rng rng = base.fork_idx(static_cast<std::uint64_t>(b));
    for (std::size_t i = 0; i < n; ++i) {
      pick[i] = static_cast<std::size_t>(rng.below(n));
    }
    try {
      const PooledFits fit = pooled_fits(data, pick);
      acmes.push_back(fit.gamma_tilde * fit.beta_tilde);
    } catch (const NumericError&) {
      // degenerate resample; skip
    }
  }
  if (acmes.size() * 2 < static_cast<std::size_t>(B)) {
    throw NumericError("bootstrap unstable");
  }
  std::sort(acmes.begin(), acmes.end());
  auto pctl = [&](double q) {
    const double idx = q * static_cast<double>(acmes.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(idx);
    const std::size_t hi = std::min(lo + 1, acmes.size() - 1);
    const double frac = idx - static_cast<double>(lo);
    return acmes[lo] * (1.0 - frac) + acmes[hi] * frac;
  };
  out.ci_lower = pctl(alpha / 2.0);
  out.ci_upper = pctl(1.0 - alpha / 2.0);
  return out;
}

Table2Sample table2_once(const ConfoundedDgpConfig& config, double alpha,
                         CiMode mode, std::uint64_t seed) {
  ConfoundedDgpConfig cfg = config;
  cfg.seed = seed;
  const ConfoundedDraw draw = dgp_confounded(cfg);

  const Partition part = partition_from_labels(draw.data);
  const EffectDataset effects = estimate_group_effects(draw.data, part);

  SimexConfig simex_cfg;
  simex_cfg.seed = Rng(seed).fork("table2-simex").next_u64();
  const SimexFit simex = simex_estimate(effects, simex_cfg);
  const MediationResult med = mediate(effects, simex.fit, alpha, mode);

  const TraditionalAcme trad = traditional_acme(
      draw.data, 499, alpha, Rng(seed).fork("table2-trad").next_u64());

  Table2Sample s;
  s.hte_acme = med.acme_hat;
  s.hte_ci_lower = med.ci_lower;
  s.hte_ci_upper = med.ci_upper;
  s.trad_acme = trad.estimate;
  s.trad_ci_lower = trad.ci_lower;
  s.trad_ci_upper = trad.ci_upper;
  return s;
}

std::vector<Table2Row> run_table2(std::span<const double> kappas, int reps,
                                  const ConfoundedDgpConfig& base, double alpha,
                                  CiMode mode, std::uint64_t seed) {
  if (reps < 1) throw InputError("reps must be >= 1");
  double truth = 0.0;
  for (double g : base.gamma_set) truth += g;
  truth /= static_cast<double>(base.gamma_set.size());

  std::vector<Table2Row> rows;
  const Rng seeder(seed);
  for (double kappa : kappas) {
    ConfoundedDgpConfig cfg = base;
    cfg.kappa = kappa;

    std::vector<Table2Sample> samples(static_cast<std::size_t>(reps));
    parallel_for_index(static_cast<std::size_t>(reps), [&](std::size_t r) {
      const std::uint64_t rep_seed =
          seeder.fork("table2", static_cast<std::uint64_t>(kappa * 1000.0), r)
              .next_u64();
      samples[r] = table2_once(cfg, alpha, mode, rep_seed);
    });

    Table2Row row;
    row.kappa = kappa;
    row.reps = reps;
    KahanSum ha, hl, hu, ta, tl, tu;
    int hcover = 0, tcover = 0;
    for (const Table2Sample& s : samples) {
      ha.add(s.hte_acme);
      hl.add(s.hte_ci_lower);
      hu.add(s.hte_ci_upper);
      ta.add(s.trad_acme);
      tl.add(s.trad_ci_lower);
      tu.add(s.trad_ci_upper);
      hcover += s.hte_ci_lower <= truth && truth <= s.hte_ci_upper;
      tcover += s.trad_ci_lower <= truth && truth <= s.trad_ci_upper;
    }
    const double dr = static_cast<double>(reps);
    row.hte_acme = ha.value() / dr;
    row.hte_ci_lower = hl.value() / dr;
    row.hte_ci_upper = hu.value() / dr;
    row.hte_cover_rate = hcover / dr;
    row.trad_acme = ta.value() / dr;
    row.trad_ci_lower = tl.value() / dr;
    row.trad_ci_upper = tu.value() / dr;
    row.trad_cover_rate = tcover / dr;
    rows.push_back(row);
  }
  return rows;
}

namespace {

constexpr int kCalibrationBootstrapB = 499;

// p_overall <= alpha for one estimator on one draw; throws NumericError
// when the estimator refuses the data.
bool calibration_reject(const EffectDataset& ds, CalibrationEstimator est,
                        double alpha, std::uint64_t seed) {
  SlopeFit fit;
  switch (est) {
    case CalibrationEstimator::bces:
      fit = bces_estimate(ds);
      break;
    case CalibrationEstimator::bces_pairs:
      fit = bces_bootstrap(ds, BootstrapMode::pairs, kCalibrationBootstrapB,
                           seed);
      break;
    case CalibrationEstimator::bces_wild:
      fit = bces_bootstrap(ds, BootstrapMode::wild_restricted,
                           kCalibrationBootstrapB, seed);
      break;
    case CalibrationEstimator::simex: {
      SimexConfig cfg;
      cfg.seed = seed;
      fit = simex_estimate(ds, cfg).fit;
      break;
    }
  }
  const IuTest t = iu_test(fit, aggregate_gamma(ds), alpha);
  return t.reject;
}

}  // namespace

std::vector<CalibrationCell> run_calibration(
    double beta, std::span<const int> K_list, int reps,
    std::span<const CalibrationEstimator> estimators, double alpha,
    std::uint64_t seed) {
  if (reps < 200) throw InputError("reps must be >= 200");
  if (estimators.empty()) throw InputError("no estimators selected");

  std::vector<CalibrationCell> cells;
  const Rng seeder(seed);

  for (int K : K_list) {
    const std::size_t E = estimators.size();
    // outcome per (rep, estimator): 1 reject, 0 accept, -1 failed
    std::vector<int> outcome(static_cast<std::size_t>(reps) * E, 0);

    parallel_for_index(static_cast<std::size_t>(reps), [&](std::size_t r) {
      AggregateDgpConfig cfg;
      cfg.K = K;
      cfg.beta = beta;
      cfg.seed = seeder.fork("calib-dgp", static_cast<std::uint64_t>(K), r)
                     .next_u64();
      const AggregateDraw draw = dgp_aggregate(cfg);
      for (std::size_t e = 0; e < E; ++e) {
        const std::uint64_t est_seed =
            seeder.fork("calib-est", static_cast<std::uint64_t>(K), r, e)
                .next_u64();
        try {
          outcome[r * E + e] =
              calibration_reject(draw.dataset, estimators[e], alpha, est_seed)
                  ? 1
                  : 0;
        } catch (const NumericError&) {
          outcome[r * E + e] = -1;
        }
      }
    });

    for (std::size_t e = 0; e < E; ++e) {
      CalibrationCell cell;
      cell.K = K;
      cell.estimator = estimators[e];
      cell.reps = reps;
      int rejected = 0;
      for (int r = 0; r < reps; ++r) {
        const int o = outcome[static_cast<std::size_t>(r) * E + e];
        if (o < 0) {
          ++cell.failures;
        } else {
          rejected += o;
        }
      }
      const int ok = reps - cell.failures;
      cell.rejection_rate =
          ok > 0 ? static_cast<double>(rejected) / static_cast<double>(ok) : 0.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

double grow_arm_se_multiplier(int k, int base_groups) {
  if (k < 0 || base_groups < 1) throw InputError("invalid power arm");
  return 1.0 / std::sqrt(1.0 + static_cast<double>(k) /
                                   static_cast<double>(base_groups));
}

std::vector<PowerPoint> power_curve(int base_groups, int n, int k_max,
                                    int k_step, int reps, double beta,
                                    double alpha, std::uint64_t seed) {
  if (base_groups < 3) throw InputError("base_groups must be >= 3");
  if (n < 1) throw InputError("n must be >= 1");
  if (k_max < 1) throw InputError("k_max must be >= 1");
  if (k_step < 1) throw InputError("k_step must be >= 1");
  if (reps < 1) throw InputError("reps must be >= 1");

  std::vector<int> grid;
  for (int k = 0; k <= k_max; k += k_step) grid.push_back(k);
  if (grid.back() != k_max) grid.push_back(k_max);

  const std::size_t pool = static_cast<std::size_t>(base_groups + k_max);
  const Rng seeder(seed);

  // rejections[rep][point][arm]
  std::vector<std::uint8_t> rejections(static_cast<std::size_t>(reps) *
                                       grid.size() * 2);

  parallel_for_index(static_cast<std::size_t>(reps), [&](std::size_t r) {
    // One latent pool per replication; every k re-uses its draws (common
    // random numbers), so the two arms are compared on identical worlds.
    Rng rng = seeder.fork("power-pool", r);
    std::vector<double> gamma(pool), tau(pool), se_u(pool), se_v(pool),
        z_u(pool), z_v(pool);
    for (std::size_t i = 0; i < pool; ++i) {
      gamma[i] = 2.0 + rng.normal();
      tau[i] = 4.0 + rng.normal() + beta * gamma[i];
      se_u[i] = rng.gamma(1.0, 1.0);
      se_v[i] = rng.gamma(1.0, 1.0);
      z_u[i] = rng.normal();
      z_v[i] = rng.normal();
    }

    auto build = [&](std::size_t K, double se_scale) {
      std::vector<SubgroupEffect> effects(K);
      for (std::size_t i = 0; i < K; ++i) {
        SubgroupEffect& e = effects[i];
        e.group_id = "k" + std::to_string(i + 1);
        e.se_gamma = se_scale * se_u[i];
        e.se_tau = se_scale * se_v[i];
        e.gamma_hat = gamma[i] + e.se_gamma * z_u[i];
        e.tau_hat = tau[i] + e.se_tau * z_v[i];
        e.n = n;
      }
      return validate_dataset(std::move(effects));
    };

    const std::uint64_t simex_seed = seeder.fork("power-simex", r).next_u64();
    auto rejects = [&](const EffectDataset& ds) {
      SimexConfig cfg;
      cfg.seed = simex_seed;
      const SimexFit fit = simex_estimate(ds, cfg);
      return iu_test(fit.fit, aggregate_gamma(ds), alpha).reject;
    };

    for (std::size_t p = 0; p < grid.size(); ++p) {
      const int k = grid[p];
      const bool add = rejects(
          build(static_cast<std::size_t>(base_groups + k), 1.0));
      const bool grow = rejects(build(static_cast<std::size_t>(base_groups),
                                      grow_arm_se_multiplier(k, base_groups)));
      rejections[(r * grid.size() + p) * 2] = add;
      rejections[(r * grid.size() + p) * 2 + 1] = grow;
    }
  });

  std::vector<PowerPoint> points;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    PowerPoint pt;
    pt.k = grid[p];
    int add = 0, grow = 0;
    for (int r = 0; r < reps; ++r) {
      add += rejections[(static_cast<std::size_t>(r) * grid.size() + p) * 2];
      grow += rejections[(static_cast<std::size_t>(r) * grid.size() + p) * 2 + 1];
    }
    pt.power_add_groups = static_cast<double>(add) / static_cast<double>(reps);
    pt.power_grow_groups = static_cast<double>(grow) / static_cast<double>(reps);
    points.push_back(pt);
  }
  return points;
}

}  // namespace hetmed
