// Command-line front end: estimate (aggregate CSV), discover (unit-level
// CSV with causal-tree subgroup discovery), simulate (table2 | calibrate |
// power), version. All randomness flows from --seed; identical inputs and
// flags reproduce identical output bytes.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "hetmed/dataset.hpp"
#include "hetmed/errors.hpp"
#include "hetmed/estimators.hpp"
#include "hetmed/inference.hpp"
#include "hetmed/io.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/simulation.hpp"
#include "hetmed/subgroups.hpp"

#ifndef HETMED_VERSION
#define HETMED_VERSION "0.0.0"
#endif

namespace {

namespace fs = std::filesystem;
using namespace hetmed;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitInternal = 4;

struct GlobalOptions {
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::string ci_mode = "product";
  std::string estimator = "simex";
  std::string out_dir = ".";
  std::string weights_path;

  std::vector<double> simex_grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  int simex_b = 200;
  std::string simex_se = "extrapolation";
  int simex_outer = 100;
  int boot_b = 999;

  CiMode ci() const {
    if (ci_mode == "paper") return CiMode::paper_literal;
    if (ci_mode == "product") return CiMode::endpoint_product;
    throw InputError("unknown ci-mode: " + ci_mode);
  }
  SimexConfig simex(std::uint64_t derived_seed) const {
    SimexConfig cfg;
    cfg.zeta_grid = simex_grid;
    cfg.B = simex_b;
    if (simex_se == "extrapolation") {
      cfg.se_method = SimexSeMethod::variance_extrapolation;
    } else if (simex_se == "bootstrap") {
      cfg.se_method = SimexSeMethod::pairs_bootstrap;
    } else {
      cfg.se_method = SimexSeMethod::none;
    }
    cfg.outer_reps = simex_outer;
    cfg.seed = derived_seed;
    return cfg;
  }
};

void add_global_flags(CLI::App& app, GlobalOptions& opt) {
  app.add_option("--seed", opt.seed, "Master seed; all randomness derives from it");
  app.add_option("--alpha", opt.alpha, "Test level / CI coverage parameter")
      ->check(CLI::Range(1e-9, 0.5));
  app.add_option("--ci-mode", opt.ci_mode, "Conservative CI mode")
      ->check(CLI::IsMember({"paper", "product"}));
  app.add_option("--estimator", opt.estimator, "Beta estimator selection")
      ->check(CLI::IsMember({"naive", "bces", "simex", "all"}));
  app.add_option("--out", opt.out_dir, "Output directory");
  app.add_option("--weights", opt.weights_path,
                 "CSV overriding the population weights (group_id,weight)");
  app.add_option("--simex-grid", opt.simex_grid, "SIMEX zeta grid")->delimiter(',');
  app.add_option("--simex-b", opt.simex_b, "SIMEX replicates per grid point");
  app.add_option("--simex-se", opt.simex_se, "SIMEX standard error method")
      ->check(CLI::IsMember({"extrapolation", "bootstrap", "none"}));
  app.add_option("--simex-outer", opt.simex_outer,
                 "outer bootstrap replicates when --simex-se bootstrap");
  app.add_option("--boot-b", opt.boot_b, "Bootstrap replicates (BCES modes)");
}

struct FitBundle {
  std::vector<MediationResult> results;
  const SimexFit* simex = nullptr;  // points into storage below
  SimexFit simex_storage;
  bool has_simex = false;
};

// Paths are validated before any heavy compute starts.
void prepare_out_dir(const GlobalOptions& opt) {
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec || !fs::is_directory(opt.out_dir)) {
    throw InputError("unwritable path: " + opt.out_dir);
  }
}

FitBundle run_estimators(const EffectDataset& ds, const GlobalOptions& opt) {
  const Rng seeder(opt.seed);
  FitBundle bundle;
  const bool all = opt.estimator == "all";

  auto push = [&](const SlopeFit& fit) {
    bundle.results.push_back(mediate(ds, fit, opt.alpha, opt.ci()));
  };

  if (all || opt.estimator == "naive") {
    push(ols_slope(ds.gammas(), ds.taus()));
  }
  if (all || opt.estimator == "bces") {
    push(bces_estimate(ds));
    push(bces_bootstrap(ds, BootstrapMode::pairs, opt.boot_b,
                        seeder.fork("cli-bces-pairs").next_u64()));
    push(bces_bootstrap(ds, BootstrapMode::wild_restricted, opt.boot_b,
                        seeder.fork("cli-bces-wild").next_u64()));
  }
  if (all || opt.estimator == "simex") {
    bundle.simex_storage =
        simex_estimate(ds, opt.simex(seeder.fork("cli-simex").next_u64()));
    bundle.has_simex = true;
    bundle.simex = &bundle.simex_storage;
    push(bundle.simex_storage.fit);
  }
  if (ds.covariate_dim() > 0) {
    const AdjustMethod m = (opt.estimator == "naive" || opt.estimator == "bces")
                               ? AdjustMethod::naive
                               : AdjustMethod::simex;
    SimexConfig cfg = opt.simex(seeder.fork("cli-adjusted").next_u64());
    push(adjusted_fit(ds, m, cfg));
  }
  return bundle;
}

void write_results(const EffectDataset& ds, const FitBundle& bundle,
                   RunInfo info, const GlobalOptions& opt) {
  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);

  const std::string json =
      emit_result(bundle.results, info, ResultFormat::json);
  const std::string table =
      emit_result(bundle.results, info, ResultFormat::table);
  write_text_file(dir / "result.json", json);
  write_text_file(dir / "result.txt", table);
  std::cout << table;

  for (const MediationResult& r : bundle.results) {
    if (r.beta_fit.method == FitMethod::simex && bundle.has_simex) {
      emit_plot_data(ds, *bundle.simex, dir);
    } else {
      emit_plot_data(ds, r.beta_fit, dir);
    }
  }
  std::cout << "# wrote " << (dir / "result.json").string() << "\n";
}

EffectDataset load_aggregate(const std::string& input,
                             const GlobalOptions& opt) {
  EffectDataset ds = parse_aggregate_csv(input);
  if (!opt.weights_path.empty()) {
    std::vector<double> w = parse_weights_csv(opt.weights_path, ds);
    ds = validate_dataset(ds.effects(), std::move(w));
  }
  return ds;
}

RunInfo make_info(const GlobalOptions& opt, const std::string& subcommand,
                  const std::string& input) {
  RunInfo info;
  info.version = HETMED_VERSION;
  info.subcommand = subcommand;
  info.input = input;
  info.seed = opt.seed;
  info.alpha = opt.alpha;
  info.ci_mode = opt.ci();
  info.estimator = opt.estimator;
  info.extra["simex_b"] = std::to_string(opt.simex_b);
  info.extra["simex_se"] = opt.simex_se;
  info.extra["simex_outer"] = std::to_string(opt.simex_outer);
  info.extra["boot_b"] = std::to_string(opt.boot_b);
  std::string grid;
  for (double z : opt.simex_grid) {
    if (!grid.empty()) grid += ",";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", z);
    grid += buf;
  }
  info.extra["simex_grid"] = grid;
  return info;
}

int cmd_estimate(const std::string& input, const GlobalOptions& opt) {
  prepare_out_dir(opt);
  const EffectDataset ds = load_aggregate(input, opt);
  const FitBundle bundle = run_estimators(ds, opt);
  write_results(ds, bundle, make_info(opt, "estimate", input), opt);
  return kExitOk;
}

struct DiscoverOptions {
  std::string target = "mediator";
  int min_leaf = 50;
  int max_depth = 4;
  double honest_fraction = 0.5;
  double split_penalty = 8.0;
  bool no_crossfit = false;
};

int cmd_discover(const std::string& input, const GlobalOptions& opt,
                 const DiscoverOptions& dopt) {
  prepare_out_dir(opt);
  const IndividualDataset data = parse_individual_csv(input);
  if (!data.treatment_is_binary()) {
    throw InputError("binary treatment required");
  }

  TreeConfig cfg;
  cfg.min_leaf = dopt.min_leaf;
  cfg.max_depth = dopt.max_depth;
  cfg.honest_fraction = dopt.honest_fraction;
  cfg.split_penalty = dopt.split_penalty;
  cfg.seed = Rng(opt.seed).fork("cli-tree").next_u64();
  const TreeTarget target = dopt.target == "outcome" ? TreeTarget::outcome
                                                     : TreeTarget::mediator;

  // Default: grow the tree on two thirds of the sample and estimate the
  // group effects on the held-out third (cross-fitting); --no-crossfit
  // uses the full sample for both.
  IndividualDataset tree_fold;
  IndividualDataset effect_fold;
  if (dopt.no_crossfit) {
    tree_fold = data;
    effect_fold = data;
  } else {
    std::vector<std::size_t> treated, control;
    for (std::size_t i = 0; i < data.size(); ++i) {
      (data.treatment[i] == 1.0 ? treated : control).push_back(i);
    }
    Rng shuffler = Rng(opt.seed).fork("cli-crossfit");
    shuffler.shuffle(std::span<std::size_t>(treated));
    shuffler.shuffle(std::span<std::size_t>(control));
    std::vector<std::size_t> tree_idx, effect_idx;
    auto deal = [&](const std::vector<std::size_t>& arm) {
      const std::size_t cut = arm.size() * 2 / 3;
      tree_idx.insert(tree_idx.end(), arm.begin(), arm.begin() + cut);
      effect_idx.insert(effect_idx.end(), arm.begin() + cut, arm.end());
    };
    deal(treated);
    deal(control);
    std::sort(tree_idx.begin(), tree_idx.end());
    std::sort(effect_idx.begin(), effect_idx.end());
    tree_fold = take_units(data, tree_idx);
    effect_fold = take_units(data, effect_idx);
  }

  const CausalTree tree = fit_causal_tree(tree_fold, target, cfg);
  if (tree.leaf_count() < 3) {
    throw InputError(
        "insufficient subgroups: the tree found " +
        std::to_string(tree.leaf_count()) +
        " leaves and the mediation fit needs at least 3 (consider a lower "
        "--min-leaf or a larger --max-depth)");
  }
  const Partition part = partition_from_tree(effect_fold, tree);
  const EffectDataset ds = estimate_group_effects(effect_fold, part);

  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  write_text_file(dir / "tree.txt", tree.serialize());
  write_text_file(dir / "effects.csv", serialize_effects_csv(ds));

  const FitBundle bundle = run_estimators(ds, opt);
  RunInfo info = make_info(opt, "discover", input);
  info.extra["tree_leaves"] = std::to_string(tree.leaf_count());
  info.extra["crossfit"] = dopt.no_crossfit ? "off" : "on";
  write_results(ds, bundle, info, opt);
  return kExitOk;
}

int cmd_simulate_table2(const GlobalOptions& opt, std::vector<double> kappas,
                        int reps, int n_per_group) {
  prepare_out_dir(opt);
  ConfoundedDgpConfig base;
  base.n_per_group = n_per_group;
  const auto rows =
      run_table2(kappas, reps, base, opt.alpha, opt.ci(), opt.seed);
  const std::string csv = serialize_table2_csv(rows);
  write_text_file(fs::path(opt.out_dir) / "table2.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_simulate_calibrate(const GlobalOptions& opt, double beta,
                           std::vector<int> k_list, int reps,
                           std::vector<std::string> estimator_names) {
  std::vector<CalibrationEstimator> estimators;
  for (const std::string& name : estimator_names) {
    if (name == "bces") {
      estimators.push_back(CalibrationEstimator::bces);
    } else if (name == "bces_pairs") {
      estimators.push_back(CalibrationEstimator::bces_pairs);
    } else if (name == "bces_wild") {
      estimators.push_back(CalibrationEstimator::bces_wild);
    } else if (name == "simex") {
      estimators.push_back(CalibrationEstimator::simex);
    } else {
      throw InputError("unknown estimator: " + name);
    }
  }
  prepare_out_dir(opt);
  const auto cells =
      run_calibration(beta, k_list, reps, estimators, opt.alpha, opt.seed);
  const std::string csv = serialize_calibration_csv(cells);
  write_text_file(fs::path(opt.out_dir) / "calibration.csv", csv);
  std::cout << csv;
  return kExitOk;
}

int cmd_simulate_power(const GlobalOptions& opt, int base_groups, int n,
                       int k_max, int k_step, int reps, double beta) {
  prepare_out_dir(opt);
  const auto points =
      power_curve(base_groups, n, k_max, k_step, reps, beta, opt.alpha, opt.seed);
  const std::string csv = serialize_power_csv(points);
  write_text_file(fs::path(opt.out_dir) / "power.csv", csv);
  std::cout << csv;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOptions opt;
  CLI::App app{"Causal mediation effects from heterogeneous treatment effects"};
  app.require_subcommand(1);
  app.fallthrough();
  add_global_flags(app, opt);

  std::string input;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Estimate ACME from an aggregate-effects CSV");
  estimate->add_option("input", input, "aggregate CSV path")->required();

  DiscoverOptions dopt;
  CLI::App* discover = app.add_subcommand(
      "discover", "Discover subgroups with a causal tree, then estimate ACME");
  discover->add_option("input", input, "unit-level CSV path")->required();
  discover->add_option("--target", dopt.target, "tree target variable")
      ->check(CLI::IsMember({"mediator", "outcome"}));
  discover->add_option("--min-leaf", dopt.min_leaf, "minimum units per leaf");
  discover->add_option("--max-depth", dopt.max_depth, "maximum tree depth");
  discover->add_option("--honest-fraction", dopt.honest_fraction,
                       "fraction of the tree fold used for split search");
  discover->add_option("--split-penalty", dopt.split_penalty,
                       "estimation-variance multiple a split must beat");
  discover->add_flag("--no-crossfit", dopt.no_crossfit,
                     "estimate effects on the full sample instead of a "
                     "held-out third");

  CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo studies");
  simulate->require_subcommand(1);

  std::vector<double> kappas = {0, 1, 2, 3, 4};
  int reps_t2 = 200;
  int n_per_group = 500;
  CLI::App* table2 = simulate->add_subcommand(
      "table2", "Confounded DGP: grouped SIMEX pipeline vs traditional");
  table2->add_option("--kappas", kappas, "confounder magnitudes")->delimiter(',');
  table2->add_option("--reps", reps_t2, "replications per kappa");
  table2->add_option("--n-per-group", n_per_group, "units per group");

  double beta_cal = 0.0;
  std::vector<int> k_list = {5, 10, 30, 50, 100};
  int reps_cal = 500;
  std::vector<std::string> est_names = {"bces", "bces_pairs", "bces_wild",
                                        "simex"};
  CLI::App* calibrate = simulate->add_subcommand(
      "calibrate", "Rejection rates over the aggregate DGP");
  calibrate->add_option("--beta", beta_cal, "true beta (0 = size)");
  calibrate->add_option("--K", k_list, "group counts")->delimiter(',');
  calibrate->add_option("--reps", reps_cal, "replications per cell");
  calibrate->add_option("--estimators", est_names, "estimator columns")
      ->delimiter(',');

  int base_groups = 10, n_units = 100, k_max = 10, k_step = 1, reps_pow = 500;
  double beta_pow = 2.0;
  CLI::App* power = simulate->add_subcommand(
      "power", "Add-groups vs grow-groups power comparison");
  power->add_option("--base-groups", base_groups, "starting group count");
  power->add_option("--n", n_units, "units per starting group");
  power->add_option("--k-max", k_max, "largest budget step");
  power->add_option("--k-step", k_step, "budget grid step");
  power->add_option("--reps", reps_pow, "replications per point");
  power->add_option("--beta", beta_pow, "true beta");

  CLI::App* version = app.add_subcommand("version", "Print version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << "hetmed: input error: " << e.get_name() << "\n";
    return kExitInput;
  }

  try {
    if (version->parsed()) {
      std::cout << "hetmed " << HETMED_VERSION << "\n";
      return kExitOk;
    }
    if (estimate->parsed()) return cmd_estimate(input, opt);
    if (discover->parsed()) return cmd_discover(input, opt, dopt);
    if (simulate->parsed()) {
      if (table2->parsed()) {
        return cmd_simulate_table2(opt, kappas, reps_t2, n_per_group);
      }
      if (calibrate->parsed()) {
        return cmd_simulate_calibrate(opt, beta_cal, k_list, reps_cal,
                                      est_names);
      }
      if (power->parsed()) {
        return cmd_simulate_power(opt, base_groups, n_units, k_max, k_step,
                                  reps_pow, beta_pow);
      }
    }
    std::cerr << "hetmed: input error: no subcommand\n";
    return kExitInput;
  } catch (const InputError& e) {
    std::cerr << "hetmed: input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericError& e) {
    std::cerr << "hetmed: numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "hetmed: internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
