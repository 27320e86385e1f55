#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hetmed/simulation.hpp"
#include "hetmed/types.hpp"

namespace hetmed {

/// Aggregate-level CSV: header with required columns
/// group_id,gamma_hat,se_gamma,tau_hat,se_tau,n plus optional cov_uv and
/// x_mean_* covariate-mean columns. Strict comma-separated text, no
/// quoting; row order is preserved.
EffectDataset parse_aggregate_csv(const std::filesystem::path& path);
EffectDataset parse_aggregate_csv_text(std::string_view text);

/// Unit-level CSV: header with treatment,mediator,outcome, an optional
/// group column, and any number of numeric covariate columns (names are
/// captured in order).
IndividualDataset parse_individual_csv(const std::filesystem::path& path);
IndividualDataset parse_individual_csv_text(std::string_view text);

/// Weight override file: header group_id,weight; every group of the
/// dataset must appear exactly once. Returns weights in dataset order
/// (unnormalized; validate_dataset normalizes).
std::vector<double> parse_weights_csv(const std::filesystem::path& path,
                                      const EffectDataset& dataset);
std::vector<double> parse_weights_csv_text(std::string_view text,
                                           const EffectDataset& dataset);

/// Dataset back to the aggregate CSV schema with shortest round-trip
/// number formatting, so parse(serialize(ds)) reproduces ds bit-exactly.
std::string serialize_effects_csv(const EffectDataset& dataset);

/// Reproducibility context echoed into every result emission.
struct RunInfo {
  std::string tool = "hetmed";
  std::string version;
  std::string subcommand;
  std::string input;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  CiMode ci_mode = CiMode::endpoint_product;
  std::string estimator;
  std::map<std::string, std::string> extra;  // config echoes
};

enum class ResultFormat { json, table };

/// Serializes one or more mediation results (one per estimator) with
/// stable key order and reals rendered at six significant digits. The
/// JSON form is strict JSON; the table form is one row per estimator.
std::string emit_result(std::span<const MediationResult> results,
                        const RunInfo& info, ResultFormat format);

/// Plot-data files for the subgroup scatter, the fitted line, and (for
/// SIMEX) the extrapolation curve:
///   scatter.csv          gamma_hat, tau_hat, se_gamma, se_tau per group
///   fit_line_<m>.csv     two points of the fitted line for method m
///   simex_curve.csv      the (zeta, g(zeta)) grid plus the zeta = -1
///                        extrapolation row (SIMEX fits only)
/// Returns the list of files written.
std::vector<std::filesystem::path> emit_plot_data(
    const EffectDataset& dataset, const SlopeFit& fit,
    const std::filesystem::path& out_dir);
std::vector<std::filesystem::path> emit_plot_data(
    const EffectDataset& dataset, const SimexFit& fit,
    const std::filesystem::path& out_dir);

/// Simulation tables as delimited text.
std::string serialize_table2_csv(std::span<const Table2Row> rows);
std::string serialize_calibration_csv(std::span<const CalibrationCell> cells);
std::string serialize_power_csv(std::span<const PowerPoint> points);

void write_text_file(const std::filesystem::path& path,
                     std::string_view content);

}  // namespace hetmed
