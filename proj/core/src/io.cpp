#include "hetmed/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "hetmed/dataset.hpp"
#include "hetmed/errors.hpp"

namespace hetmed {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view cell, std::size_t row,
                    const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw InputError("parse error at row " + std::to_string(row) +
                     ", column " + column);
  }
  return value;
}

std::int64_t parse_integer(std::string_view cell, std::size_t row,
                           const std::string& column) {
  std::int64_t value = 0;
  auto [ptr, ec] =
      std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
    throw InputError("parse error at row " + std::to_string(row) +
                     ", column " + column);
  }
  return value;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Shortest decimal that round-trips the double.
std::string shortest(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

EffectDataset parse_aggregate_csv_text(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError("no data rows");

  const auto header = split_fields(lines[0]);
  static const char* required[] = {"group_id", "gamma_hat", "se_gamma",
                                   "tau_hat",  "se_tau",    "n"};
  std::map<std::string, int> col;
  std::vector<std::string> covariate_cols;
  for (std::size_t j = 0; j < header.size(); ++j) {
    col[std::string(header[j])] = static_cast<int>(j);
  }
  for (const char* name : required) {
    if (!col.count(name)) {
      throw InputError(std::string("missing column ") + name);
    }
  }
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(header[j]);
    const bool known =
        std::find_if(std::begin(required), std::end(required),
                     [&](const char* r) { return name == r; }) !=
            std::end(required) ||
        name == "cov_uv";
    if (known) continue;
    if (name.rfind("x_mean_", 0) == 0) {
      covariate_cols.push_back(name);
    } else {
      throw InputError("unknown column " + name);
    }
  }

  if (lines.size() < 2) throw InputError("no data rows");
  std::vector<SubgroupEffect> effects;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != header.size()) {
      throw InputError("parse error at row " + std::to_string(r) +
                       ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    SubgroupEffect e;
    e.group_id = std::string(fields[col["group_id"]]);
    e.gamma_hat = parse_number(fields[col["gamma_hat"]], r, "gamma_hat");
    e.se_gamma = parse_number(fields[col["se_gamma"]], r, "se_gamma");
    e.tau_hat = parse_number(fields[col["tau_hat"]], r, "tau_hat");
    e.se_tau = parse_number(fields[col["se_tau"]], r, "se_tau");
    e.n = parse_integer(fields[col["n"]], r, "n");
    if (col.count("cov_uv")) {
      e.cov_uv = parse_number(fields[col["cov_uv"]], r, "cov_uv");
    }
    for (const std::string& name : covariate_cols) {
      e.covariate_means.push_back(parse_number(fields[col[name]], r, name));
    }
    effects.push_back(std::move(e));
  }
  return validate_dataset(std::move(effects));
}

EffectDataset parse_aggregate_csv(const std::filesystem::path& path) {
  return parse_aggregate_csv_text(read_file(path));
}

IndividualDataset parse_individual_csv_text(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError("no data rows");

  const auto header = split_fields(lines[0]);
  int col_t = -1, col_m = -1, col_y = -1, col_g = -1;
  std::vector<std::pair<std::string, int>> covariates;
  for (std::size_t j = 0; j < header.size(); ++j) {
    const std::string name(header[j]);
    if (name == "treatment") {
      col_t = static_cast<int>(j);
    } else if (name == "mediator") {
      col_m = static_cast<int>(j);
    } else if (name == "outcome") {
      col_y = static_cast<int>(j);
    } else if (name == "group") {
      col_g = static_cast<int>(j);
    } else {
      covariates.emplace_back(name, static_cast<int>(j));
    }
  }
  if (col_t < 0) throw InputError("missing column treatment");
  if (col_m < 0) throw InputError("missing column mediator");
  if (col_y < 0) throw InputError("missing column outcome");
  if (lines.size() < 2) throw InputError("no data rows");

  IndividualDataset data;
  for (const auto& [name, j] : covariates) data.covariate_names.push_back(name);
  data.covariates.resize(covariates.size());

  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != header.size()) {
      throw InputError("parse error at row " + std::to_string(r) +
                       ": expected " + std::to_string(header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    data.treatment.push_back(parse_number(fields[col_t], r, "treatment"));
    data.mediator.push_back(parse_number(fields[col_m], r, "mediator"));
    data.outcome.push_back(parse_number(fields[col_y], r, "outcome"));
    if (col_g >= 0) data.group_labels.push_back(std::string(fields[col_g]));
    for (std::size_t c = 0; c < covariates.size(); ++c) {
      data.covariates[c].push_back(
          parse_number(fields[covariates[c].second], r, covariates[c].first));
    }
  }
  return data;
}

IndividualDataset parse_individual_csv(const std::filesystem::path& path) {
  return parse_individual_csv_text(read_file(path));
}

std::vector<double> parse_weights_csv_text(std::string_view text,
                                           const EffectDataset& dataset) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw InputError("no data rows");
  const auto header = split_fields(lines[0]);
  if (header.size() != 2 || header[0] != "group_id" || header[1] != "weight") {
    throw InputError("weights file must have header group_id,weight");
  }
  std::map<std::string, double> by_group;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto fields = split_fields(lines[r]);
    if (fields.size() != 2) {
      throw InputError("parse error at row " + std::to_string(r));
    }
    const std::string id(fields[0]);
    if (!by_group.emplace(id, parse_number(fields[1], r, "weight")).second) {
      throw InputError("duplicate group: " + id);
    }
  }
  std::vector<double> weights;
  for (const SubgroupEffect& e : dataset.effects()) {
    auto it = by_group.find(e.group_id);
    if (it == by_group.end()) {
      throw InputError("weights file misses group: " + e.group_id);
    }
    weights.push_back(it->second);
  }
  if (by_group.size() != dataset.size()) {
    throw InputError("weights file names unknown groups");
  }
  return weights;
}

std::vector<double> parse_weights_csv(const std::filesystem::path& path,
                                      const EffectDataset& dataset) {
  return parse_weights_csv_text(read_file(path), dataset);
}

std::string serialize_effects_csv(const EffectDataset& dataset) {
  std::ostringstream out;
  const std::size_t p = dataset.covariate_dim();
  out << "group_id,gamma_hat,se_gamma,tau_hat,se_tau,n,cov_uv";
  for (std::size_t j = 0; j < p; ++j) out << ",x_mean_x" << (j + 1);
  out << "\n";
  for (const SubgroupEffect& e : dataset.effects()) {
    out << e.group_id << ',' << shortest(e.gamma_hat) << ','
        << shortest(e.se_gamma) << ',' << shortest(e.tau_hat) << ','
        << shortest(e.se_tau) << ',' << e.n << ',' << shortest(e.cov_uv);
    for (double x : e.covariate_means) out << ',' << shortest(x);
    out << "\n";
  }
  return out.str();
}

namespace {

using ordered_json = nlohmann::ordered_json;

// Six significant digits, as documented for emitted results.
double round6(double v) {
  if (!std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return std::strtod(buf, nullptr);
}

ordered_json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return round6(v);
}

ordered_json result_json(const MediationResult& r) {
  ordered_json j;
  j["method"] = to_string(r.beta_fit.method);
  j["beta_hat"] = num(r.beta_fit.beta_hat);
  j["se_beta"] = num(r.beta_fit.se_beta);
  j["intercept"] = num(r.beta_fit.intercept_hat);
  j["acme"] = num(r.acme_hat);
  j["p_beta"] = num(r.p_beta);
  j["p_gamma"] = num(r.p_gamma);
  j["p_overall"] = num(r.p_overall);
  j["reject"] = r.reject;
  j["ci_lower"] = num(r.ci_lower);
  j["ci_upper"] = num(r.ci_upper);
  if (!r.beta_fit.extra_coefs.empty()) {
    ordered_json extras;
    for (const auto& [name, value] : r.beta_fit.extra_coefs) {
      extras[name] = num(value);
    }
    j["extra_coefs"] = extras;
  }
  if (!r.beta_fit.diagnostics.empty()) {
    ordered_json diag;
    for (const auto& [name, value] : r.beta_fit.diagnostics) {
      diag[name] = num(value);
    }
    j["diagnostics"] = diag;
  }
  return j;
}

std::string table_row(const MediationResult& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%-16s %11.6g %11.6g %11.6g %9.4g %9.4g %9.4g %11.6g %11.6g\n",
                to_string(r.beta_fit.method), r.beta_fit.beta_hat,
                r.beta_fit.se_beta, r.acme_hat, r.p_beta, r.p_gamma,
                r.p_overall, r.ci_lower, r.ci_upper);
  return buf;
}

}  // namespace

std::string emit_result(std::span<const MediationResult> results,
                        const RunInfo& info, ResultFormat format) {
  if (results.empty()) throw InputError("no results to emit");

  if (format == ResultFormat::json) {
    ordered_json j;
    j["tool"] = info.tool;
    j["version"] = info.version;
    j["subcommand"] = info.subcommand;
    j["input"] = info.input;
    j["seed"] = info.seed;
    j["alpha"] = num(info.alpha);
    j["ci_mode"] = to_string(info.ci_mode);
    j["estimator"] = info.estimator;
    if (!info.extra.empty()) {
      ordered_json cfg;
      for (const auto& [k, v] : info.extra) cfg[k] = v;
      j["config"] = cfg;
    }
    const MediationResult& first = results.front();
    j["groups"] = first.gamma_agg.K;
    j["gamma0"] = {{"estimate", num(first.gamma_agg.gamma0_hat)},
                   {"variance", num(first.gamma_agg.var_gamma0)}};
    j["heterogeneity"] = {{"Q", num(first.heterogeneity.Q)},
                          {"df", first.heterogeneity.df},
                          {"p_Q", num(first.heterogeneity.p_Q)},
                          {"I2", num(first.heterogeneity.I2)}};
    ordered_json arr = ordered_json::array();
    for (const MediationResult& r : results) arr.push_back(result_json(r));
    j["results"] = arr;
    return j.dump(2) + "\n";
  }

  std::ostringstream out;
  const MediationResult& first = results.front();
  out << "# " << info.tool << " " << info.version << "  " << info.subcommand
      << "  seed=" << info.seed << "  alpha=" << round6(info.alpha)
      << "  ci_mode=" << to_string(info.ci_mode) << "\n";
  char head[256];
  std::snprintf(head, sizeof(head),
                "%-16s %11s %11s %11s %9s %9s %9s %11s %11s\n", "method",
                "beta", "se_beta", "acme", "p_beta", "p_gamma", "p_overall",
                "ci_lower", "ci_upper");
  out << head;
  for (const MediationResult& r : results) out << table_row(r);
  char het[160];
  std::snprintf(het, sizeof(het),
                "# gamma0=%.6g  Q=%.6g (df=%d, p=%.4g)  I2=%.4g\n",
                first.gamma_agg.gamma0_hat, first.heterogeneity.Q,
                first.heterogeneity.df, first.heterogeneity.p_Q,
                first.heterogeneity.I2);
  out << het;
  return out.str();
}

void write_text_file(const std::filesystem::path& path,
                     std::string_view content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("unwritable path: " + path.string());
  out << content;
  if (!out) throw InputError("unwritable path: " + path.string());
}

namespace {

std::filesystem::path write_scatter(const EffectDataset& dataset,
                                    const std::filesystem::path& dir) {
  std::ostringstream out;
  out << "group_id,gamma_hat,tau_hat,se_gamma,se_tau\n";
  for (const SubgroupEffect& e : dataset.effects()) {
    out << e.group_id << ',' << shortest(e.gamma_hat) << ','
        << shortest(e.tau_hat) << ',' << shortest(e.se_gamma) << ','
        << shortest(e.se_tau) << "\n";
  }
  const std::filesystem::path path = dir / "scatter.csv";
  write_text_file(path, out.str());
  return path;
}

std::filesystem::path write_fit_line(const EffectDataset& dataset,
                                     const SlopeFit& fit,
                                     const std::filesystem::path& dir) {
  const auto [lo, hi] =
      std::minmax_element(dataset.gammas().begin(), dataset.gammas().end());
  std::ostringstream out;
  out << "gamma,tau\n";
  out << shortest(*lo) << ','
      << shortest(fit.intercept_hat + fit.beta_hat * *lo) << "\n";
  out << shortest(*hi) << ','
      << shortest(fit.intercept_hat + fit.beta_hat * *hi) << "\n";
  const std::filesystem::path path =
      dir / ("fit_line_" + std::string(to_string(fit.method)) + ".csv");
  write_text_file(path, out.str());
  return path;
}

}  // namespace

std::vector<std::filesystem::path> emit_plot_data(
    const EffectDataset& dataset, const SlopeFit& fit,
    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  return {write_scatter(dataset, out_dir),
          write_fit_line(dataset, fit, out_dir)};
}

std::vector<std::filesystem::path> emit_plot_data(
    const EffectDataset& dataset, const SimexFit& fit,
    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> files = {
      write_scatter(dataset, out_dir), write_fit_line(dataset, fit.fit, out_dir)};

  std::ostringstream out;
  out << "zeta,g,extrapolated\n";
  for (const SimexPoint& p : fit.curve) {
    out << shortest(p.zeta) << ',' << shortest(p.slope) << ",0\n";
  }
  out << "-1," << shortest(fit.fit.beta_hat) << ",1\n";
  const std::filesystem::path path = out_dir / "simex_curve.csv";
  write_text_file(path, out.str());
  files.push_back(path);
  return files;
}

std::string serialize_table2_csv(std::span<const Table2Row> rows) {
  std::ostringstream out;
  out << "kappa,reps,hte_acme,hte_ci_lower,hte_ci_upper,hte_cover_rate,"
         "trad_acme,trad_ci_lower,trad_ci_upper,trad_cover_rate\n";
  for (const Table2Row& r : rows) {
    out << shortest(r.kappa) << ',' << r.reps << ',' << shortest(r.hte_acme)
        << ',' << shortest(r.hte_ci_lower) << ',' << shortest(r.hte_ci_upper)
        << ',' << shortest(r.hte_cover_rate) << ',' << shortest(r.trad_acme)
        << ',' << shortest(r.trad_ci_lower) << ',' << shortest(r.trad_ci_upper)
        << ',' << shortest(r.trad_cover_rate) << "\n";
  }
  return out.str();
}

std::string serialize_calibration_csv(std::span<const CalibrationCell> cells) {
  std::ostringstream out;
  out << "K,estimator,reps,failures,rejection_rate\n";
  for (const CalibrationCell& c : cells) {
    out << c.K << ',' << to_string(c.estimator) << ',' << c.reps << ','
        << c.failures << ',' << shortest(c.rejection_rate) << "\n";
  }
  return out.str();
}

std::string serialize_power_csv(std::span<const PowerPoint> points) {
  std::ostringstream out;
  out << "k,power_add_groups,power_grow_groups\n";
  for (const PowerPoint& p : points) {
    out << p.k << ',' << shortest(p.power_add_groups) << ','
        << shortest(p.power_grow_groups) << "\n";
  }
  return out.str();
}

}  // namespace hetmed
