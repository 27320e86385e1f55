#include "hetmed/dataset.hpp"

#include <cmath>
#include <unordered_set>

#include "hetmed/errors.hpp"

namespace hetmed {

const char* to_string(FitMethod m) {
  switch (m) {
    case FitMethod::naive_ols: return "naive_ols";
    case FitMethod::attenuation: return "attenuation";
    case FitMethod::bces: return "bces";
    case FitMethod::bces_pairs_boot: return "bces_pairs_boot";
    case FitMethod::bces_wild_boot: return "bces_wild_boot";
    case FitMethod::simex: return "simex";
    case FitMethod::adjusted: return "adjusted";
    case FitMethod::polynomial: return "polynomial";
  }
  return "unknown";
}

const char* to_string(CiMode m) {
  return m == CiMode::paper_literal ? "paper" : "product";
}

bool IndividualDataset::treatment_is_binary() const {
  for (double t : treatment) {
    if (t != 0.0 && t != 1.0) return false;
  }
  return !treatment.empty();
}

std::vector<double> weights_from_sizes(std::span<const std::int64_t> sizes) {
  if (sizes.empty()) throw InputError("empty input");
  double total = 0.0;
  for (std::int64_t n : sizes) {
    if (n < 1) throw InputError("invalid record: n");
    total += static_cast<double>(n);
  }
  std::vector<double> w(sizes.size());
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    w[i] = static_cast<double>(sizes[i]) / total;
  }
  return w;
}

namespace {

void check_record(const SubgroupEffect& e, std::size_t expected_cov_dim) {
  auto bad = [&](const char* field) {
    throw InputError(std::string("invalid record: ") + field + " (group " +
                     e.group_id + ")");
  };
  if (!std::isfinite(e.gamma_hat)) bad("gamma_hat");
  if (!std::isfinite(e.tau_hat)) bad("tau_hat");
  if (!(e.se_gamma >= 0.0) || !std::isfinite(e.se_gamma)) bad("se_gamma");
  if (!(e.se_tau >= 0.0) || !std::isfinite(e.se_tau)) bad("se_tau");
  if (!std::isfinite(e.cov_uv)) bad("cov_uv");
  // Cauchy-Schwarz, with a whisker of slack for rounding in inputs.
  if (std::fabs(e.cov_uv) > e.se_gamma * e.se_tau * (1.0 + 1e-12)) {
    bad("cov_uv");
  }
  if (e.n < 1) bad("n");
  if (e.covariate_means.size() != expected_cov_dim) bad("covariate_means");
  for (double x : e.covariate_means) {
    if (!std::isfinite(x)) bad("covariate_means");
  }
}

}  // namespace

EffectDataset detail::assemble_dataset(std::vector<SubgroupEffect> raw,
                                       std::vector<double> weights) {
  if (raw.empty()) throw InputError("empty input");
  if (raw.size() < 3) throw InputError("insufficient subgroups");

  std::unordered_set<std::string> seen;
  std::size_t cov_dim = raw.front().covariate_means.size();
  for (const auto& e : raw) {
    if (!seen.insert(e.group_id).second) {
      throw InputError("duplicate group: " + e.group_id);
    }
    check_record(e, cov_dim);
  }

  EffectDataset ds;
  ds.covariate_dim_ = cov_dim;
  ds.gammas_.reserve(raw.size());
  for (const auto& e : raw) {
    ds.gammas_.push_back(e.gamma_hat);
    ds.se_gammas_.push_back(e.se_gamma);
    ds.taus_.push_back(e.tau_hat);
    ds.se_taus_.push_back(e.se_tau);
    ds.cov_uvs_.push_back(e.cov_uv);
    if (cov_dim > 0) ds.covariate_means_.push_back(e.covariate_means);
  }
  ds.effects_ = std::move(raw);
  ds.weights_ = std::move(weights);
  return ds;
}

EffectDataset validate_dataset(std::vector<SubgroupEffect> raw) {
  std::vector<std::int64_t> sizes;
  sizes.reserve(raw.size());
  for (const auto& e : raw) sizes.push_back(e.n);
  std::vector<double> w =
      raw.empty() ? std::vector<double>{} : weights_from_sizes(sizes);
  return detail::assemble_dataset(std::move(raw), std::move(w));
}

EffectDataset validate_dataset(std::vector<SubgroupEffect> raw,
                               std::vector<double> weights) {
  if (weights.size() != raw.size()) {
    throw InputError("weights length does not match record count");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("invalid weight");
    total += w;
  }
  if (total <= 0.0) throw InputError("weights sum to zero");
  for (double& w : weights) w /= total;
  return detail::assemble_dataset(std::move(raw), std::move(weights));
}

}  // namespace hetmed
