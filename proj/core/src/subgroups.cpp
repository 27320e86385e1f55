#include "hetmed/subgroups.hpp"

#include <cmath>
#include <unordered_map>

#include "hetmed/dataset.hpp"
#include "hetmed/errors.hpp"

namespace hetmed {

bool Condition::matches(double x) const {
  if (!categories.empty()) {
    for (double c : categories) {
      if (x == c) return true;
    }
    return false;
  }
  return x > lower && x <= upper;
}

namespace {

int covariate_index(const IndividualDataset& data, const std::string& name) {
  for (std::size_t j = 0; j < data.covariate_names.size(); ++j) {
    if (data.covariate_names[j] == name) return static_cast<int>(j);
  }
  throw InputError("unknown covariate: " + name);
}

}  // namespace

Partition partition_from_labels(const IndividualDataset& data) {
  if (!data.has_labels()) throw InputError("dataset carries no group labels");
  Partition part;
  part.assignment.resize(data.size());
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& label = data.group_labels[i];
    auto [it, inserted] =
        index.emplace(label, static_cast<int>(part.group_ids.size()));
    if (inserted) {
      part.group_ids.push_back(label);
      part.counts.push_back(0);
    }
    part.assignment[i] = it->second;
    ++part.counts[it->second];
  }
  return part;
}

Partition group_by_rules(const IndividualDataset& data,
                         std::span<const GroupingRule> rules) {
  if (rules.empty()) return partition_from_labels(data);

  // Resolve names once.
  std::vector<std::vector<std::pair<int, const Condition*>>> resolved(
      rules.size());
  for (std::size_t r = 0; r < rules.size(); ++r) {
    for (const Condition& c : rules[r].conditions) {
      resolved[r].emplace_back(covariate_index(data, c.covariate), &c);
    }
  }

  Partition part;
  for (const auto& rule : rules) part.group_ids.push_back(rule.group_id);
  part.counts.assign(rules.size(), 0);
  part.assignment.resize(data.size());

  for (std::size_t i = 0; i < data.size(); ++i) {
    int match = -1;
    for (std::size_t r = 0; r < rules.size(); ++r) {
      bool ok = true;
      for (const auto& [j, cond] : resolved[r]) {
        ok &= cond->matches(data.covariates[j][i]);
      }
      if (!ok) continue;
      if (match >= 0) {
        throw InputError("invalid partition: unit " + std::to_string(i) +
                         " matches groups '" + part.group_ids[match] +
                         "' and '" + rules[r].group_id + "'");
      }
      match = static_cast<int>(r);
    }
    if (match < 0) {
      throw InputError("invalid partition: unit " + std::to_string(i) +
                       " matches no group");
    }
    part.assignment[i] = match;
    ++part.counts[match];
  }
  return part;
}

namespace {

struct ArmStats {
  std::int64_t n = 0;
  double mean = 0.0;
  double var = 0.0;      // sample variance (n-1)
  double cov_my = 0.0;   // sample covariance of (M, Y), (n-1)
  double mean_y = 0.0;
  double var_y = 0.0;
};

ArmStats arm_stats(const IndividualDataset& data,
                   const std::vector<std::size_t>& idx) {
  ArmStats s;
  s.n = static_cast<std::int64_t>(idx.size());
  if (s.n == 0) return s;
  for (std::size_t i : idx) {
    s.mean += data.mediator[i];
    s.mean_y += data.outcome[i];
  }
  s.mean /= static_cast<double>(s.n);
  s.mean_y /= static_cast<double>(s.n);
  if (s.n < 2) return s;
  for (std::size_t i : idx) {
    const double dm = data.mediator[i] - s.mean;
    const double dy = data.outcome[i] - s.mean_y;
    s.var += dm * dm;
    s.var_y += dy * dy;
    s.cov_my += dm * dy;
  }
  const double denom = static_cast<double>(s.n - 1);
  s.var /= denom;
  s.var_y /= denom;
  s.cov_my /= denom;
  return s;
}

SubgroupEffect binary_group_effect(const IndividualDataset& data,
                                   const std::string& id,
                                   const std::vector<std::size_t>& members) {
  std::vector<std::size_t> treated, control;
  for (std::size_t i : members) {
    (data.treatment[i] == 1.0 ? treated : control).push_back(i);
  }
  if (treated.size() < 2 || control.size() < 2) {
    throw InputError("degenerate group: " + id);
  }
  const ArmStats t = arm_stats(data, treated);
  const ArmStats c = arm_stats(data, control);
  const double nt = static_cast<double>(t.n);
  const double nc = static_cast<double>(c.n);

  SubgroupEffect e;
  e.group_id = id;
  e.n = static_cast<std::int64_t>(members.size());
  e.gamma_hat = t.mean - c.mean;
  e.tau_hat = t.mean_y - c.mean_y;
  e.se_gamma = std::sqrt(t.var / nt + c.var / nc);
  e.se_tau = std::sqrt(t.var_y / nt + c.var_y / nc);
  // Same influence decomposition as the Neyman variances.
  e.cov_uv = t.cov_my / nt + c.cov_my / nc;
  return e;
}

SubgroupEffect continuous_group_effect(const IndividualDataset& data,
                                       const std::string& id,
                                       const std::vector<std::size_t>& members) {
  const std::size_t n = members.size();
  if (n < 4) throw InputError("degenerate group: " + id);

  double tbar = 0.0;
  for (std::size_t i : members) tbar += data.treatment[i];
  tbar /= static_cast<double>(n);

  double sxx = 0.0, sxm = 0.0, sxy = 0.0, mbar = 0.0, ybar = 0.0;
  for (std::size_t i : members) {
    const double dt = data.treatment[i] - tbar;
    sxx += dt * dt;
    sxm += dt * data.mediator[i];
    sxy += dt * data.outcome[i];
    mbar += data.mediator[i];
    ybar += data.outcome[i];
  }
  mbar /= static_cast<double>(n);
  ybar /= static_cast<double>(n);
  if (sxx <= 0.0) throw InputError("degenerate group: " + id);

  SubgroupEffect e;
  e.group_id = id;
  e.n = static_cast<std::int64_t>(n);
  e.gamma_hat = sxm / sxx;
  e.tau_hat = sxy / sxx;
  const double am = mbar - e.gamma_hat * tbar;
  const double ay = ybar - e.tau_hat * tbar;

  // HC1 sandwich for both slopes and their influence covariance.
  double meat_m = 0.0, meat_y = 0.0, meat_my = 0.0;
  for (std::size_t i : members) {
    const double dt = data.treatment[i] - tbar;
    const double em = data.mediator[i] - am - e.gamma_hat * data.treatment[i];
    const double ey = data.outcome[i] - ay - e.tau_hat * data.treatment[i];
    meat_m += dt * dt * em * em;
    meat_y += dt * dt * ey * ey;
    meat_my += dt * dt * em * ey;
  }
  const double dn = static_cast<double>(n);
  const double adjust = dn / (dn - 2.0);
  e.se_gamma = std::sqrt(adjust * meat_m / (sxx * sxx));
  e.se_tau = std::sqrt(adjust * meat_y / (sxx * sxx));
  e.cov_uv = adjust * meat_my / (sxx * sxx);
  return e;
}

}  // namespace

EffectDataset estimate_group_effects(const IndividualDataset& data,
                                     const Partition& partition) {
  if (partition.assignment.size() != data.size()) {
    throw InputError("partition does not cover the dataset");
  }
  const std::size_t G = partition.group_ids.size();
  std::vector<std::vector<std::size_t>> members(G);
  for (std::size_t i = 0; i < data.size(); ++i) {
    members[partition.assignment[i]].push_back(i);
  }

  const bool binary = data.treatment_is_binary();
  std::vector<SubgroupEffect> effects;
  effects.reserve(G);
  for (std::size_t g = 0; g < G; ++g) {
    if (members[g].empty()) {
      throw InputError("degenerate group: " + partition.group_ids[g]);
    }
    effects.push_back(binary ? binary_group_effect(data, partition.group_ids[g],
                                                   members[g])
                             : continuous_group_effect(
                                   data, partition.group_ids[g], members[g]));
  }
  return validate_dataset(std::move(effects));
}

IndividualDataset take_units(const IndividualDataset& data,
                             std::span<const std::size_t> indices) {
  IndividualDataset out;
  out.covariate_names = data.covariate_names;
  out.covariates.resize(data.covariates.size());
  for (std::size_t i : indices) {
    out.treatment.push_back(data.treatment[i]);
    out.mediator.push_back(data.mediator[i]);
    out.outcome.push_back(data.outcome[i]);
    if (data.has_labels()) out.group_labels.push_back(data.group_labels[i]);
    for (std::size_t j = 0; j < data.covariates.size(); ++j) {
      out.covariates[j].push_back(data.covariates[j][i]);
    }
  }
  return out;
}

}  // namespace hetmed
