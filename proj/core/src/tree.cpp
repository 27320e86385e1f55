#include <algorithm>
#include <cmath>
#include <sstream>

#include "hetmed/errors.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/subgroups.hpp"

namespace hetmed {

namespace {

// Running per-arm sums for the sweep over candidate thresholds.
struct ArmAccum {
  std::int64_t n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  void add(double y) {
    ++n;
    sum += y;
    sumsq += y * y;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double var() const {
    // (n-1)-denominator variance from raw moments; adequate at the scales
    // the tree operates on.
    const double dn = static_cast<double>(n);
    return std::max(0.0, (sumsq - sum * sum / dn) / (dn - 1.0));
  }
};

struct GroupStats {
  ArmAccum treated;
  ArmAccum control;

  std::int64_t n() const { return treated.n + control.n; }
  bool estimable() const { return treated.n >= 2 && control.n >= 2; }
  double effect() const { return treated.mean() - control.mean(); }
  double variance() const {
    return treated.var() / static_cast<double>(treated.n) +
           control.var() / static_cast<double>(control.n);
  }
};

GroupStats minus(const GroupStats& total, const GroupStats& left) {
  GroupStats right;
  right.treated.n = total.treated.n - left.treated.n;
  right.treated.sum = total.treated.sum - left.treated.sum;
  right.treated.sumsq = total.treated.sumsq - left.treated.sumsq;
  right.control.n = total.control.n - left.control.n;
  right.control.sum = total.control.sum - left.control.sum;
  right.control.sumsq = total.control.sumsq - left.control.sumsq;
  return right;
}

struct Builder {
  const IndividualDataset& data;
  const TreeConfig& config;
  const std::vector<double>& y;  // target column (mediator or outcome)
  std::vector<TreeNode> nodes;
  int leaf_count = 0;

  GroupStats stats_of(const std::vector<std::size_t>& idx) const {
    GroupStats s;
    for (std::size_t i : idx) {
      (data.treatment[i] == 1.0 ? s.treated : s.control).add(y[i]);
    }
    return s;
  }

  struct BestSplit {
    bool found = false;
    int covariate = -1;
    double threshold = 0.0;
    double improvement = 0.0;
  };

  BestSplit find_split(const std::vector<std::size_t>& split_idx,
                       const std::vector<std::size_t>& est_idx,
                       const GroupStats& parent) const {
    BestSplit best;
    const double parent_score =
        static_cast<double>(parent.n()) * parent.effect() * parent.effect();

    std::int64_t est_total_t = 0;
    for (std::size_t i : est_idx) est_total_t += data.treatment[i] == 1.0;
    const std::int64_t est_total_c =
        static_cast<std::int64_t>(est_idx.size()) - est_total_t;

    const std::size_t p = data.covariates.size();
    std::vector<std::size_t> s_sorted(split_idx), e_sorted(est_idx);

    for (std::size_t j = 0; j < p; ++j) {
      const std::vector<double>& x = data.covariates[j];
      auto by_x = [&](std::size_t a, std::size_t b) { return x[a] < x[b]; };
      std::sort(s_sorted.begin(), s_sorted.end(), by_x);
      std::sort(e_sorted.begin(), e_sorted.end(), by_x);

      GroupStats left;
      std::int64_t est_left_t = 0, est_left_c = 0;
      std::size_t e_pos = 0;

      for (std::size_t i = 0; i + 1 < s_sorted.size(); ++i) {
        const std::size_t unit = s_sorted[i];
        (data.treatment[unit] == 1.0 ? left.treated : left.control).add(y[unit]);
        const double threshold = x[unit];
        if (x[s_sorted[i + 1]] == threshold) continue;  // not a boundary

        while (e_pos < e_sorted.size() && x[e_sorted[e_pos]] <= threshold) {
          (data.treatment[e_sorted[e_pos]] == 1.0 ? est_left_t : est_left_c) += 1;
          ++e_pos;
        }

        const GroupStats right = minus(parent, left);
        const std::int64_t min_leaf = config.min_leaf;
        if (left.n() < min_leaf || right.n() < min_leaf) continue;
        if (!left.estimable() || !right.estimable()) continue;

        const std::int64_t est_n = static_cast<std::int64_t>(e_sorted.size());
        const std::int64_t est_left_n = est_left_t + est_left_c;
        const std::int64_t est_right_t = est_total_t - est_left_t;
        const std::int64_t est_right_c = est_total_c - est_left_c;
        if (est_left_n < min_leaf || est_n - est_left_n < min_leaf) continue;
        if (est_left_t < 2 || est_left_c < 2) continue;
        if (est_right_t < 2 || est_right_c < 2) continue;

        const double nl = static_cast<double>(left.n());
        const double nr = static_cast<double>(right.n());
        const double gain = nl * left.effect() * left.effect() +
                            nr * right.effect() * right.effect() -
                            parent_score;
        const double penalty = config.split_penalty *
                               (nl * left.variance() + nr * right.variance());
        const double improvement = gain - penalty;
        if (improvement > best.improvement) {
          best.found = true;
          best.covariate = static_cast<int>(j);
          best.threshold = threshold;
          best.improvement = improvement;
        }
      }
    }
    return best;
  }

  int build(std::vector<std::size_t> split_idx, std::vector<std::size_t> est_idx,
            int depth) {
    const GroupStats split_stats = stats_of(split_idx);
    const int node_index = static_cast<int>(nodes.size());
    nodes.emplace_back();

    BestSplit best;
    if (depth < config.max_depth) {
      best = find_split(split_idx, est_idx, split_stats);
    }

    if (!best.found) {
      const GroupStats est_stats = stats_of(est_idx);
      TreeNode& leaf = nodes[node_index];
      leaf.leaf_id = leaf_count++;
      leaf.effect = est_stats.effect();
      leaf.se = std::sqrt(est_stats.variance());
      leaf.n_split = split_stats.n();
      leaf.n_est = est_stats.n();
      return node_index;
    }

    const std::vector<double>& x = data.covariates[best.covariate];
    auto goes_left = [&](std::size_t i) { return x[i] <= best.threshold; };
    std::vector<std::size_t> sl, sr, el, er;
    for (std::size_t i : split_idx) (goes_left(i) ? sl : sr).push_back(i);
    for (std::size_t i : est_idx) (goes_left(i) ? el : er).push_back(i);
    split_idx.clear();
    split_idx.shrink_to_fit();
    est_idx.clear();
    est_idx.shrink_to_fit();

    nodes[node_index].covariate = best.covariate;
    nodes[node_index].threshold = best.threshold;
    nodes[node_index].n_split = split_stats.n();
    const int left = build(std::move(sl), std::move(el), depth + 1);
    nodes[node_index].left = left;
    const int right = build(std::move(sr), std::move(er), depth + 1);
    nodes[node_index].right = right;
    return node_index;
  }
};

}  // namespace

CausalTree fit_causal_tree(const IndividualDataset& data, TreeTarget target,
                           const TreeConfig& config) {
  if (config.min_leaf < 10) throw InputError("min_leaf must be >= 10");
  if (config.max_depth < 0) throw InputError("max_depth must be >= 0");
  if (!(config.honest_fraction > 0.0 && config.honest_fraction < 1.0)) {
    throw InputError("honest_fraction must lie in (0,1)");
  }
  if (!data.treatment_is_binary()) throw InputError("binary treatment required");
  if (data.size() < 4 * static_cast<std::size_t>(config.min_leaf)) {
    throw InputError("insufficient data");
  }

  // Honest split, stratified by arm so both halves keep both arms.
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (data.treatment[i] == 1.0 ? treated : control).push_back(i);
  }
  Rng rng = Rng(config.seed).fork("tree-honest-split");
  rng.shuffle(std::span<std::size_t>(treated));
  rng.shuffle(std::span<std::size_t>(control));

  std::vector<std::size_t> split_idx, est_idx;
  auto deal = [&](const std::vector<std::size_t>& arm) {
    const std::size_t cut = static_cast<std::size_t>(
        std::floor(config.honest_fraction * static_cast<double>(arm.size())));
    split_idx.insert(split_idx.end(), arm.begin(), arm.begin() + cut);
    est_idx.insert(est_idx.end(), arm.begin() + cut, arm.end());
  };
  deal(treated);
  deal(control);
  // Deterministic traversal order regardless of the shuffle.
  std::sort(split_idx.begin(), split_idx.end());
  std::sort(est_idx.begin(), est_idx.end());

  // Every (half, arm) cell must support a difference in means with a
  // variance, even for a never-split root.
  auto arm_count = [&](const std::vector<std::size_t>& idx, double arm) {
    std::int64_t c = 0;
    for (std::size_t i : idx) c += data.treatment[i] == arm;
    return c;
  };
  if (arm_count(split_idx, 1.0) < 2 || arm_count(split_idx, 0.0) < 2 ||
      arm_count(est_idx, 1.0) < 2 || arm_count(est_idx, 0.0) < 2) {
    throw InputError("insufficient data");
  }

  Builder builder{data, config,
                  target == TreeTarget::mediator ? data.mediator : data.outcome,
                  {}, 0};
  builder.build(std::move(split_idx), std::move(est_idx), 0);

  CausalTree tree;
  tree.nodes_ = std::move(builder.nodes);
  tree.names_ = data.covariate_names;
  tree.target_ = target;
  tree.leaf_count_ = builder.leaf_count;
  return tree;
}

int CausalTree::leaf_for(std::span<const double> covariate_row) const {
  int at = 0;
  while (nodes_[at].covariate >= 0) {
    const TreeNode& n = nodes_[at];
    at = covariate_row[n.covariate] <= n.threshold ? n.left : n.right;
  }
  return nodes_[at].leaf_id;
}

namespace {

void serialize_node(const CausalTree& tree, int at, int indent,
                    std::ostringstream& out) {
  const TreeNode& n = tree.nodes()[at];
  for (int i = 0; i < indent; ++i) out << "  ";
  if (n.covariate < 0) {
    out << "leaf " << n.leaf_id << " effect=" << n.effect << " se=" << n.se
        << " n_split=" << n.n_split << " n_est=" << n.n_est << "\n";
    return;
  }
  out << "node " << tree.covariate_names()[n.covariate]
      << " <= " << n.threshold << "\n";
  serialize_node(tree, n.left, indent + 1, out);
  serialize_node(tree, n.right, indent + 1, out);
}

}  // namespace

std::string CausalTree::serialize() const {
  std::ostringstream out;
  out.precision(17);
  out << "causal_tree target="
      << (target_ == TreeTarget::mediator ? "mediator" : "outcome")
      << " leaves=" << leaf_count_ << "\n";
  serialize_node(*this, 0, 0, out);
  return out.str();
}

Partition partition_from_tree(const IndividualDataset& data,
                              const CausalTree& tree) {
  Partition part;
  for (int l = 0; l < tree.leaf_count(); ++l) {
    part.group_ids.push_back("leaf_" + std::to_string(l));
  }
  part.counts.assign(tree.leaf_count(), 0);
  part.assignment.resize(data.size());

  const std::size_t p = data.covariates.size();
  std::vector<double> row(p);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) row[j] = data.covariates[j][i];
    const int leaf = tree.leaf_for(row);
    part.assignment[i] = leaf;
    ++part.counts[leaf];
  }
  return part;
}

}  // namespace hetmed
