#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "hetmed/types.hpp"

namespace hetmed {

/// One clause of a group definition: an interval (lower, upper] on a named
/// covariate, or membership in an explicit value set when categories is
/// non-empty.
struct Condition {
  std::string covariate;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  std::vector<double> categories;

  bool matches(double x) const;
};

/// A group is the conjunction of its conditions. A rule set must partition
/// the covariate space: every unit matches exactly one group.
struct GroupingRule {
  std::string group_id;
  std::vector<Condition> conditions;
};

struct Partition {
  std::vector<std::string> group_ids;  // ordered
  std::vector<int> assignment;         // unit -> index into group_ids
  std::vector<std::int64_t> counts;    // per group; empty groups stay listed
};

/// Assigns every unit to exactly one rule. Overlapping or non-exhaustive
/// rules raise "invalid partition" naming an offending unit. An empty rule
/// set falls back to the dataset's group labels.
Partition group_by_rules(const IndividualDataset& data,
                         std::span<const GroupingRule> rules);

/// Partition taken verbatim from the dataset's group_label column, in
/// first-appearance order.
Partition partition_from_labels(const IndividualDataset& data);

struct TreeConfig {
  int min_leaf = 50;
  int max_depth = 4;
  double honest_fraction = 0.5;
  /// A split must improve the effect-variance criterion by more than this
  /// multiple of the children's summed estimation variance; keeps pure
  /// noise from being split (the spirit of the Athey-Imbens penalty
  /// without the full EMSE machinery).
  double split_penalty = 8.0;
  std::uint64_t seed = 0;
};

enum class TreeTarget { mediator, outcome };

struct TreeNode {
  int covariate = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  int leaf_id = -1;
  double effect = 0.0;  // honest leaf estimate from the estimation sample
  double se = 0.0;
  std::int64_t n_split = 0;
  std::int64_t n_est = 0;
};

class CausalTree {
 public:
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const std::vector<std::string>& covariate_names() const { return names_; }
  TreeTarget target() const { return target_; }
  int leaf_count() const { return leaf_count_; }

  /// Leaf id for one unit's covariate row (covariates[j] = value of
  /// covariate j).
  int leaf_for(std::span<const double> covariate_row) const;

  /// Plain-text nested serialization for audit.
  std::string serialize() const;

 private:
  friend CausalTree fit_causal_tree(const IndividualDataset&, TreeTarget,
                                    const TreeConfig&);
  std::vector<TreeNode> nodes_;
  std::vector<std::string> names_;
  TreeTarget target_ = TreeTarget::mediator;
  int leaf_count_ = 0;
};

/// Honest recursive partitioning of the treatment effect on the chosen
/// target. The sample is split (stratified by arm) into a splitting half
/// and an estimation half by honest_fraction; splits maximize the variance
/// of child difference-in-means effects subject to min_leaf and two units
/// per arm in BOTH halves; leaf effects are re-estimated on the estimation
/// half. Ties break toward the lower covariate index, then the smaller
/// threshold. Requires a binary treatment and n >= 4 * min_leaf.
CausalTree fit_causal_tree(const IndividualDataset& data, TreeTarget target,
                           const TreeConfig& config);

/// Leaf assignment of arbitrary units (e.g. a held-out fold) under a
/// fitted tree.
Partition partition_from_tree(const IndividualDataset& data,
                              const CausalTree& tree);

/// Per-group effects on mediator and outcome. Binary treatment: difference
/// in means with Neyman standard errors and the influence-function
/// covariance of the two estimates. Continuous treatment: per-group OLS
/// slopes of mediator and outcome on treatment with HC1 errors. A group
/// without enough units in both arms (or without treatment variation) is a
/// "degenerate group".
EffectDataset estimate_group_effects(const IndividualDataset& data,
                                     const Partition& partition);

/// Row subset of a dataset (cross-fitting folds).
IndividualDataset take_units(const IndividualDataset& data,
                             std::span<const std::size_t> indices);

}  // namespace hetmed
