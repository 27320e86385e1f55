#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "hetmed/errors.hpp"
#include "hetmed/rng.hpp"
#include "hetmed/subgroups.hpp"

using namespace hetmed;

namespace {

IndividualDataset two_covariate_data(int n, Rng rng) {
  IndividualDataset data;
  data.covariate_names = {"x1", "x2"};
  data.covariates.resize(2);
  for (int i = 0; i < n; ++i) {
    data.treatment.push_back(i % 2 == 0 ? 1.0 : 0.0);
    const double x1 = rng.uniform();
    const double x2 = rng.uniform();
    data.covariates[0].push_back(x1);
    data.covariates[1].push_back(x2);
    data.mediator.push_back(rng.normal());
    data.outcome.push_back(rng.normal());
  }
  return data;
}

GroupingRule interval_rule(const std::string& id, const std::string& cov,
                           double lo, double hi) {
  Condition c;
  c.covariate = cov;
  c.lower = lo;
  c.upper = hi;
  GroupingRule rule;
  rule.group_id = id;
  rule.conditions = {c};
  return rule;
}

}  // namespace

TEST_CASE("group_by_rules splits a dichotomy and counts sum to n") {
  const IndividualDataset data = two_covariate_data(101, Rng(1));
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<GroupingRule> rules = {interval_rule("low", "x1", -inf, 0.5),
                                     interval_rule("high", "x1", 0.5, inf)};
  const Partition part = group_by_rules(data, rules);
  CHECK(part.group_ids.size() == 2);
  CHECK(part.counts[0] + part.counts[1] == 101);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool low = data.covariates[0][i] <= 0.5;
    CHECK(part.assignment[i] == (low ? 0 : 1));
  }
}

TEST_CASE("group_by_rules rejects overlapping rules naming a unit") {
  const IndividualDataset data = two_covariate_data(50, Rng(2));
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<GroupingRule> rules = {interval_rule("a", "x1", -inf, 0.6),
                                     interval_rule("b", "x1", 0.4, inf)};
  CHECK_THROWS_AS(group_by_rules(data, rules), InputError);
  try {
    group_by_rules(data, rules);
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("invalid partition") == 0);
  }
}

TEST_CASE("group_by_rules rejects non-exhaustive rules") {
  const IndividualDataset data = two_covariate_data(50, Rng(3));
  std::vector<GroupingRule> rules = {interval_rule("a", "x1", -1.0, 0.2)};
  CHECK_THROWS_AS(group_by_rules(data, rules), InputError);
}

TEST_CASE("empty rules fall back to group labels verbatim") {
  IndividualDataset data = two_covariate_data(6, Rng(4));
  data.group_labels = {"b", "a", "b", "a", "c", "b"};
  const Partition part = group_by_rules(data, {});
  CHECK(part.group_ids == std::vector<std::string>{"b", "a", "c"});
  CHECK(part.counts == std::vector<std::int64_t>{3, 2, 1});
  CHECK(part.assignment == std::vector<int>{0, 1, 0, 1, 2, 0});
}

TEST_CASE("category conditions match exact values") {
  Condition c;
  c.covariate = "x1";
  c.categories = {1.0, 3.0};
  CHECK(c.matches(1.0));
  CHECK(c.matches(3.0));
  CHECK_FALSE(c.matches(2.0));
}

namespace {

// Three-group dataset whose first group is hand-checkable:
// T=(1,1,0,0), Y=(3,5,1,1) -> tau = 3, se_tau = sqrt(2/2 + 0/2) = 1.
IndividualDataset hand_example_groups() {
  IndividualDataset data;
  data.group_labels = {};
  auto push = [&](const std::string& g, double t, double m, double y) {
    data.group_labels.push_back(g);
    data.treatment.push_back(t);
    data.mediator.push_back(m);
    data.outcome.push_back(y);
  };
  push("a", 1, 2.0, 3);
  push("a", 1, 4.0, 5);
  push("a", 0, 1.0, 1);
  push("a", 0, 5.0, 1);
  for (int i = 0; i < 3; ++i) {
    push("b", 1, 1.0 + i, 2.0 + i);
    push("b", 0, 0.5 + i, 1.0 + i);
  }
  for (int i = 0; i < 3; ++i) {
    push("c", 1, 2.0 + i, 1.0 + i);
    push("c", 0, 1.0 + i, 0.5 + i);
  }
  return data;
}

}  // namespace

TEST_CASE("estimate_group_effects hand oracle for the difference in means") {
  const IndividualDataset data = hand_example_groups();
  const EffectDataset ds =
      estimate_group_effects(data, partition_from_labels(data));
  const SubgroupEffect& a = ds.effects()[0];
  CHECK(a.group_id == "a");
  CHECK(a.tau_hat == doctest::Approx(3.0));
  CHECK(a.se_tau == doctest::Approx(1.0));
  CHECK(a.n == 4);
  // weights come from sizes: 4, 6, 6
  CHECK(ds.weights()[0] == doctest::Approx(0.25));
}

TEST_CASE("mediator identical across arms gives zero effect and zero SE") {
  IndividualDataset data = hand_example_groups();
  for (double& m : data.mediator) m = 7.0;
  const EffectDataset ds =
      estimate_group_effects(data, partition_from_labels(data));
  for (const SubgroupEffect& e : ds.effects()) {
    CHECK(e.gamma_hat == doctest::Approx(0.0));
    CHECK(e.se_gamma == doctest::Approx(0.0));
  }
}

TEST_CASE("a group lacking an arm is degenerate") {
  IndividualDataset data = hand_example_groups();
  // strip all controls from group c
  IndividualDataset broken;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.group_labels[i] == "c" && data.treatment[i] == 0.0) continue;
    broken.treatment.push_back(data.treatment[i]);
    broken.mediator.push_back(data.mediator[i]);
    broken.outcome.push_back(data.outcome[i]);
    broken.group_labels.push_back(data.group_labels[i]);
  }
  CHECK_THROWS_WITH_AS(
      estimate_group_effects(broken, partition_from_labels(broken)),
      "degenerate group: c", InputError);
}

TEST_CASE("estimate_group_effects is invariant to unit order") {
  Rng rng(77);
  IndividualDataset data;
  for (int i = 0; i < 120; ++i) {
    data.treatment.push_back(i % 2 ? 1.0 : 0.0);
    data.mediator.push_back(rng.normal() + data.treatment[i]);
    data.outcome.push_back(rng.normal() + 2.0 * data.treatment[i]);
    data.group_labels.push_back("g" + std::to_string(i % 3));
  }
  const EffectDataset base =
      estimate_group_effects(data, partition_from_labels(data));

  std::vector<std::size_t> perm(data.size());
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  const IndividualDataset shuffled = take_units(data, perm);
  const EffectDataset again =
      estimate_group_effects(shuffled, partition_from_labels(shuffled));

  for (const SubgroupEffect& e : base.effects()) {
    bool found = false;
    for (const SubgroupEffect& f : again.effects()) {
      if (f.group_id != e.group_id) continue;
      found = true;
      CHECK(f.gamma_hat == doctest::Approx(e.gamma_hat).epsilon(1e-12));
      CHECK(f.tau_hat == doctest::Approx(e.tau_hat).epsilon(1e-12));
      CHECK(f.se_gamma == doctest::Approx(e.se_gamma).epsilon(1e-12));
      CHECK(f.cov_uv == doctest::Approx(e.cov_uv).epsilon(1e-12));
    }
    CHECK(found);
  }
}

TEST_CASE("continuous treatment uses per-group regression slopes") {
  Rng rng(13);
  IndividualDataset data;
  for (int g = 0; g < 3; ++g) {
    const double gamma = 1.0 + g;
    for (int i = 0; i < 200; ++i) {
      const double t = rng.normal();
      data.treatment.push_back(t);
      data.mediator.push_back(1.0 + gamma * t + 0.5 * rng.normal());
      data.outcome.push_back(2.0 + (1.0 + gamma) * t + 0.5 * rng.normal());
      data.group_labels.push_back("g" + std::to_string(g));
    }
  }
  const EffectDataset ds =
      estimate_group_effects(data, partition_from_labels(data));
  for (int g = 0; g < 3; ++g) {
    CHECK(ds.effects()[g].gamma_hat ==
          doctest::Approx(1.0 + g).epsilon(0.08));
    CHECK(ds.effects()[g].tau_hat ==
          doctest::Approx(2.0 + g).epsilon(0.08));
    CHECK(ds.effects()[g].se_gamma > 0.0);
    // The two slopes share residual noise only through the DGP, which is
    // independent here, so the influence covariance is near zero.
    CHECK(std::fabs(ds.effects()[g].cov_uv) <
          ds.effects()[g].se_gamma * ds.effects()[g].se_tau);
  }
}
