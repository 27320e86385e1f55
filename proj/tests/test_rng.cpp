#include <doctest.h>

#include <cmath>
#include <vector>

#include "hetmed/rng.hpp"

using namespace hetmed;

TEST_CASE("identical seeds reproduce identical streams") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("forks are independent of parent consumption") {
  Rng parent(7);
  Rng child1 = parent.fork("stream", 3);
  parent.next_u64();
  parent.next_u64();
  Rng child2 = parent.fork("stream", 3);
  for (int i = 0; i < 10; ++i) CHECK(child1.next_u64() == child2.next_u64());
}

TEST_CASE("distinct labels and indices give distinct streams") {
  Rng parent(7);
  CHECK(parent.fork("a").next_u64() != parent.fork("b").next_u64());
  CHECK(parent.fork("a", 0).next_u64() != parent.fork("a", 1).next_u64());
  CHECK(parent.fork_idx(1, 2, 3).next_u64() !=
        parent.fork_idx(1, 3, 2).next_u64());
}

TEST_CASE("uniform stays strictly inside (0,1)") {
  Rng rng(99);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Rng rng(2024);
  const int n = 200000;
  double sum = 0.0, sumsq = 0.0, sumcube = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sumsq += z * z;
    sumcube += z * z * z;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(std::fabs(sumcube / n) < 0.03);
}

TEST_CASE("gamma(1,1) is exponential; gamma(3,2) has the right moments") {
  Rng rng(5);
  const int n = 200000;
  double s1 = 0.0, s1sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.gamma(1.0, 1.0);
    CHECK(g > 0.0);
    s1 += g;
    s1sq += g * g;
  }
  CHECK(s1 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(s1sq / n == doctest::Approx(2.0).epsilon(0.04));

  double s2 = 0.0;
  for (int i = 0; i < n; ++i) s2 += rng.gamma(3.0, 2.0);
  CHECK(s2 / n == doctest::Approx(1.5).epsilon(0.02));

  double s3 = 0.0;
  for (int i = 0; i < n; ++i) s3 += rng.gamma(0.5, 1.0);
  CHECK(s3 / n == doctest::Approx(0.5).epsilon(0.03));
}

TEST_CASE("rademacher is balanced") {
  Rng rng(11);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) sum += rng.rademacher();
  CHECK(std::fabs(sum) < 1500.0);
}

TEST_CASE("below covers the range without bias") {
  Rng rng(13);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.below(7)];
  for (int c : counts) CHECK(std::fabs(c - 10000) < 500);
}
