#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include "twf/rng.hpp"

using twf::Rng;

TEST(Rng, SameSeedSameStream) {
  Rng a = Rng::stream(42, "arrivals");
  Rng b = Rng::stream(42, "arrivals");
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, LabelsGiveDifferentStreams) {
  Rng a = Rng::stream(42, "arrivals");
  Rng b = Rng::stream(42, "services");
  int equal = 0;
  for (int i = 0; i < 100; ++i) equal += a.next_u64() == b.next_u64();
  EXPECT_EQ(equal, 0);
}

TEST(Rng, UniformRanges) {
  Rng r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double v = r.uniform_pos();
    ASSERT_GT(v, 0.0);
    ASSERT_LE(v, 1.0);
  }
}

TEST(Rng, BelowIsUniform) {
  Rng r(3);
  std::vector<int> counts(7, 0);
  const int draws = 700000;
  for (int i = 0; i < draws; ++i) ++counts[r.below(7)];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - draws / 7.0) * (c - draws / 7.0) / (draws / 7.0);
  EXPECT_LT(chi2, 22.46);  // 6 dof, p = 0.001
  EXPECT_THROW(r.below(0), std::invalid_argument);
}

TEST(Rng, PoissonMomentsBothRegimes) {
  for (double lambda : {0.5, 4.0, 29.0, 30.0, 120.0}) {
    Rng r(11);
    const int draws = 200000;
    double sum = 0, sq = 0;
    for (int i = 0; i < draws; ++i) {
      const double k = static_cast<double>(r.poisson(lambda));
      sum += k;
      sq += k * k;
    }
    const double mean = sum / draws;
    const double var = sq / draws - mean * mean;
    EXPECT_NEAR(mean, lambda, 5 * std::sqrt(lambda / draws)) << lambda;
    EXPECT_NEAR(var / lambda, 1.0, 0.03) << lambda;
  }
}

TEST(Rng, PoissonZeroAndInvalid) {
  Rng r(5);
  EXPECT_EQ(r.poisson(0.0), 0);
  EXPECT_THROW(r.poisson(-1.0), std::invalid_argument);
}

TEST(Rng, GeometricPmf) {
  Rng r(9);
  const double mu = 0.3;
  const int draws = 500000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < draws; ++i) {
    const auto k = r.geometric(mu);
    ASSERT_GE(k, 0);
    if (k < 4) ++counts[static_cast<std::size_t>(k)];
  }
  for (int k = 0; k < 4; ++k) {
    const double expected = (1 - mu) * std::pow(mu, k);
    EXPECT_NEAR(counts[static_cast<std::size_t>(k)] / static_cast<double>(draws), expected, 0.003) << k;
  }
  EXPECT_THROW(r.geometric(0.0), std::invalid_argument);
  EXPECT_THROW(r.geometric(1.0), std::invalid_argument);
}

TEST(Rng, SampleWithoutReplacement) {
  Rng r(4);
  std::vector<std::size_t> scratch, out;
  for (int rep = 0; rep < 1000; ++rep) {
    r.sample_without_replacement(20, 5, scratch, out);
    ASSERT_EQ(out.size(), 5U);
    std::set<std::size_t> s(out.begin(), out.end());
    ASSERT_EQ(s.size(), 5U);
    for (auto v : out) ASSERT_LT(v, 20U);
  }
  // Full sample consumes nothing.
  Rng a(8), b(8);
  a.sample_without_replacement(10, 10, scratch, out);
  EXPECT_EQ(a.next_u64(), b.next_u64());
  EXPECT_THROW(r.sample_without_replacement(3, 4, scratch, out), std::invalid_argument);
}

TEST(Rng, SampleMarginalsUniform) {
  Rng r(6);
  std::vector<std::size_t> scratch, out;
  std::vector<int> hits(10, 0);
  const int reps = 100000;
  for (int rep = 0; rep < reps; ++rep) {
    r.sample_without_replacement(10, 3, scratch, out);
    for (auto v : out) ++hits[v];
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(reps), 0.3, 0.006);
}

TEST(Rng, ShufflePermutes) {
  Rng r(2);
  std::vector<int> v{0, 1, 2, 3, 4, 5};
  r.shuffle(std::span<int>(v));
  std::set<int> s(v.begin(), v.end());
  EXPECT_EQ(s.size(), 6U);
}
