#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "twf/rng.hpp"
#include "twf/water_level.hpp"

using namespace twf;

namespace {

std::vector<QueueLength> random_q(Rng& rng, std::size_t max_n, QueueLength max_q) {
  std::vector<QueueLength> q(1 + rng.index(max_n));
  for (auto& v : q) v = static_cast<QueueLength>(rng.below(static_cast<std::uint64_t>(max_q) + 1));
  return q;
}

// Pours a in steps of 1/K, each step onto the currently lowest column.
double naive_level(const std::vector<QueueLength>& q, std::int64_t a, std::int64_t k) {
  std::vector<std::int64_t> h(q.size());
  for (std::size_t n = 0; n < q.size(); ++n) h[n] = q[n] * k;
  std::vector<bool> wet(q.size(), false);
  for (std::int64_t step = 0; step < a * k; ++step) {
    const auto it = std::min_element(h.begin(), h.end());
    ++*it;
    wet[static_cast<std::size_t>(it - h.begin())] = true;
  }
  std::int64_t top = 0;
  for (std::size_t n = 0; n < q.size(); ++n) {
    if (wet[n]) top = std::max(top, h[n]);
  }
  return static_cast<double>(top) / static_cast<double>(k);
}

}  // namespace

TEST(WaterLevel, Examples) {
  EXPECT_EQ(water_level(QueueVector{1, 0}, 2), Rational(3, 2));
  EXPECT_EQ(water_level(QueueVector{5, 5, 5}, 0), Rational(5));
  EXPECT_EQ(water_level(QueueVector{1, 0}, 3), Rational(2));
}

TEST(TargetAllocation, Examples) {
  auto t = target_allocation(QueueVector{1, 0}, 2);
  EXPECT_EQ(t.g_star, (std::vector<Rational>{Rational(1, 2), Rational(3, 2)}));
  EXPECT_EQ(t.a_plus, 2);
  t = target_allocation(QueueVector{0, 0}, 4);
  EXPECT_EQ(t.g_star, (std::vector<Rational>{Rational(2), Rational(2)}));
  EXPECT_EQ(t.a_plus, 2);
  t = target_allocation(QueueVector{4, 0}, 4);
  EXPECT_EQ(t.g_star, (std::vector<Rational>{Rational(0), Rational(4)}));
  EXPECT_EQ(t.a_plus, 1);
  EXPECT_EQ(t.q_star, (std::vector<Rational>{Rational(4), Rational(4)}));
}

TEST(TargetAllocation, ZeroArrivalsHasEmptySupport) {
  const auto t = target_allocation(QueueVector{3, 1, 2}, 0);
  EXPECT_EQ(t.water_level, Rational(1));
  EXPECT_EQ(t.a_plus, 0);
  for (const auto& g : t.g_star) EXPECT_EQ(g, Rational(0));
}

TEST(WaterLevel, Errors) {
  EXPECT_THROW(water_level(std::span<const QueueLength>{}, 1), std::invalid_argument);
  EXPECT_THROW(water_level(QueueVector{1}, -1), std::invalid_argument);
}

TEST(WaterLevel, ConservationAndLevelProperty) {
  Rng rng(10);
  for (int i = 0; i < 10000; ++i) {
    const auto q = random_q(rng, 64, 100);
    const auto a = static_cast<std::int64_t>(rng.below(501));
    const auto t = target_allocation(q, a);
    Rational sum(0);
    std::int64_t positive = 0;
    for (std::size_t n = 0; n < q.size(); ++n) {
      const auto& g = t.g_star[n];
      ASSERT_GE(g, Rational(0));
      sum += g;
      ASSERT_EQ(g > Rational(0), Rational(q[n]) < t.water_level);
      if (g > Rational(0)) {
        ++positive;
        ASSERT_EQ(Rational(q[n]) + g, t.water_level);
      } else {
        ASSERT_GE(Rational(q[n]), t.water_level);
      }
      ASSERT_EQ(t.q_star[n], std::max(Rational(q[n]), t.water_level));
    }
    ASSERT_EQ(sum, Rational(a));
    ASSERT_EQ(positive, t.a_plus);
    ASSERT_LE(t.water_level.den(), static_cast<std::int64_t>(q.size()));
  }
}

TEST(WaterLevel, Monotonicity) {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    auto q = random_q(rng, 16, 30);
    const auto a = static_cast<std::int64_t>(rng.below(100));
    const Rational wl = water_level(q, a);
    EXPECT_GT(water_level(q, a + 1), wl);
    q[rng.index(q.size())] += 1;
    EXPECT_GE(water_level(q, a), wl);
  }
}

TEST(WaterLevel, PermutationEquivariance) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto q = random_q(rng, 12, 20);
    const auto a = static_cast<std::int64_t>(rng.below(60));
    std::vector<std::size_t> perm(q.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    std::vector<QueueLength> pq(q.size());
    for (std::size_t n = 0; n < q.size(); ++n) pq[n] = q[perm[n]];
    const auto t = target_allocation(q, a);
    const auto pt = target_allocation(pq, a);
    EXPECT_EQ(t.water_level, pt.water_level);
    for (std::size_t n = 0; n < q.size(); ++n) EXPECT_EQ(pt.g_star[n], t.g_star[perm[n]]);
  }
}

TEST(WaterLevel, AgreesWithNaivePouring) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto q = random_q(rng, 6, 8);
    const auto a = static_cast<std::int64_t>(1 + rng.below(10));
    const auto k = static_cast<std::int64_t>(q.size()) * 1000;
    const double naive = naive_level(q, a, k);
    EXPECT_NEAR(water_level(q, a).to_double(), naive, 2.0 / static_cast<double>(k));
  }
}

TEST(SortedQueues, ReusableAcrossQueries) {
  const std::vector<QueueLength> q{3, 0, 7, 1};
  const SortedQueues s(q);
  for (std::int64_t a = 0; a < 40; ++a) EXPECT_EQ(s.fill(a).level(), water_level(q, a));
}
