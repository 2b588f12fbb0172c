#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "twf/model.hpp"
#include "twf/rational.hpp"

namespace twf {

/// Water level in integer form: WL = level_num / raised, where `raised` is the
/// number of lowest queues the poured volume reaches. For a > 0 every raised
/// queue ends strictly below WL before filling, so `raised` is also the
/// support count a*_+. For a = 0 the level sits on min(Q) and the support is
/// empty.
struct WaterFill {
  std::int64_t level_num = 0;
  std::int64_t raised = 1;
  std::int64_t support = 0;

  Rational level() const { return Rational(level_num, raised); }

  /// Numerator of g*_n over the common denominator `raised`.
  std::int64_t fill_num(QueueLength q) const { return std::max<std::int64_t>(0, level_num - raised * q); }

  /// Q_n < WL, evaluated exactly.
  bool below(QueueLength q) const { return q * raised < level_num; }
};

/// Sorted copy of a queue view with prefix sums. Building costs O(N log N);
/// every water-level query afterwards is a binary search.
class SortedQueues {
 public:
  SortedQueues() = default;
  explicit SortedQueues(std::span<const QueueLength> queues) { assign(queues); }

  void assign(std::span<const QueueLength> queues) {
    if (queues.empty()) throw std::invalid_argument("water level: empty queue vector");
    sorted_.assign(queues.begin(), queues.end());
    std::sort(sorted_.begin(), sorted_.end());
    prefix_.resize(sorted_.size() + 1);
    prefix_[0] = 0;
    for (std::size_t i = 0; i < sorted_.size(); ++i) prefix_[i + 1] = prefix_[i] + sorted_[i];
  }

  std::size_t size() const { return sorted_.size(); }
  QueueLength min() const { return sorted_.front(); }
  std::span<const QueueLength> values() const { return sorted_; }

  /// Pours `a` units over the queues. Level-raising stops at the first k with
  /// prefix_k + a <= k * sorted[k]; the left side of that test grows
  /// monotonically in k, so the search is a bisection.
  WaterFill fill(std::int64_t a) const {
    if (sorted_.empty()) throw std::invalid_argument("water level: empty queue vector");
    if (a < 0) throw std::invalid_argument("water level: negative arrivals");
    const std::size_t n = sorted_.size();
    std::size_t lo = 1;
    std::size_t hi = n;
    while (lo < hi) {
      const std::size_t k = lo + (hi - lo) / 2;
      const auto capacity = static_cast<std::int64_t>(k) * sorted_[k] - prefix_[k];
      if (capacity >= a) {
        hi = k;
      } else {
        lo = k + 1;
      }
    }
    WaterFill wf;
    wf.raised = static_cast<std::int64_t>(lo);
    wf.level_num = prefix_[lo] + a;
    wf.support = a > 0 ? wf.raised : 0;
    return wf;
  }

 private:
  std::vector<QueueLength> sorted_;
  std::vector<std::int64_t> prefix_;
};

/// Water level, per-server fills and resulting targets, all exact.
struct TargetAllocation {
  Rational water_level;
  std::vector<Rational> g_star;
  std::int64_t a_plus = 0;
  std::vector<Rational> q_star;
};

inline Rational water_level(std::span<const QueueLength> queues, std::int64_t a) {
  return SortedQueues(queues).fill(a).level();
}

inline Rational water_level(const QueueVector& queues, std::int64_t a) { return water_level(queues.view(), a); }

inline TargetAllocation target_allocation(std::span<const QueueLength> queues, std::int64_t a) {
  const WaterFill wf = SortedQueues(queues).fill(a);
  TargetAllocation t;
  t.water_level = wf.level();
  t.a_plus = wf.support;
  t.g_star.reserve(queues.size());
  t.q_star.reserve(queues.size());
  for (QueueLength q : queues) {
    t.g_star.emplace_back(wf.fill_num(q), wf.raised);
    t.q_star.push_back(std::max(Rational(q), t.water_level));
  }
  return t;
}

inline TargetAllocation target_allocation(const QueueVector& queues, std::int64_t a) {
  return target_allocation(queues.view(), a);
}

}  // namespace twf
