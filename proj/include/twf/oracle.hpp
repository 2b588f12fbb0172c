#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "twf/model.hpp"
#include "twf/rational.hpp"
#include "twf/water_level.hpp"

// Independent checks for the dispatch policies: the expected squared distance
// to the water-filling target in closed form, a grid search over the simplex,
// exhaustive enumeration of job placements, and a Partition brute force.
// Nothing here calls into policies.hpp.

namespace twf::oracle {

enum class Mode { Split, Unsplit };

/// Fills g* together with the arrival description they were computed for.
struct ObjectiveContext {
  std::vector<Rational> g_star;
  Mode mode = Mode::Split;
  std::int64_t a = 0;               // total arrivals (split)
  std::int64_t a_m = 0;             // per-dispatcher batch (unsplit)
  std::int64_t num_dispatchers = 1; // M (unsplit)

  std::size_t size() const { return g_star.size(); }
};

inline ObjectiveContext split_context(std::span<const QueueLength> q, std::int64_t a) {
  ObjectiveContext ctx;
  ctx.g_star = target_allocation(q, a).g_star;
  ctx.mode = Mode::Split;
  ctx.a = a;
  return ctx;
}

inline ObjectiveContext unsplit_context(std::span<const QueueLength> q, std::int64_t a_m, std::int64_t m) {
  ObjectiveContext ctx;
  ctx.g_star = target_allocation(q, m * a_m).g_star;
  ctx.mode = Mode::Unsplit;
  ctx.a = m * a_m;
  ctx.a_m = a_m;
  ctx.num_dispatchers = m;
  return ctx;
}

namespace detail {

inline void check_probs(std::span<const double> p, std::size_t n) {
  if (p.size() != n) throw std::invalid_argument("oracle: probability vector has wrong length");
  long double sum = 0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("oracle: probability outside [0,1]");
    sum += v;
  }
  if (std::fabs(static_cast<double>(sum) - 1.0) > 1e-9) {
    throw std::invalid_argument("oracle: probabilities do not sum to 1");
  }
}

}  // namespace detail

/// E||Q* - Q_bar||^2 when each of a jobs lands on server n with probability
/// p_n independently (binomial per-server counts):
/// sum g*^2 - 2a sum g* p + a - a sum p^2 + a^2 sum p^2.
inline double objective_split(const ObjectiveContext& ctx, std::span<const double> p) {
  detail::check_probs(p, ctx.size());
  const auto a = static_cast<long double>(ctx.a);
  long double g2 = 0, gp = 0, p2 = 0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const long double g = ctx.g_star[n].to_long_double();
    g2 += g * g;
    gp += g * p[n];
    p2 += static_cast<long double>(p[n]) * p[n];
  }
  return static_cast<double>(g2 - 2 * a * gp + a - a * p2 + a * a * p2);
}

/// E||Q* - Q_bar||^2 when each of M dispatchers sends its whole batch of a_m
/// jobs to server n with probability p_n:
/// sum g*^2 - 2 M a_m sum g* p + M a_m^2 + M (M-1) a_m^2 sum p^2.
inline double objective_unsplit(const ObjectiveContext& ctx, std::span<const double> p) {
  detail::check_probs(p, ctx.size());
  const auto m = static_cast<long double>(ctx.num_dispatchers);
  const auto am = static_cast<long double>(ctx.a_m);
  long double g2 = 0, gp = 0, p2 = 0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    const long double g = ctx.g_star[n].to_long_double();
    g2 += g * g;
    gp += g * p[n];
    p2 += static_cast<long double>(p[n]) * p[n];
  }
  return static_cast<double>(g2 - 2 * m * am * gp + m * am * am + m * (m - 1) * am * am * p2);
}

inline double objective(const ObjectiveContext& ctx, std::span<const double> p) {
  return ctx.mode == Mode::Split ? objective_split(ctx, p) : objective_unsplit(ctx, p);
}

/// Argmin-equivalent reduced forms: (a-1) sum p^2 - 2 sum g* p (split) and
/// (M-1) a_m sum p^2 - 2 sum g* p (unsplit).
inline double reduced_objective(const ObjectiveContext& ctx, std::span<const double> p) {
  const long double c = ctx.mode == Mode::Split ? static_cast<long double>(ctx.a - 1)
                                                : static_cast<long double>((ctx.num_dispatchers - 1) * ctx.a_m);
  long double gp = 0, p2 = 0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    gp += ctx.g_star[n].to_long_double() * p[n];
    p2 += static_cast<long double>(p[n]) * p[n];
  }
  return static_cast<double>(c * p2 - 2 * gp);
}

struct GridResult {
  std::vector<double> p_best;
  double f_best = std::numeric_limits<double>::infinity();
  std::size_t evaluated = 0;
};

inline constexpr std::size_t kMaxGridDimension = 5;
inline constexpr int kMaxGridResolution = 50;

/// Visits every point of {k / resolution} on the N-simplex.
inline void for_each_grid_point(std::size_t dim, int resolution,
                                const std::function<void(std::span<const double>)>& visit) {
  if (dim == 0 || dim > kMaxGridDimension) throw std::invalid_argument("simplex_search: dimension too large");
  if (resolution < 1 || resolution > kMaxGridResolution) {
    throw std::invalid_argument("simplex_search: resolution must lie in [1, 50]");
  }
  std::vector<int> counts(dim, 0);
  std::vector<double> p(dim, 0.0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int remaining) {
    if (i + 1 == dim) {
      counts[i] = remaining;
      for (std::size_t j = 0; j < dim; ++j) p[j] = static_cast<double>(counts[j]) / resolution;
      visit(p);
      return;
    }
    for (int c = 0; c <= remaining; ++c) {
      counts[i] = c;
      rec(i + 1, remaining - c);
    }
  };
  rec(0, resolution);
}

/// Exhaustive minimization of `f` over the simplex lattice.
inline GridResult simplex_search(std::size_t dim, int resolution,
                                 const std::function<double(std::span<const double>)>& f) {
  GridResult best;
  for_each_grid_point(dim, resolution, [&](std::span<const double> p) {
    const double v = f(p);
    ++best.evaluated;
    if (v < best.f_best) {
      best.f_best = v;
      best.p_best.assign(p.begin(), p.end());
    }
  });
  return best;
}

inline GridResult simplex_search(const ObjectiveContext& ctx, int resolution) {
  return simplex_search(ctx.size(), resolution, [&](std::span<const double> p) { return objective(ctx, p); });
}

/// Upper bound on how far the best lattice point can sit above the true
/// minimum: max |df/dp_n| times the L1 distance from any simplex point to the
/// lattice (at most dim / resolution).
inline double grid_gap_bound(const ObjectiveContext& ctx, int resolution) {
  long double gmax = 0;
  for (const auto& g : ctx.g_star) gmax = std::max(gmax, g.to_long_double());
  long double grad = 0;
  if (ctx.mode == Mode::Split) {
    const auto a = static_cast<long double>(ctx.a);
    grad = 2 * a * gmax + 2 * (a * a - a);
  } else {
    const auto m = static_cast<long double>(ctx.num_dispatchers);
    const auto am = static_cast<long double>(ctx.a_m);
    grad = 2 * m * am * gmax + 2 * m * (m - 1) * am * am;
  }
  return static_cast<double>(grad * static_cast<long double>(ctx.size()) / resolution);
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration.

inline constexpr std::uint64_t kMaxOutcomes = 1'000'000;

template <class T>
T scalar_from(const Rational& r) {
  if constexpr (std::is_same_v<T, Rational>) {
    return r;
  } else {
    return static_cast<T>(r.to_long_double());
  }
}

template <class T>
T scalar_from_int(std::int64_t v) {
  return T(v);
}

/// Distribution of the per-server arrival vector g_bar. `probs[m]` is
/// dispatcher m's probability vector; splittable dispatchers place each job
/// independently, unsplittable ones send the whole batch to one server.
template <class T>
std::map<std::vector<std::int64_t>, T> outcome_distribution(std::size_t num_servers,
                                                            std::span<const std::int64_t> arrivals,
                                                            const std::vector<std::vector<T>>& probs,
                                                            bool splittable) {
  if (probs.size() != arrivals.size()) throw std::invalid_argument("enumerate_outcomes: one P per dispatcher");
  for (const auto& p : probs) {
    if (p.size() != num_servers) throw std::invalid_argument("enumerate_outcomes: P has wrong length");
  }
  // Guard on the branching count: servers with positive probability raised
  // to the number of independent draws.
  long double space = 1;
  for (std::size_t m = 0; m < arrivals.size(); ++m) {
    const std::int64_t a = arrivals[m];
    if (a < 0) throw std::invalid_argument("enumerate_outcomes: negative arrivals");
    const auto support = static_cast<long double>(
        std::count_if(probs[m].begin(), probs[m].end(), [](const T& v) { return !(v == scalar_from_int<T>(0)); }));
    const long double draws = splittable ? static_cast<long double>(a) : (a > 0 ? 1.0L : 0.0L);
    space *= std::pow(std::max(support, 1.0L), draws);
  }
  if (space > static_cast<long double>(kMaxOutcomes)) {
    throw std::invalid_argument("enumerate_outcomes: outcome space exceeds guard");
  }

  std::map<std::vector<std::int64_t>, T> dist;
  dist.emplace(std::vector<std::int64_t>(num_servers, 0), scalar_from_int<T>(1));
  auto place = [&](const std::vector<T>& p, std::int64_t jobs) {
    std::map<std::vector<std::int64_t>, T> next;
    for (const auto& [g, w] : dist) {
      for (std::size_t n = 0; n < num_servers; ++n) {
        if (p[n] == scalar_from_int<T>(0)) continue;
        auto h = g;
        h[n] += jobs;
        auto [it, inserted] = next.emplace(std::move(h), w * p[n]);
        if (!inserted) it->second = it->second + w * p[n];
      }
    }
    dist = std::move(next);
  };
  for (std::size_t m = 0; m < arrivals.size(); ++m) {
    if (arrivals[m] == 0) continue;
    if (splittable) {
      for (std::int64_t j = 0; j < arrivals[m]; ++j) place(probs[m], 1);
    } else {
      place(probs[m], arrivals[m]);
    }
  }
  return dist;
}

/// Exact E||Q* - Q_bar||^2 by summing over every placement outcome, with Q*
/// the water-filling target of Q and the total arrivals.
template <class T>
T enumerate_outcomes(std::span<const QueueLength> q, std::span<const std::int64_t> arrivals,
                     const std::vector<std::vector<T>>& probs, bool splittable) {
  const std::int64_t total = std::accumulate(arrivals.begin(), arrivals.end(), std::int64_t{0});
  const auto target = target_allocation(q, total);
  const auto dist = outcome_distribution<T>(q.size(), arrivals, probs, splittable);
  T expected = scalar_from_int<T>(0);
  for (const auto& [g, w] : dist) {
    T norm = scalar_from_int<T>(0);
    for (std::size_t n = 0; n < q.size(); ++n) {
      const T diff = scalar_from<T>(target.g_star[n]) - scalar_from_int<T>(g[n]);
      norm = norm + diff * diff;
    }
    expected = expected + w * norm;
  }
  return expected;
}

/// Same as above with every dispatcher using the same P.
template <class T>
T enumerate_outcomes(std::span<const QueueLength> q, std::span<const std::int64_t> arrivals,
                     const std::vector<T>& shared, bool splittable) {
  return enumerate_outcomes<T>(q, arrivals, std::vector<std::vector<T>>(arrivals.size(), shared), splittable);
}

// ---------------------------------------------------------------------------
// Two-server Partition.

struct PartitionResult {
  bool exists = false;
  std::vector<bool> on_first;  // side of each batch in the best split
  std::int64_t imbalance = 0;  // |sum(first) - sum(second)|
};

inline constexpr std::size_t kMaxPartitionItems = 24;

/// Enumerates all 2^M subsets (Gray-code order, one add/remove per step).
inline PartitionResult partition_bruteforce(std::span<const std::int64_t> batches) {
  if (batches.size() > kMaxPartitionItems) throw std::invalid_argument("partition_bruteforce: too many batches");
  for (auto b : batches) {
    if (b < 0) throw std::invalid_argument("partition_bruteforce: negative batch");
  }
  const std::int64_t total = std::accumulate(batches.begin(), batches.end(), std::int64_t{0});
  const std::size_t m = batches.size();
  PartitionResult best;
  best.on_first.assign(m, false);
  best.imbalance = total;
  std::uint64_t best_mask = 0;
  std::int64_t first = 0;
  std::uint64_t gray = 0;
  for (std::uint64_t i = 1; i < (std::uint64_t{1} << m); ++i) {
    const std::uint64_t next = i ^ (i >> 1);
    const std::uint64_t flipped = next ^ gray;
    const auto bit = static_cast<std::size_t>(std::countr_zero(flipped));
    first += (next & flipped) ? batches[bit] : -batches[bit];
    gray = next;
    const std::int64_t imbalance = std::abs(2 * first - total);
    if (imbalance < best.imbalance) {
      best.imbalance = imbalance;
      best_mask = gray;
      if (imbalance == 0) break;
    }
  }
  for (std::size_t j = 0; j < m; ++j) best.on_first[j] = (best_mask >> j) & 1U;
  best.exists = best.imbalance == 0;
  return best;
}

}  // namespace twf::oracle
