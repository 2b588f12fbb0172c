#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "twf/oracle.hpp"
#include "twf/policies.hpp"
#include "twf/rational.hpp"
#include "twf/rng.hpp"
#include "twf/water_level.hpp"

// Self-check suite behind `twf verify`. The policy closed forms are passed in
// as plain functions so a deliberately broken variant can be run through the
// same checks.

namespace twf::verify {

using SplitPolicy = std::function<std::vector<Rational>(std::span<const QueueLength>, std::int64_t)>;
using UnsplitPolicy =
    std::function<std::vector<Rational>(std::span<const QueueLength>, std::int64_t, std::int64_t)>;

struct PolicyUnderTest {
  SplitPolicy stwf = [](std::span<const QueueLength> q, std::int64_t a) { return stwf_probs_exact(q, a); };
  SplitPolicy wfie = [](std::span<const QueueLength> q, std::int64_t a) { return wfie_probs_exact(q, a); };
  UnsplitPolicy utwf = [](std::span<const QueueLength> q, std::int64_t a_m, std::int64_t m) {
    return utwf_probs_exact(q, a_m, m);
  };
};

enum class Level { Fast, Full };

struct CheckResult {
  std::string name;
  bool passed = true;
  std::size_t instances = 0;
  double seconds = 0;
  std::string failure;  // first failing instance, JSON-ish
};

struct Report {
  std::vector<CheckResult> checks;
  bool ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

namespace detail {

inline std::string vec_str(std::span<const QueueLength> v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  os << ']';
  return os.str();
}

inline std::string vec_str(std::span<const Rational> v) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ",\"" : "\"") << v[i] << '"';
  os << ']';
  return os.str();
}

inline std::vector<double> to_doubles(std::span<const Rational> p) {
  std::vector<double> out;
  out.reserve(p.size());
  for (const auto& r : p) out.push_back(r.to_double());
  return out;
}

inline std::vector<QueueLength> random_queues(Rng& rng, std::size_t max_n, QueueLength max_q) {
  const std::size_t n = 1 + rng.index(max_n);
  std::vector<QueueLength> q(n);
  for (auto& v : q) v = static_cast<QueueLength>(rng.below(static_cast<std::uint64_t>(max_q) + 1));
  return q;
}

/// Exact probability vector: non-negative and summing to exactly one.
inline bool exact_simplex(std::span<const Rational> p) {
  Rational sum(0);
  for (const auto& r : p) {
    if (r < Rational(0)) return false;
    sum += r;
  }
  return sum == Rational(1);
}

template <class Body>
CheckResult timed(std::string name, Body body) {
  CheckResult r;
  r.name = std::move(name);
  const auto start = std::chrono::steady_clock::now();
  body(r);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

inline void fail(CheckResult& r, const std::string& what) {
  if (r.passed) r.failure = what;
  r.passed = false;
}

}  // namespace detail

/// Worked two-server examples with known exact answers.
inline CheckResult check_golden(const PolicyUnderTest& pol) {
  return detail::timed("golden_examples", [&](CheckResult& r) {
    struct Case {
      const char* policy;
      std::vector<QueueLength> q;
      std::int64_t a;
      std::int64_t m;
      std::vector<Rational> expect;
    };
    const std::vector<Case> cases = {
        {"stwf", {1, 0}, 2, 0, {Rational(0), Rational(1)}},
        {"stwf", {1, 0}, 3, 0, {Rational(1, 4), Rational(3, 4)}},
        {"stwf", {0, 0}, 4, 0, {Rational(1, 2), Rational(1, 2)}},
        {"wfie", {1, 0}, 2, 0, {Rational(1, 4), Rational(3, 4)}},
        {"wfie", {1, 0}, 3, 0, {Rational(1, 3), Rational(2, 3)}},
        {"wfie", {0, 0}, 2, 0, {Rational(1, 2), Rational(1, 2)}},
        {"utwf", {1, 0}, 1, 2, {Rational(0), Rational(1)}},
        {"utwf", {0, 0}, 2, 2, {Rational(1, 2), Rational(1, 2)}},
        {"utwf", {4, 0}, 2, 2, {Rational(0), Rational(1)}},
    };
    for (const auto& c : cases) {
      ++r.instances;
      std::vector<Rational> got;
      const std::string name = c.policy;
      if (name == "stwf") got = pol.stwf(c.q, c.a);
      if (name == "wfie") got = pol.wfie(c.q, c.a);
      if (name == "utwf") got = pol.utwf(c.q, c.a, c.m);
      if (got != c.expect) {
        detail::fail(r, "{\"policy\":\"" + name + "\",\"q\":" + detail::vec_str(c.q) +
                            ",\"a\":" + std::to_string(c.a) + ",\"got\":" + detail::vec_str(got) +
                            ",\"expected\":" + detail::vec_str(c.expect) + "}");
      }
    }
    // Three single-job dispatchers facing Q = [1, 0]: chance that all three
    // land on the longer queue.
    const std::vector<QueueLength> q{1, 0};
    const std::vector<std::int64_t> arrivals{1, 1, 1};
    const std::vector<std::int64_t> worst{3, 0};
    auto worst_mass = [&](const std::vector<Rational>& p) {
      const auto dist = oracle::outcome_distribution<Rational>(2, arrivals, std::vector(3, p), true);
      const auto it = dist.find(worst);
      return it == dist.end() ? Rational(0) : it->second;
    };
    const Rational twf = worst_mass(pol.stwf(q, 3));
    const Rational wfie = worst_mass(pol.wfie(q, 3));
    r.instances += 2;
    if (twf != Rational(1, 64) || wfie != Rational(1, 27)) {
      detail::fail(r, "{\"worst_case\":{\"twf\":\"" + twf.str() + "\",\"wfie\":\"" + wfie.str() + "\"}}");
    }
  });
}

/// Sum of fills equals the poured volume exactly; level property holds.
inline CheckResult check_conservation(std::size_t count, std::uint64_t seed) {
  return detail::timed("water_level_conservation", [&](CheckResult& r) {
    Rng rng = Rng::stream(seed, "verify/conservation");
    for (std::size_t i = 0; i < count; ++i) {
      const auto q = detail::random_queues(rng, 64, 100);
      const auto a = static_cast<std::int64_t>(rng.below(501));
      const auto t = target_allocation(q, a);
      Rational sum(0);
      bool level_ok = true;
      for (std::size_t n = 0; n < q.size(); ++n) {
        sum += t.g_star[n];
        if (t.g_star[n] > Rational(0) && Rational(q[n]) + t.g_star[n] != t.water_level) level_ok = false;
        if (t.g_star[n] == Rational(0) && Rational(q[n]) < t.water_level) level_ok = false;
      }
      ++r.instances;
      if (sum != Rational(a) || !level_ok) {
        detail::fail(r, "{\"q\":" + detail::vec_str(q) + ",\"a\":" + std::to_string(a) + "}");
        return;
      }
    }
  });
}

/// Every closed form is an exact probability vector; uTWF support is U.
inline CheckResult check_simplex_and_support(const PolicyUnderTest& pol, std::size_t count, std::uint64_t seed) {
  return detail::timed("probability_vectors", [&](CheckResult& r) {
    Rng rng = Rng::stream(seed, "verify/simplex");
    for (std::size_t i = 0; i < count; ++i) {
      const auto q = detail::random_queues(rng, 32, 50);
      const auto a_m = static_cast<std::int64_t>(1 + rng.below(20));
      const auto m = static_cast<std::int64_t>(1 + rng.below(10));
      const auto s = pol.stwf(q, m * a_m);
      const auto w = pol.wfie(q, m * a_m);
      const auto u = pol.utwf(q, a_m, m);
      bool ok = detail::exact_simplex(s) && detail::exact_simplex(w) && detail::exact_simplex(u);
      if (ok && m > 1) {
        const Rational wl = water_level(q, (m - 1) * a_m);
        for (std::size_t n = 0; n < q.size(); ++n) {
          if ((u[n] > Rational(0)) != (Rational(q[n]) < wl)) ok = false;
        }
      }
      ++r.instances;
      if (!ok) {
        detail::fail(r, "{\"q\":" + detail::vec_str(q) + ",\"a_m\":" + std::to_string(a_m) +
                            ",\"M\":" + std::to_string(m) + "}");
        return;
      }
    }
  });
}

/// With one job per dispatcher the two closed forms agree.
inline CheckResult check_coincidence(const PolicyUnderTest& pol, std::size_t count, std::uint64_t seed) {
  return detail::timed("split_unsplit_coincidence", [&](CheckResult& r) {
    Rng rng = Rng::stream(seed, "verify/coincidence");
    for (std::size_t i = 0; i < count; ++i) {
      const auto q = detail::random_queues(rng, 32, 50);
      const auto m = static_cast<std::int64_t>(1 + rng.below(20));
      const auto s = detail::to_doubles(pol.stwf(q, m));
      const auto u = detail::to_doubles(pol.utwf(q, 1, m));
      ++r.instances;
      for (std::size_t n = 0; n < q.size(); ++n) {
        if (std::fabs(s[n] - u[n]) > 1e-12) {
          detail::fail(r, "{\"q\":" + detail::vec_str(q) + ",\"M\":" + std::to_string(m) + "}");
          return;
        }
      }
    }
  });
}

/// Closed-form objectives against exhaustive enumeration of placements.
inline CheckResult check_enumeration(std::size_t count, std::uint64_t seed) {
  return detail::timed("objective_vs_enumeration", [&](CheckResult& r) {
    Rng rng = Rng::stream(seed, "verify/enumeration");
    for (std::size_t i = 0; i < count; ++i) {
      const auto q = detail::random_queues(rng, 3, 4);
      std::vector<double> p(q.size());
      for (auto& v : p) v = static_cast<double>(1 + rng.below(20));
      const double total = std::accumulate(p.begin(), p.end(), 0.0);
      for (auto& v : p) v /= total;
      std::vector<long double> pl(p.begin(), p.end());

      const auto a = static_cast<std::int64_t>(1 + rng.below(5));
      const auto ctx_s = oracle::split_context(q, a);
      const std::vector<std::int64_t> one{a};
      const long double split_enum = oracle::enumerate_outcomes<long double>(q, one, pl, true);

      const auto m = static_cast<std::int64_t>(1 + rng.below(3));
      const auto a_m = static_cast<std::int64_t>(1 + rng.below(3));
      const auto ctx_u = oracle::unsplit_context(q, a_m, m);
      const std::vector<std::int64_t> batches(static_cast<std::size_t>(m), a_m);
      const long double unsplit_enum = oracle::enumerate_outcomes<long double>(q, batches, pl, false);

      r.instances += 2;
      const double ds = std::fabs(oracle::objective_split(ctx_s, p) - static_cast<double>(split_enum));
      const double du = std::fabs(oracle::objective_unsplit(ctx_u, p) - static_cast<double>(unsplit_enum));
      if (ds > 1e-9 || du > 1e-9) {
        detail::fail(r, "{\"q\":" + detail::vec_str(q) + ",\"a\":" + std::to_string(a) +
                            ",\"a_m\":" + std::to_string(a_m) + ",\"M\":" + std::to_string(m) + "}");
        return;
      }
    }
  });
}

/// Closed forms against a grid search of the simplex. Also checks that the
/// reduced objective selects a grid point that is optimal for the full one.
inline CheckResult check_optimality(const PolicyUnderTest& pol, std::size_t count, int resolution,
                                    std::uint64_t seed) {
  return detail::timed("grid_optimality", [&](CheckResult& r) {
    Rng rng = Rng::stream(seed, "verify/optimality");
    auto certify = [&](const oracle::ObjectiveContext& ctx, const std::vector<Rational>& exact,
                       const std::string& where) {
      if (!detail::exact_simplex(exact)) {
        detail::fail(r, where);
        return false;
      }
      const auto p = detail::to_doubles(exact);
      const auto grid = oracle::simplex_search(ctx, resolution);
      const double f = oracle::objective(ctx, p);
      // The closed form minimizes a convex objective over the whole simplex,
      // so no lattice point may beat it beyond rounding.
      const double slack = std::min(oracle::grid_gap_bound(ctx, resolution), 1e-6);
      const auto reduced = oracle::simplex_search(
          ctx.size(), resolution, [&](std::span<const double> x) { return oracle::reduced_objective(ctx, x); });
      const double f_reduced = oracle::objective(ctx, reduced.p_best);
      if (f > grid.f_best + slack + 1e-9 || std::fabs(f_reduced - grid.f_best) > 1e-9 * (1 + grid.f_best)) {
        detail::fail(r, where);
        return false;
      }
      return true;
    };
    for (std::size_t i = 0; i < count; ++i) {
      const auto q = detail::random_queues(rng, 4, 6);
      const auto a = static_cast<std::int64_t>(1 + rng.below(6));
      const auto m = static_cast<std::int64_t>(1 + rng.below(3));
      const auto a_m = static_cast<std::int64_t>(1 + rng.below(3));
      const std::string where = "{\"q\":" + detail::vec_str(q) + ",\"a\":" + std::to_string(a) +
                                ",\"a_m\":" + std::to_string(a_m) + ",\"M\":" + std::to_string(m) + "}";
      r.instances += 2;
      if (!certify(oracle::split_context(q, a), pol.stwf(q, a), where)) return;
      if (!certify(oracle::unsplit_context(q, a_m, m), pol.utwf(q, a_m, m), where)) return;
      // sTWF never does worse than WFiE.
      const auto ctx = oracle::split_context(q, a);
      const auto ws = pol.wfie(q, a);
      if (!detail::exact_simplex(ws) ||
          oracle::objective(ctx, detail::to_doubles(pol.stwf(q, a))) >
              oracle::objective(ctx, detail::to_doubles(ws)) + 1e-9) {
        detail::fail(r, where);
        return;
      }
    }
  });
}

/// Partition brute force against a subset-sum table.
inline CheckResult check_partition(std::size_t count, std::uint64_t seed) {
  return detail::timed("partition_bruteforce", [&](CheckResult& r) {
    Rng rng = Rng::stream(seed, "verify/partition");
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t m = 1 + rng.index(16);
      std::vector<std::int64_t> b(m);
      for (auto& v : b) v = static_cast<std::int64_t>(1 + rng.below(30));
      const std::int64_t total = std::accumulate(b.begin(), b.end(), std::int64_t{0});
      std::vector<char> reach(static_cast<std::size_t>(total) + 1, 0);
      reach[0] = 1;
      for (auto v : b) {
        for (std::int64_t s = total; s >= v; --s) reach[static_cast<std::size_t>(s)] |= reach[static_cast<std::size_t>(s - v)];
      }
      std::int64_t best = total;
      for (std::int64_t s = 0; s <= total; ++s) {
        if (reach[static_cast<std::size_t>(s)]) best = std::min(best, std::abs(2 * s - total));
      }
      const auto res = oracle::partition_bruteforce(b);
      std::int64_t first = 0;
      for (std::size_t j = 0; j < m; ++j) first += res.on_first[j] ? b[j] : 0;
      ++r.instances;
      if (res.imbalance != best || std::abs(2 * first - total) != best || res.exists != (best == 0)) {
        detail::fail(r, "{\"batches\":" + detail::vec_str(b) + "}");
        return;
      }
    }
  });
}

inline Report run(Level level, const PolicyUnderTest& pol = {}, std::uint64_t seed = 20240101) {
  const bool full = level == Level::Full;
  Report rep;
  rep.checks.push_back(check_golden(pol));
  rep.checks.push_back(check_conservation(full ? 10000 : 1000, seed));
  rep.checks.push_back(check_simplex_and_support(pol, full ? 10000 : 1000, seed));
  rep.checks.push_back(check_coincidence(pol, full ? 1000 : 200, seed));
  rep.checks.push_back(check_enumeration(full ? 200 : 50, seed));
  rep.checks.push_back(check_optimality(pol, full ? 200 : 20, full ? 50 : 30, seed));
  rep.checks.push_back(check_partition(full ? 100 : 30, seed));
  return rep;
}

}  // namespace twf::verify
