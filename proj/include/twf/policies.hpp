#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "twf/info.hpp"
#include "twf/model.hpp"
#include "twf/rational.hpp"
#include "twf/rng.hpp"
#include "twf/water_level.hpp"

namespace twf {

/// Per-server dispatch probabilities on the simplex.
class ProbabilityVector {
 public:
  static constexpr double kSumTolerance = 1e-9;

  ProbabilityVector() = default;
  explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) { validate(); }

  static ProbabilityVector from_exact(std::span<const Rational> exact) {
    std::vector<double> p;
    p.reserve(exact.size());
    for (const Rational& r : exact) p.push_back(r.to_double());
    return ProbabilityVector(std::move(p));
  }

  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t n) const { return probs_[n]; }
  std::span<const double> values() const { return probs_; }

  void validate() const {
    if (probs_.empty()) throw std::invalid_argument("ProbabilityVector: empty");
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("ProbabilityVector: entry outside [0,1]");
      sum += p;
    }
    if (std::fabs(sum - 1.0) > kSumTolerance) {
      throw std::invalid_argument("ProbabilityVector: entries sum to " + std::to_string(sum));
    }
  }

 private:
  std::vector<double> probs_;
};

/// Jobs a dispatcher sends to each server this round. `targets` lists the
/// servers with nonzero counts in first-assignment order so that reset and
/// iteration cost O(support) rather than O(N).
class DispatchDecision {
 public:
  DispatchDecision() = default;
  explicit DispatchDecision(std::size_t num_servers) : counts_(num_servers, 0) {}

  void reset(std::size_t num_servers) {
    if (counts_.size() != num_servers) {
      counts_.assign(num_servers, 0);
    } else {
      for (std::int32_t n : targets_) counts_[static_cast<std::size_t>(n)] = 0;
    }
    targets_.clear();
  }

  void add(std::size_t server, std::int64_t jobs) {
    if (jobs <= 0) return;
    if (counts_[server] == 0) targets_.push_back(static_cast<std::int32_t>(server));
    counts_[server] += jobs;
  }

  std::span<const std::int64_t> per_server_counts() const { return counts_; }
  std::span<const std::int32_t> targets() const { return targets_; }
  std::int64_t count(std::size_t server) const { return counts_[server]; }
  std::int64_t total() const {
    std::int64_t t = 0;
    for (std::int32_t n : targets_) t += counts_[static_cast<std::size_t>(n)];
    return t;
  }

 private:
  std::vector<std::int64_t> counts_;
  std::vector<std::int32_t> targets_;
};

namespace detail {

inline std::vector<Rational> uniform_over_argmin(std::span<const QueueLength> view) {
  const QueueLength lo = *std::min_element(view.begin(), view.end());
  const auto ties = std::count(view.begin(), view.end(), lo);
  std::vector<Rational> p(view.size(), Rational(0));
  for (std::size_t n = 0; n < view.size(); ++n) {
    if (view[n] == lo) p[n] = Rational(1, ties);
  }
  return p;
}

inline void require_nonempty(std::span<const QueueLength> view) {
  if (view.empty()) throw std::invalid_argument("policy: empty queue view");
}

}  // namespace detail

/// Probabilities as integer numerators over one common denominator. All TWF
/// closed forms land here exactly; conversion to doubles is the last step.
struct ScaledProbabilities {
  std::vector<std::int64_t> numerators;
  std::int64_t denominator = 1;

  std::vector<Rational> exact() const {
    std::vector<Rational> out;
    out.reserve(numerators.size());
    for (auto v : numerators) out.emplace_back(v, denominator);
    return out;
  }

  /// Doubles renormalized by their floating sum.
  void to_doubles(std::vector<double>& out) const {
    out.resize(numerators.size());
    double sum = 0.0;
    const auto den = static_cast<double>(denominator);
    for (std::size_t n = 0; n < numerators.size(); ++n) {
      out[n] = static_cast<double>(numerators[n]) / den;
      sum += out[n];
    }
    for (double& p : out) p /= sum;
  }
};

/// Splittable tidal water filling, exact form. For a_est > 1 every server
/// receives p_n = max{0, (g*_n - 1/a*_+) / (a_est - 1)}; for a_est = 1 the
/// mass is spread evenly over the shortest queues.
inline void stwf_scaled(std::span<const QueueLength> view, const SortedQueues& sorted, std::int64_t a_est,
                        ScaledProbabilities& out) {
  detail::require_nonempty(view);
  if (a_est <= 0) throw std::invalid_argument("stwf_probs: a_est must be positive");
  out.numerators.assign(view.size(), 0);
  if (a_est == 1) {
    const QueueLength lo = sorted.min();
    std::int64_t ties = 0;
    for (std::size_t n = 0; n < view.size(); ++n) {
      if (view[n] == lo) {
        out.numerators[n] = 1;
        ++ties;
      }
    }
    out.denominator = ties;
    return;
  }
  // g*_n - 1/a*_+ = (fill_num - 1) / k with k = a*_+ = raised.
  const WaterFill wf = sorted.fill(a_est);
  for (std::size_t n = 0; n < view.size(); ++n) {
    out.numerators[n] = std::max<std::int64_t>(0, wf.fill_num(view[n]) - 1);
  }
  out.denominator = wf.support * (a_est - 1);
}

/// Unsplittable tidal water filling, exact form. U holds the servers strictly
/// below the level reached by (M-1) a_m arrivals; the fills come from M a_m.
inline void utwf_scaled(std::span<const QueueLength> view, const SortedQueues& sorted, std::int64_t a_m,
                        std::int64_t num_dispatchers, ScaledProbabilities& out) {
  detail::require_nonempty(view);
  if (a_m <= 0) throw std::invalid_argument("utwf_probs: a_m must be positive");
  if (num_dispatchers <= 0) throw std::invalid_argument("utwf_probs: M must be positive");
  out.numerators.assign(view.size(), 0);
  if (num_dispatchers == 1) {
    stwf_scaled(view, sorted, 1, out);
    return;
  }
  const WaterFill lower = sorted.fill((num_dispatchers - 1) * a_m);
  const WaterFill full = sorted.fill(num_dispatchers * a_m);
  const std::int64_t u_size = lower.support;
  const std::int64_t k = full.raised;

  // Sum over n outside U of g*_n, over denominator k.
  std::int64_t outside = 0;
  for (QueueLength q : view) {
    if (!lower.below(q)) outside += full.fill_num(q);
  }
  // x = (a_m - sum_outside) / |U| over denominator k |U|.
  const std::int64_t x_num = a_m * k - outside;
  for (std::size_t n = 0; n < view.size(); ++n) {
    out.numerators[n] = std::max<std::int64_t>(0, full.fill_num(view[n]) * u_size - x_num);
  }
  out.denominator = k * u_size * (num_dispatchers - 1) * a_m;
}

/// Water filling in expectation: p_n = g*_n / a_est.
inline void wfie_scaled(std::span<const QueueLength> view, const SortedQueues& sorted, std::int64_t a_est,
                        ScaledProbabilities& out) {
  detail::require_nonempty(view);
  if (a_est <= 0) throw std::invalid_argument("wfie_probs: a_est must be positive");
  const WaterFill wf = sorted.fill(a_est);
  out.numerators.resize(view.size());
  for (std::size_t n = 0; n < view.size(); ++n) out.numerators[n] = wf.fill_num(view[n]);
  out.denominator = wf.raised * a_est;
}

inline std::vector<Rational> stwf_probs_exact(std::span<const QueueLength> view, std::int64_t a_est) {
  detail::require_nonempty(view);
  ScaledProbabilities sp;
  stwf_scaled(view, SortedQueues(view), a_est, sp);
  return sp.exact();
}

inline std::vector<Rational> utwf_probs_exact(std::span<const QueueLength> view, std::int64_t a_m,
                                              std::int64_t num_dispatchers) {
  detail::require_nonempty(view);
  ScaledProbabilities sp;
  utwf_scaled(view, SortedQueues(view), a_m, num_dispatchers, sp);
  return sp.exact();
}

inline std::vector<Rational> wfie_probs_exact(std::span<const QueueLength> view, std::int64_t a_est) {
  detail::require_nonempty(view);
  ScaledProbabilities sp;
  wfie_scaled(view, SortedQueues(view), a_est, sp);
  return sp.exact();
}

inline ProbabilityVector stwf_probs(std::span<const QueueLength> view, std::int64_t a_est) {
  return ProbabilityVector::from_exact(stwf_probs_exact(view, a_est));
}
inline ProbabilityVector stwf_probs(const QueueVector& view, std::int64_t a_est) {
  return stwf_probs(view.view(), a_est);
}

inline ProbabilityVector utwf_probs(std::span<const QueueLength> view, std::int64_t a_m,
                                    std::int64_t num_dispatchers) {
  return ProbabilityVector::from_exact(utwf_probs_exact(view, a_m, num_dispatchers));
}
inline ProbabilityVector utwf_probs(const QueueVector& view, std::int64_t a_m, std::int64_t num_dispatchers) {
  return utwf_probs(view.view(), a_m, num_dispatchers);
}

inline ProbabilityVector wfie_probs(std::span<const QueueLength> view, std::int64_t a_est) {
  return ProbabilityVector::from_exact(wfie_probs_exact(view, a_est));
}
inline ProbabilityVector wfie_probs(const QueueVector& view, std::int64_t a_est) {
  return wfie_probs(view.view(), a_est);
}

// ---------------------------------------------------------------------------
// Sampling and baselines. Every random tie-break draws from the caller's
// policy stream.

namespace detail {

/// Uniform choice among the minima of `value(n)` over `candidates`.
template <class Candidates, class Value>
std::size_t argmin_uniform(const Candidates& candidates, Value value, Rng& rng,
                           std::vector<std::size_t>& ties) {
  ties.clear();
  QueueLength best = 0;
  for (std::size_t n : candidates) {
    const QueueLength v = value(n);
    if (ties.empty() || v < best) {
      best = v;
      ties.clear();
      ties.push_back(n);
    } else if (v == best) {
      ties.push_back(n);
    }
  }
  return ties.size() == 1 ? ties.front() : ties[rng.index(ties.size())];
}

struct IotaRange {
  std::size_t n;
  struct It {
    std::size_t i;
    std::size_t operator*() const { return i; }
    It& operator++() {
      ++i;
      return *this;
    }
    bool operator!=(const It& o) const { return i != o.i; }
  };
  It begin() const { return {0}; }
  It end() const { return {n}; }
};

inline std::size_t sample_categorical(std::span<const double> cumulative, Rng& rng) {
  const double u = rng.uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

}  // namespace detail

/// Reusable buffers for the dispatch routines; one per simulation.
struct PolicyScratch {
  std::vector<std::size_t> ties;
  std::vector<std::size_t> probe;
  std::vector<std::size_t> probe_pool;
  std::vector<double> cumulative;
  std::vector<std::size_t> support;
  std::vector<double> probs;
};

/// Draws the dispatcher's decision from `probs`: a_m independent categorical
/// draws when splittable, one draw for the whole batch otherwise.
inline void sample_decision(std::span<const double> probs, std::int64_t a_m, bool splittable, Rng& rng,
                            DispatchDecision& out, PolicyScratch& scratch) {
  out.reset(probs.size());
  if (a_m <= 0) return;
  // Cumulative mass over the support only; zero-probability servers are
  // never chosen.
  scratch.support.clear();
  scratch.cumulative.clear();
  double acc = 0.0;
  for (std::size_t n = 0; n < probs.size(); ++n) {
    if (probs[n] > 0.0) {
      acc += probs[n];
      scratch.support.push_back(n);
      scratch.cumulative.push_back(acc);
    }
  }
  if (scratch.support.empty()) throw std::invalid_argument("sample_decision: no positive probability");
  if (scratch.support.size() == 1) {
    out.add(scratch.support.front(), a_m);
    return;
  }
  if (!splittable) {
    out.add(scratch.support[detail::sample_categorical(scratch.cumulative, rng)], a_m);
    return;
  }
  for (std::int64_t j = 0; j < a_m; ++j) {
    out.add(scratch.support[detail::sample_categorical(scratch.cumulative, rng)], 1);
  }
}

inline DispatchDecision sample_decision(const ProbabilityVector& p, std::int64_t a_m, bool splittable, Rng& rng) {
  p.validate();
  DispatchDecision out(p.size());
  PolicyScratch scratch;
  sample_decision(p.values(), a_m, splittable, rng, out, scratch);
  return out;
}

/// Uniformly random server per job (splittable) or per batch.
inline void random_dispatch(std::size_t num_servers, std::int64_t a_m, bool splittable, Rng& rng,
                            DispatchDecision& out) {
  out.reset(num_servers);
  if (a_m <= 0) return;
  if (!splittable) {
    out.add(rng.index(num_servers), a_m);
    return;
  }
  for (std::int64_t j = 0; j < a_m; ++j) out.add(rng.index(num_servers), 1);
}

/// Join the shortest queue. Splittable: each job goes to an argmin of the view
/// plus this dispatcher's earlier assignments in the round. Unsplittable: the
/// batch goes to one argmin of the view.
inline void jsq_dispatch(std::span<const QueueLength> view, std::int64_t a_m, bool splittable, Rng& rng,
                         DispatchDecision& out, PolicyScratch& scratch) {
  detail::require_nonempty(view);
  out.reset(view.size());
  if (a_m <= 0) return;
  const detail::IotaRange all{view.size()};
  if (!splittable) {
    out.add(detail::argmin_uniform(all, [&](std::size_t n) { return view[n]; }, rng, scratch.ties), a_m);
    return;
  }
  for (std::int64_t j = 0; j < a_m; ++j) {
    const std::size_t n = detail::argmin_uniform(
        all, [&](std::size_t s) { return view[s] + out.count(s); }, rng, scratch.ties);
    out.add(n, 1);
  }
}

inline DispatchDecision jsq_dispatch(const QueueVector& view, std::int64_t a_m, bool splittable, Rng& rng) {
  DispatchDecision out(view.size());
  PolicyScratch scratch;
  jsq_dispatch(view.view(), a_m, splittable, rng, out, scratch);
  return out;
}

/// Power of d choices. Splittable probes d fresh servers per job.
inline void jsqd_dispatch(std::span<const QueueLength> view, std::int64_t a_m, int d, bool splittable, Rng& rng,
                          DispatchDecision& out, PolicyScratch& scratch) {
  detail::require_nonempty(view);
  if (d < 1 || static_cast<std::size_t>(d) > view.size()) {
    throw std::invalid_argument("jsqd_dispatch: d must lie in [1, N]");
  }
  out.reset(view.size());
  if (a_m <= 0) return;
  const auto k = static_cast<std::size_t>(d);
  if (!splittable) {
    rng.sample_without_replacement(view.size(), k, scratch.probe_pool, scratch.probe);
    out.add(detail::argmin_uniform(scratch.probe, [&](std::size_t n) { return view[n]; }, rng, scratch.ties), a_m);
    return;
  }
  for (std::int64_t j = 0; j < a_m; ++j) {
    rng.sample_without_replacement(view.size(), k, scratch.probe_pool, scratch.probe);
    const std::size_t n = detail::argmin_uniform(
        scratch.probe, [&](std::size_t s) { return view[s] + out.count(s); }, rng, scratch.ties);
    out.add(n, 1);
  }
}

inline DispatchDecision jsqd_dispatch(const QueueVector& view, std::int64_t a_m, int d, bool splittable, Rng& rng) {
  DispatchDecision out(view.size());
  PolicyScratch scratch;
  jsqd_dispatch(view.view(), a_m, d, splittable, rng, out, scratch);
  return out;
}

/// A dispatcher's FIFO of servers that reported idle.
class IdleList {
 public:
  void push(std::size_t server) {
    if (std::find(servers_.begin(), servers_.end(), server) == servers_.end()) servers_.push_back(server);
  }
  bool empty() const { return servers_.empty(); }
  std::size_t size() const { return servers_.size(); }
  std::size_t pop() {
    const std::size_t s = servers_.front();
    servers_.pop_front();
    return s;
  }
  const std::deque<std::size_t>& servers() const { return servers_; }

 private:
  std::deque<std::size_t> servers_;
};

/// Join the idle queue: consume known-idle servers in FIFO order, one per job
/// (splittable) or one per batch; fall back to a uniformly random server.
inline void jiq_dispatch(IdleList& idle, std::size_t num_servers, std::int64_t a_m, bool splittable, Rng& rng,
                         DispatchDecision& out) {
  out.reset(num_servers);
  if (a_m <= 0) return;
  if (!splittable) {
    out.add(idle.empty() ? rng.index(num_servers) : idle.pop(), a_m);
    return;
  }
  for (std::int64_t j = 0; j < a_m; ++j) out.add(idle.empty() ? rng.index(num_servers) : idle.pop(), 1);
}

/// Local shortest queue: argmin of the local estimates, incrementing each
/// estimate by the jobs sent there.
inline void lsq_dispatch(LocalView& local, std::int64_t a_m, bool splittable, Rng& rng, DispatchDecision& out,
                         PolicyScratch& scratch) {
  if (local.size() == 0) throw std::invalid_argument("lsq_dispatch: empty local view");
  out.reset(local.size());
  if (a_m <= 0) return;
  const detail::IotaRange all{local.size()};
  if (!splittable) {
    const std::size_t n =
        detail::argmin_uniform(all, [&](std::size_t s) { return local.estimate(s); }, rng, scratch.ties);
    out.add(n, a_m);
    local.add_to_estimate(n, a_m);
    return;
  }
  for (std::int64_t j = 0; j < a_m; ++j) {
    const std::size_t n =
        detail::argmin_uniform(all, [&](std::size_t s) { return local.estimate(s); }, rng, scratch.ties);
    out.add(n, 1);
    local.add_to_estimate(n, 1);
  }
}

}  // namespace twf
