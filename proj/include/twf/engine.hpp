#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "twf/info.hpp"
#include "twf/model.hpp"
#include "twf/policies.hpp"
#include "twf/rng.hpp"
#include "twf/water_level.hpp"

namespace twf {

/// Response-time histogram (index = response time in rounds) plus the
/// per-round total queue length and a few counters.
struct MetricsAccumulator {
  std::vector<std::int64_t> response_histogram;
  std::vector<std::int64_t> queue_sum_series;
  std::int64_t jobs_completed = 0;  // measured (post-warmup arrivals) only
  std::int64_t links_established = 0;

  void record_response(std::int64_t tau, std::int64_t count = 1) {
    const auto idx = static_cast<std::size_t>(tau);
    if (idx >= response_histogram.size()) response_histogram.resize(idx + 1, 0);
    response_histogram[idx] += count;
    jobs_completed += count;
  }

  std::int64_t histogram_mass() const {
    return std::accumulate(response_histogram.begin(), response_histogram.end(), std::int64_t{0});
  }
};

struct Percentiles {
  double p50 = 0, p90 = 0, p95 = 0, p99 = 0, p999 = 0;
};

struct ExperimentResult {
  SystemConfig config;
  double mean_response = 0;
  Percentiles percentiles;
  std::vector<std::pair<std::int64_t, double>> ccdf;
  double stability_avg = 0;       // mean total queue length over all rounds
  double second_half_avg = 0;     // same over the last half of the run
  std::int64_t measured_jobs = 0;
  std::int64_t total_arrivals = 0;
  std::int64_t total_completions = 0;
  std::int64_t final_queue_mass = 0;
  std::int64_t links_established = 0;
  std::vector<std::int64_t> response_histogram;  // pooled across runs by callers
};

// ---------------------------------------------------------------------------
// Histogram statistics.

/// (tau, fraction of jobs with response time > tau) for tau = 0 and every
/// observed response time.
inline std::vector<std::pair<std::int64_t, double>> ccdf_points(std::span<const std::int64_t> hist) {
  const std::int64_t total = std::accumulate(hist.begin(), hist.end(), std::int64_t{0});
  if (total == 0) throw std::invalid_argument("ccdf_points: empty histogram");
  std::vector<std::pair<std::int64_t, double>> out;
  out.emplace_back(0, static_cast<double>(total - (hist.empty() ? 0 : hist[0])) / static_cast<double>(total));
  std::int64_t at_or_below = hist.empty() ? 0 : hist[0];
  for (std::size_t tau = 1; tau < hist.size(); ++tau) {
    if (hist[tau] == 0) continue;
    at_or_below += hist[tau];
    out.emplace_back(static_cast<std::int64_t>(tau),
                     static_cast<double>(total - at_or_below) / static_cast<double>(total));
  }
  return out;
}

/// Fraction of jobs with response time strictly greater than tau.
inline double ccdf_at(std::span<const std::int64_t> hist, std::int64_t tau) {
  const std::int64_t total = std::accumulate(hist.begin(), hist.end(), std::int64_t{0});
  if (total == 0) throw std::invalid_argument("ccdf_at: empty histogram");
  std::int64_t above = 0;
  for (std::size_t t = 0; t < hist.size(); ++t) {
    if (static_cast<std::int64_t>(t) > tau) above += hist[t];
  }
  return static_cast<double>(above) / static_cast<double>(total);
}

/// Smallest tau whose cumulative fraction reaches q.
inline std::int64_t histogram_quantile(std::span<const std::int64_t> hist, double q) {
  const std::int64_t total = std::accumulate(hist.begin(), hist.end(), std::int64_t{0});
  if (total == 0) throw std::invalid_argument("histogram_quantile: empty histogram");
  const double need = q * static_cast<double>(total);
  std::int64_t cumulative = 0;
  for (std::size_t tau = 0; tau < hist.size(); ++tau) {
    cumulative += hist[tau];
    if (static_cast<double>(cumulative) >= need - 1e-9) return static_cast<std::int64_t>(tau);
  }
  return static_cast<std::int64_t>(hist.size()) - 1;
}

inline double histogram_mean(std::span<const std::int64_t> hist) {
  long double sum = 0;
  std::int64_t total = 0;
  for (std::size_t tau = 0; tau < hist.size(); ++tau) {
    sum += static_cast<long double>(tau) * hist[tau];
    total += hist[tau];
  }
  return total == 0 ? 0.0 : static_cast<double>(sum / total);
}

// ---------------------------------------------------------------------------
// Simulation state.

struct QueuedJob {
  std::int64_t arrival_round;
  std::int32_t dispatcher;
};

struct SimulationOptions {
  /// Re-check the queue recurrence every round and throw on mismatch.
  bool check_invariants = false;
  /// Optional observer for every completed job (tests, tracing).
  std::function<void(const JobRecord&)> on_completion;
};

/// The four-phase round loop over exclusively owned state.
class Simulation {
 public:
  explicit Simulation(SystemConfig config, SimulationOptions options = {})
      : config_(std::move(config)),
        options_(std::move(options)),
        arrivals_rng_(Rng::stream(config_.seed, "arrivals")),
        services_rng_(Rng::stream(config_.seed, "services")),
        policy_rng_(Rng::stream(config_.seed, "policy")),
        comm_rng_(Rng::stream(config_.seed, "communication")),
        interleave_rng_(Rng::stream(config_.seed, "interleave")) {
    config_.validate();
    const auto n = static_cast<std::size_t>(config_.num_servers);
    const auto m = static_cast<std::size_t>(config_.num_dispatchers);
    queues_.resize(n);
    lengths_.assign(n, 0);
    incoming_.resize(n);
    decision_.reset(n);
    switch (config_.policy.kind) {
      case PolicyKind::JIQ:
        idle_lists_.resize(m);
        idle_token_free_.assign(n, true);
        break;
      case PolicyKind::LSQSample:
        lsq_views_.assign(m, LocalView(n));
        break;
      default:
        break;
    }
    if (config_.policy.info != InfoKind::Complete) {
      info_ = InfoState(InfoMode{config_.policy.info, config_.eta}, m, n);
    }
  }

  const SystemConfig& config() const { return config_; }
  std::int64_t round() const { return round_; }
  std::span<const QueueLength> queue_lengths() const { return lengths_; }
  const MetricsAccumulator& metrics() const { return metrics_; }
  const InfoState& info() const { return info_; }
  std::span<const LocalView> lsq_views() const { return lsq_views_; }
  std::span<const IdleList> idle_lists() const { return idle_lists_; }
  std::int64_t total_arrivals() const { return total_arrivals_; }
  std::int64_t total_completions() const { return total_completions_; }
  const ArrivalBatch& last_arrivals() const { return batch_; }
  std::span<const std::int64_t> last_services() const { return services_; }
  std::span<const std::int64_t> last_dispatched() const { return dispatched_; }

  /// One round: arrivals, dispatch, departures, communication.
  void run_round() {
    const auto n_servers = static_cast<std::size_t>(config_.num_servers);
    const std::int64_t t = round_;

    if (options_.check_invariants) start_lengths_.assign(lengths_.begin(), lengths_.end());

    // Phase 1.
    sample_arrivals(arrivals_rng_, config_, batch_);
    total_arrivals_ += batch_.total;

    // Phase 2. Decisions use the start-of-round state.
    dispatched_.assign(n_servers, 0);
    links_.clear();
    const bool complete_view = config_.policy.info == InfoKind::Complete;
    if (complete_view && uses_water_level()) sorted_.assign(lengths_);
    for (std::size_t m = 0; m < batch_.per_dispatcher.size(); ++m) {
      const std::int64_t a_m = batch_.per_dispatcher[m];
      if (a_m == 0) continue;
      decide(m, a_m);
      targets_.assign(decision_.targets().begin(), decision_.targets().end());
      std::sort(targets_.begin(), targets_.end());
      for (std::int32_t n : targets_) {
        const auto s = static_cast<std::size_t>(n);
        incoming_[s].emplace_back(static_cast<std::int32_t>(m), decision_.count(s));
        dispatched_[s] += decision_.count(s);
        links_.push_back(Link{static_cast<std::int32_t>(m), n});
      }
    }
    for (std::size_t s = 0; s < n_servers; ++s) enqueue(s, t);

    // Phase 3.
    sample_services(services_rng_, config_, services_);
    std::int64_t queue_sum = 0;
    for (std::size_t s = 0; s < n_servers; ++s) {
      serve(s, services_[s], t);
      if (options_.check_invariants) {
        const QueueLength expected =
            std::max<QueueLength>(0, start_lengths_[s] + dispatched_[s] - services_[s]);
        if (lengths_[s] != expected || static_cast<QueueLength>(queues_[s].size()) != lengths_[s]) {
          throw std::logic_error("queue recurrence violated at server " + std::to_string(s));
        }
      }
      queue_sum += lengths_[s];
    }
    metrics_.queue_sum_series.push_back(queue_sum);

    // Phase 4.
    communicate(t);
    ++round_;
  }

  void run(std::int64_t rounds) {
    for (std::int64_t i = 0; i < rounds; ++i) run_round();
  }

  ExperimentResult result() const {
    ExperimentResult r;
    r.config = config_;
    r.measured_jobs = metrics_.jobs_completed;
    r.total_arrivals = total_arrivals_;
    r.total_completions = total_completions_;
    r.final_queue_mass = std::accumulate(lengths_.begin(), lengths_.end(), QueueLength{0});
    r.links_established = metrics_.links_established;
    const auto& series = metrics_.queue_sum_series;
    if (!series.empty()) {
      long double all = 0;
      for (auto v : series) all += v;
      r.stability_avg = static_cast<double>(all / series.size());
      const std::size_t half = series.size() / 2;
      long double tail = 0;
      for (std::size_t i = half; i < series.size(); ++i) tail += series[i];
      r.second_half_avg = static_cast<double>(tail / (series.size() - half));
    }
    const auto& hist = metrics_.response_histogram;
    r.response_histogram = hist;
    if (metrics_.jobs_completed > 0) {
      r.mean_response = histogram_mean(hist);
      r.percentiles.p50 = static_cast<double>(histogram_quantile(hist, 0.50));
      r.percentiles.p90 = static_cast<double>(histogram_quantile(hist, 0.90));
      r.percentiles.p95 = static_cast<double>(histogram_quantile(hist, 0.95));
      r.percentiles.p99 = static_cast<double>(histogram_quantile(hist, 0.99));
      r.percentiles.p999 = static_cast<double>(histogram_quantile(hist, 0.999));
      r.ccdf = ccdf_points(hist);
    }
    return r;
  }

 private:
  bool uses_water_level() const {
    const auto k = config_.policy.kind;
    return k == PolicyKind::STWF || k == PolicyKind::UTWF || k == PolicyKind::WFiE;
  }

  std::span<const QueueLength> view_for(std::size_t m) const {
    if (config_.policy.info == InfoKind::Complete) return lengths_;
    return info_.dispatcher_views[m].estimates();
  }

  void decide(std::size_t m, std::int64_t a_m) {
    const auto n_servers = static_cast<std::size_t>(config_.num_servers);
    const auto num_d = static_cast<std::int64_t>(config_.num_dispatchers);
    const bool split = config_.splittable;
    const PolicySpec& policy = config_.policy;
    switch (policy.kind) {
      case PolicyKind::Random:
        random_dispatch(n_servers, a_m, split, policy_rng_, decision_);
        return;
      case PolicyKind::JSQ:
        jsq_dispatch(view_for(m), a_m, split, policy_rng_, decision_, scratch_);
        return;
      case PolicyKind::JSQd:
        jsqd_dispatch(view_for(m), a_m, policy.d, split, policy_rng_, decision_, scratch_);
        return;
      case PolicyKind::JIQ:
        jiq_dispatch(idle_lists_[m], n_servers, a_m, split, policy_rng_, decision_);
        return;
      case PolicyKind::LSQSample:
        lsq_dispatch(lsq_views_[m], a_m, split, policy_rng_, decision_, scratch_);
        return;
      case PolicyKind::WFiE:
      case PolicyKind::STWF:
      case PolicyKind::UTWF:
        break;
    }
    const auto view = view_for(m);
    if (policy.info != InfoKind::Complete) sorted_.assign(view);
    // Each dispatcher estimates the round's total arrivals as M a_m.
    if (policy.kind == PolicyKind::STWF) {
      stwf_scaled(view, sorted_, num_d * a_m, scaled_);
    } else if (policy.kind == PolicyKind::WFiE) {
      wfie_scaled(view, sorted_, num_d * a_m, scaled_);
    } else {
      utwf_scaled(view, sorted_, a_m, num_d, scaled_);
    }
    scaled_.to_doubles(scratch_.probs);
    sample_decision(scratch_.probs, a_m, split, policy_rng_, decision_, scratch_);
  }

  void enqueue(std::size_t s, std::int64_t t) {
    auto& in = incoming_[s];
    if (in.empty()) return;
    auto& q = queues_[s];
    if (in.size() == 1) {
      for (std::int64_t j = 0; j < in.front().second; ++j) q.push_back(QueuedJob{t, in.front().first});
    } else {
      // Random interleaving of the jobs from different dispatchers.
      order_.clear();
      for (const auto& [d, c] : in) order_.insert(order_.end(), static_cast<std::size_t>(c), d);
      interleave_rng_.shuffle(std::span<std::int32_t>(order_));
      for (std::int32_t d : order_) q.push_back(QueuedJob{t, d});
    }
    lengths_[s] = static_cast<QueueLength>(q.size());
    if (!idle_token_free_.empty()) idle_token_free_[s] = true;
    in.clear();
  }

  void serve(std::size_t s, std::int64_t capacity, std::int64_t t) {
    auto& q = queues_[s];
    const std::int64_t done = std::min<std::int64_t>(capacity, static_cast<std::int64_t>(q.size()));
    const std::int64_t warmup = config_.warmup_rounds();
    for (std::int64_t j = 0; j < done; ++j) {
      const QueuedJob job = q.front();
      q.pop_front();
      if (job.arrival_round >= warmup) metrics_.record_response(t - job.arrival_round + 1);
      if (options_.on_completion) {
        options_.on_completion(JobRecord{job.arrival_round, job.dispatcher, static_cast<std::int32_t>(s), t});
      }
    }
    total_completions_ += done;
    lengths_[s] = static_cast<QueueLength>(q.size());
  }

  void communicate(std::int64_t t) {
    const auto n_servers = static_cast<std::size_t>(config_.num_servers);
    metrics_.links_established += static_cast<std::int64_t>(links_.size());
    switch (config_.policy.kind) {
      case PolicyKind::JIQ:
        // An idle server holding its token notifies one random dispatcher.
        for (std::size_t s = 0; s < n_servers; ++s) {
          if (lengths_[s] == 0 && idle_token_free_[s]) {
            idle_lists_[comm_rng_.index(idle_lists_.size())].push(s);
            idle_token_free_[s] = false;
            ++metrics_.links_established;
          }
        }
        break;
      case PolicyKind::LSQSample:
        refresh_sampled(lsq_views_, lengths_, static_cast<std::size_t>(config_.policy.d), t, comm_rng_,
                        sample_scratch_, sampled_);
        metrics_.links_established += config_.num_dispatchers * static_cast<std::int64_t>(config_.policy.d);
        break;
      default:
        break;
    }
    if (config_.policy.info != InfoKind::Complete) {
      const std::size_t links =
          end_of_round_update(info_, lengths_, links_, t, comm_rng_, sample_scratch_, sampled_);
      metrics_.links_established += static_cast<std::int64_t>(links - links_.size());
    }
  }

  SystemConfig config_;
  SimulationOptions options_;
  Rng arrivals_rng_;
  Rng services_rng_;
  Rng policy_rng_;
  Rng comm_rng_;
  Rng interleave_rng_;

  std::int64_t round_ = 0;
  std::vector<std::deque<QueuedJob>> queues_;
  std::vector<QueueLength> lengths_;
  std::vector<std::vector<std::pair<std::int32_t, std::int64_t>>> incoming_;
  std::vector<IdleList> idle_lists_;
  std::vector<bool> idle_token_free_;
  std::vector<LocalView> lsq_views_;
  InfoState info_;
  MetricsAccumulator metrics_;
  std::int64_t total_arrivals_ = 0;
  std::int64_t total_completions_ = 0;

  // Per-round buffers.
  ArrivalBatch batch_;
  std::vector<std::int64_t> services_;
  std::vector<std::int64_t> dispatched_;
  std::vector<QueueLength> start_lengths_;
  std::vector<Link> links_;
  std::vector<std::int32_t> targets_;
  std::vector<std::int32_t> order_;
  DispatchDecision decision_;
  SortedQueues sorted_;
  ScaledProbabilities scaled_;
  PolicyScratch scratch_;
  std::vector<std::size_t> sample_scratch_;
  std::vector<std::size_t> sampled_;
};

/// Runs `config.rounds` rounds from empty queues.
inline ExperimentResult run_simulation(const SystemConfig& config, SimulationOptions options = {}) {
  Simulation sim(config, std::move(options));
  sim.run(config.rounds);
  return sim.result();
}

/// Runs independent configurations on up to `threads` workers. Results come
/// back in input order regardless of scheduling.
inline std::vector<ExperimentResult> run_many(const std::vector<SystemConfig>& configs, unsigned threads = 1) {
  std::vector<ExperimentResult> results(configs.size());
  if (threads <= 1 || configs.size() <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) results[i] = run_simulation(configs[i]);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_simulation(configs[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned count = std::min<unsigned>(threads, static_cast<unsigned>(configs.size()));
  for (unsigned i = 0; i < count; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  return results;
}

}  // namespace twf
