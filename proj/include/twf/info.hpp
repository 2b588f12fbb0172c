#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "twf/model.hpp"
#include "twf/policy_spec.hpp"
#include "twf/rng.hpp"

namespace twf {

inline constexpr std::int64_t kNeverObserved = -1;

/// A party's per-server (estimate, timestamp) array. Entries never observed
/// carry timestamp -1 and estimate 0, i.e. the empty initial system.
class LocalView {
 public:
  LocalView() = default;
  explicit LocalView(std::size_t num_servers)
      : estimates_(num_servers, 0), timestamps_(num_servers, kNeverObserved) {}

  std::size_t size() const { return estimates_.size(); }

  std::span<const QueueLength> estimates() const { return estimates_; }
  std::span<QueueLength> estimates() { return estimates_; }
  std::span<const std::int64_t> timestamps() const { return timestamps_; }

  QueueLength estimate(std::size_t n) const { return estimates_[n]; }
  std::int64_t timestamp(std::size_t n) const { return timestamps_[n]; }

  /// Records an observation. Older observations never overwrite newer ones.
  void observe(std::size_t n, QueueLength value, std::int64_t round) {
    if (round >= timestamps_[n]) {
      estimates_[n] = value;
      timestamps_[n] = round;
    }
  }

  /// Local adjustment (e.g. LSQ self-increment); keeps the timestamp.
  void add_to_estimate(std::size_t n, QueueLength delta) { estimates_[n] += delta; }

  friend bool operator==(const LocalView&, const LocalView&) = default;

 private:
  std::vector<QueueLength> estimates_;
  std::vector<std::int64_t> timestamps_;
};

struct InfoMode {
  InfoKind kind = InfoKind::Complete;
  double eta = 1.0;

  void validate() const {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0,1]");
  }
};

/// Number of servers each dispatcher samples per round: ceil(eta * N).
inline std::size_t sample_count(double eta, std::size_t num_servers) {
  if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in (0,1]");
  // Guard against eta * N landing a hair above an integer in floating point.
  const double raw = eta * static_cast<double>(num_servers);
  auto k = static_cast<std::size_t>(std::ceil(raw - 1e-9));
  return std::clamp<std::size_t>(k, 1, num_servers);
}

/// Entrywise merge keeping the pair with the larger timestamp. On equal
/// timestamps `receiver` keeps its own entry.
inline void merge_into(LocalView& receiver, const LocalView& sender) {
  if (receiver.size() != sender.size()) throw std::invalid_argument("merge_views: length mismatch");
  for (std::size_t n = 0; n < receiver.size(); ++n) {
    if (sender.timestamp(n) > receiver.timestamp(n)) {
      receiver.observe(n, sender.estimate(n), sender.timestamp(n));
    }
  }
}

/// Symmetric merge of two parties that established a link.
inline std::pair<LocalView, LocalView> merge_views(const LocalView& a, const LocalView& b) {
  if (a.size() != b.size()) throw std::invalid_argument("merge_views: length mismatch");
  LocalView a_out = a;
  LocalView b_out = b;
  merge_into(a_out, b);
  merge_into(b_out, a);
  return {std::move(a_out), std::move(b_out)};
}

/// In-place symmetric merge used on every link of a round.
inline void merge_link(LocalView& dispatcher_view, LocalView& server_view) {
  if (dispatcher_view.size() != server_view.size()) {
    throw std::invalid_argument("merge_views: length mismatch");
  }
  for (std::size_t n = 0; n < dispatcher_view.size(); ++n) {
    const auto td = dispatcher_view.timestamp(n);
    const auto ts = server_view.timestamp(n);
    if (td > ts) {
      server_view.observe(n, dispatcher_view.estimate(n), td);
    } else if (ts > td) {
      dispatcher_view.observe(n, server_view.estimate(n), ts);
    }
  }
}

/// One (dispatcher, server) link of the current round.
struct Link {
  std::int32_t dispatcher = 0;
  std::int32_t server = 0;
  friend bool operator==(const Link&, const Link&) = default;
};

/// Per-run partial-information state: dispatcher arrays, and server arrays
/// when timestamps are gossiped.
struct InfoState {
  InfoMode mode;
  std::vector<LocalView> dispatcher_views;
  std::vector<LocalView> server_views;  // only for PartialTimestamped

  InfoState() = default;
  InfoState(InfoMode m, std::size_t num_dispatchers, std::size_t num_servers) : mode(m) {
    mode.validate();
    dispatcher_views.assign(num_dispatchers, LocalView(num_servers));
    if (mode.kind == InfoKind::PartialTimestamped) server_views.assign(num_servers, LocalView(num_servers));
  }
};

/// Phase-4 communication for the partial-information modes.
///
/// `true_queues` are the post-departure lengths of round `round`;
/// `dispatch_links` are the (dispatcher, server) pairs that exchanged jobs
/// this round, sorted by (dispatcher, server). Every dispatcher then samples
/// ceil(eta N) servers without replacement. Local mode overwrites the linked
/// entries with (true length, round). Timestamped mode first stamps every
/// server's own entry, then merges arrays on each dispatch link followed by
/// each sampled link. Returns the number of links established.
inline std::size_t end_of_round_update(InfoState& state, std::span<const QueueLength> true_queues,
                                       std::span<const Link> dispatch_links, std::int64_t round, Rng& rng,
                                       std::vector<std::size_t>& scratch, std::vector<std::size_t>& sampled) {
  state.mode.validate();
  const std::size_t n_servers = true_queues.size();
  const std::size_t k = sample_count(state.mode.eta, n_servers);
  std::size_t links = dispatch_links.size();

  if (state.mode.kind == InfoKind::PartialTimestamped) {
    for (std::size_t n = 0; n < n_servers; ++n) state.server_views[n].observe(n, true_queues[n], round);
    for (const Link& l : dispatch_links) {
      merge_link(state.dispatcher_views[static_cast<std::size_t>(l.dispatcher)],
                 state.server_views[static_cast<std::size_t>(l.server)]);
    }
    for (std::size_t m = 0; m < state.dispatcher_views.size(); ++m) {
      rng.sample_without_replacement(n_servers, k, scratch, sampled);
      std::sort(sampled.begin(), sampled.end());
      for (std::size_t n : sampled) merge_link(state.dispatcher_views[m], state.server_views[n]);
      links += sampled.size();
    }
    return links;
  }

  for (const Link& l : dispatch_links) {
    const auto n = static_cast<std::size_t>(l.server);
    state.dispatcher_views[static_cast<std::size_t>(l.dispatcher)].observe(n, true_queues[n], round);
  }
  for (auto& view : state.dispatcher_views) {
    rng.sample_without_replacement(n_servers, k, scratch, sampled);
    for (std::size_t n : sampled) view.observe(n, true_queues[n], round);
    links += sampled.size();
  }
  return links;
}

inline std::size_t end_of_round_update(InfoState& state, std::span<const QueueLength> true_queues,
                                       std::span<const Link> dispatch_links, std::int64_t round, Rng& rng) {
  std::vector<std::size_t> scratch;
  std::vector<std::size_t> sampled;
  return end_of_round_update(state, true_queues, dispatch_links, round, rng, scratch, sampled);
}

/// LSQ-Sample(d) refresh: each view overwrites `count` uniformly sampled
/// entries with true lengths.
inline void refresh_sampled(std::span<LocalView> views, std::span<const QueueLength> true_queues, std::size_t count,
                            std::int64_t round, Rng& rng, std::vector<std::size_t>& scratch,
                            std::vector<std::size_t>& sampled) {
  for (auto& view : views) {
    rng.sample_without_replacement(true_queues.size(), count, scratch, sampled);
    for (std::size_t n : sampled) view.observe(n, true_queues[n], round);
  }
}

}  // namespace twf
