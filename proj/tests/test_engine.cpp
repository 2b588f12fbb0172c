#include <gtest/gtest.h>

#include <map>
#include <set>
#include <tuple>
#include <vector>

#include "twf/engine.hpp"

using namespace twf;

namespace {

SystemConfig small(const std::string& policy, bool splittable, double rho = 0.8) {
  SystemConfig c;
  c.num_servers = 12;
  c.num_dispatchers = 3;
  c.target_load = rho;
  c.rounds = 3000;
  c.policy = parse_policy(policy);
  c.splittable = splittable;
  c.eta = 0.25;
  c.seed = 17;
  return c;
}

struct Variant {
  const char* policy;
  bool splittable;
};

const Variant kVariants[] = {
    {"random", true}, {"random", false}, {"jsq", true},     {"jsq", false},     {"jsq2", true},
    {"jsq2", false},  {"jiq", true},     {"jiq", false},    {"lsq2", true},     {"lsq2", false},
    {"wfie", true},   {"wfie", false},   {"stwf", true},    {"utwf", false},    {"l-stwf", true},
    {"l-utwf", false}, {"stwf-ts", true}, {"utwf-ts", false},
};

}  // namespace

TEST(Ccdf, Examples) {
  const std::vector<std::int64_t> ones{0, 10};
  EXPECT_DOUBLE_EQ(ccdf_at(ones, 0), 1.0);
  EXPECT_DOUBLE_EQ(ccdf_at(ones, 1), 0.0);
  const std::vector<std::int64_t> h{0, 3, 0, 0, 0, 1};
  EXPECT_DOUBLE_EQ(ccdf_at(h, 1), 0.25);
  EXPECT_DOUBLE_EQ(ccdf_at(h, 4), 0.25);
  EXPECT_DOUBLE_EQ(ccdf_at(h, 5), 0.0);
  const auto pts = ccdf_points(h);
  ASSERT_EQ(pts.size(), 3U);
  EXPECT_EQ(pts[0], (std::pair<std::int64_t, double>{0, 1.0}));
  EXPECT_EQ(pts[1], (std::pair<std::int64_t, double>{1, 0.25}));
  EXPECT_EQ(pts[2], (std::pair<std::int64_t, double>{5, 0.0}));
  EXPECT_THROW(ccdf_points(std::vector<std::int64_t>{0, 0}), std::invalid_argument);
}

TEST(Ccdf, PercentileAgreesWithOrderStatistic) {
  Rng rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::int64_t> samples(1 + rng.below(3000));
    std::vector<std::int64_t> hist(60, 0);
    for (auto& s : samples) {
      s = 1 + static_cast<std::int64_t>(rng.below(59));
      ++hist[static_cast<std::size_t>(s)];
    }
    std::sort(samples.begin(), samples.end());
    const auto idx = static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(samples.size()))) - 1;
    const std::int64_t direct = samples[idx];
    // First tau whose ccdf drops to 1e-2 or below.
    std::int64_t crossing = -1;
    for (const auto& [tau, frac] : ccdf_points(hist)) {
      if (frac <= 1e-2 + 1e-12) {
        crossing = tau;
        break;
      }
    }
    EXPECT_LE(std::abs(crossing - direct), 1);
    EXPECT_EQ(histogram_quantile(hist, 0.99), direct);
  }
}

TEST(Engine, RecurrenceAndWorkConservation) {
  for (const auto& v : kVariants) {
    SimulationOptions opts;
    opts.check_invariants = true;
    std::map<std::size_t, std::int64_t> served;
    opts.on_completion = [&](const JobRecord& r) { ++served[static_cast<std::size_t>(r.server)]; };
    Simulation sim(small(v.policy, v.splittable), opts);
    std::vector<QueueLength> prev(12, 0);
    for (int t = 0; t < 500; ++t) {
      served.clear();
      sim.run_round();
      for (std::size_t s = 0; s < 12; ++s) {
        const auto offered = prev[s] + sim.last_dispatched()[s];
        const auto expect = std::max<QueueLength>(0, offered - sim.last_services()[s]);
        ASSERT_EQ(sim.queue_lengths()[s], expect) << v.policy;
        ASSERT_EQ(served[s], std::min<std::int64_t>(offered, sim.last_services()[s])) << v.policy;
      }
      prev.assign(sim.queue_lengths().begin(), sim.queue_lengths().end());
    }
  }
}

TEST(Engine, UnsplittableSendsEachBatchToOneServer) {
  for (const auto& v : kVariants) {
    if (v.splittable) continue;
    SimulationOptions opts;
    std::map<std::pair<std::int64_t, std::int32_t>, std::set<std::int32_t>> where;
    opts.on_completion = [&](const JobRecord& r) { where[{r.arrival_round, r.dispatcher}].insert(r.server); };
    run_simulation(small(v.policy, false), opts);
    for (const auto& [k, servers] : where) ASSERT_EQ(servers.size(), 1U) << v.policy;
  }
}

TEST(Engine, ConservationAndFifo) {
  for (const auto& v : kVariants) {
    SimulationOptions opts;
    std::vector<std::int64_t> last_arrival(12, -1);
    std::int64_t measured = 0;
    const auto cfg = small(v.policy, v.splittable, 0.9);
    opts.on_completion = [&](const JobRecord& r) {
      auto& last = last_arrival[static_cast<std::size_t>(r.server)];
      ASSERT_GE(r.arrival_round, last);
      last = r.arrival_round;
      ASSERT_GE(r.completion_round, r.arrival_round);
      if (r.arrival_round >= cfg.warmup_rounds()) ++measured;
    };
    const auto res = run_simulation(cfg, opts);
    EXPECT_EQ(res.total_arrivals, res.total_completions + res.final_queue_mass) << v.policy;
    EXPECT_EQ(res.measured_jobs, measured) << v.policy;
    std::int64_t mass = 0;
    for (auto h : res.response_histogram) mass += h;
    EXPECT_EQ(mass, measured) << v.policy;
    EXPECT_GE(res.mean_response, 1.0) << v.policy;
    for (std::size_t i = 1; i < res.ccdf.size(); ++i) EXPECT_LE(res.ccdf[i].second, res.ccdf[i - 1].second);
  }
}

TEST(Engine, SameRoundServiceScoresOne) {
  SystemConfig c = small("jsq", true, 0.2);
  c.warmup = 0;
  SimulationOptions opts;
  bool seen = false;
  opts.on_completion = [&](const JobRecord& r) {
    if (r.completion_round == r.arrival_round) {
      EXPECT_EQ(r.response_time(), 1);
      seen = true;
    }
  };
  const auto res = run_simulation(c, opts);
  EXPECT_TRUE(seen);
  EXPECT_GT(res.response_histogram.at(1), 0);
  EXPECT_EQ(res.response_histogram.at(0), 0);
}

TEST(Engine, NoArrivalsDrains) {
  SystemConfig c = small("jsq", true);
  c.target_load.reset();
  c.arrival_rate = 0.0;
  Simulation sim(c);
  sim.run(10);
  EXPECT_EQ(sim.total_arrivals(), 0);
  for (auto q : sim.queue_lengths()) EXPECT_EQ(q, 0);
}

TEST(Engine, WarmupCoveringRunGivesEmptyHistogram) {
  SystemConfig c = small("stwf", true);
  c.rounds = 200;
  c.warmup = 200;
  const auto res = run_simulation(c);
  EXPECT_EQ(res.measured_jobs, 0);
  EXPECT_TRUE(res.ccdf.empty());
  EXPECT_GT(res.stability_avg, 0.0);
}

TEST(Engine, Deterministic) {
  for (const auto& v : kVariants) {
    const auto a = run_simulation(small(v.policy, v.splittable));
    const auto b = run_simulation(small(v.policy, v.splittable));
    EXPECT_EQ(a.response_histogram, b.response_histogram) << v.policy;
    EXPECT_EQ(a.stability_avg, b.stability_avg) << v.policy;
    EXPECT_EQ(a.links_established, b.links_established) << v.policy;
  }
}

TEST(Engine, ParallelRunsMatchSerial) {
  std::vector<SystemConfig> cfgs;
  for (std::uint64_t s = 1; s <= 4; ++s) {
    auto c = small("stwf", true);
    c.seed = s;
    cfgs.push_back(c);
  }
  const auto serial = run_many(cfgs, 1);
  const auto parallel = run_many(cfgs, 3);
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    EXPECT_EQ(serial[i].response_histogram, parallel[i].response_histogram);
  }
}

TEST(Engine, FullEtaMatchesCompleteInformation) {
  for (auto [local, complete, split] : {std::tuple{"l-utwf", "utwf", false}, std::tuple{"l-stwf", "stwf", true}}) {
    auto a = small(local, split, 0.95);
    auto b = small(complete, split, 0.95);
    a.eta = 1.0;
    const auto ra = run_simulation(a);
    const auto rb = run_simulation(b);
    EXPECT_EQ(ra.response_histogram, rb.response_histogram) << local;
    EXPECT_EQ(ra.stability_avg, rb.stability_avg) << local;
  }
}

TEST(Engine, StableAtModerateLoad) {
  SystemConfig c;
  c.num_servers = 10;
  c.num_dispatchers = 2;
  c.target_load = 0.5;
  c.rounds = 10000;
  c.policy = parse_policy("stwf");
  const auto res = run_simulation(c);
  EXPECT_TRUE(std::isfinite(res.stability_avg));
  EXPECT_NEAR(res.second_half_avg, res.stability_avg, 0.2 * res.stability_avg);
}

TEST(Engine, JiqIdleListsHaveNoDuplicates) {
  Simulation sim(small("jiq", true, 0.5));
  for (int t = 0; t < 300; ++t) {
    sim.run_round();
    for (const auto& list : sim.idle_lists()) {
      const std::set<std::size_t> distinct(list.servers().begin(), list.servers().end());
      ASSERT_EQ(distinct.size(), list.size());
    }
  }
}
