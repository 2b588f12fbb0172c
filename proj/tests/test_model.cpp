#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "twf/model.hpp"

using namespace twf;

namespace {

SystemConfig base(double lambda, int m, int n = 10, double mu = 0.5) {
  SystemConfig c;
  c.num_servers = n;
  c.num_dispatchers = m;
  c.arrival_rate = lambda;
  c.service_param = mu;
  return c;
}

}  // namespace

TEST(QueueVector, RejectsNegative) {
  EXPECT_THROW(QueueVector({1, -1}), std::invalid_argument);
  const QueueVector q{3, 0, 2};
  EXPECT_EQ(q.size(), 3U);
  EXPECT_EQ(q.total(), 5);
}

TEST(JobRecord, ResponseTimeCountsArrivalRound) {
  EXPECT_EQ((JobRecord{4, 0, 1, 4}).response_time(), 1);
  EXPECT_EQ((JobRecord{4, 0, 1, 9}).response_time(), 6);
}

TEST(Arrivals, ZeroRateGivesEmptyBatch) {
  Rng rng(1);
  const auto cfg = base(0.0, 4);
  for (int i = 0; i < 100; ++i) {
    const auto b = sample_arrivals(rng, cfg);
    EXPECT_EQ(b.total, 0);
    EXPECT_EQ(b.per_dispatcher, std::vector<std::int64_t>(4, 0));
  }
}

TEST(Arrivals, MeanWithinOnePercent) {
  Rng rng(2);
  auto cfg = base(2.0, 10, 100);
  ArrivalBatch b;
  double sum = 0;
  const int rounds = 1000000;
  for (int i = 0; i < rounds; ++i) {
    sample_arrivals(rng, cfg, b);
    std::int64_t s = 0;
    for (auto a : b.per_dispatcher) s += a;
    ASSERT_EQ(s, b.total);
    sum += static_cast<double>(b.total);
  }
  EXPECT_NEAR(sum / (rounds * 10.0), 2.0, 0.02);
}

TEST(Arrivals, ZeroMassMatchesPoissonPmf) {
  Rng rng(3);
  const auto cfg = base(1.0, 1, 2);
  int zeros = 0;
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) zeros += sample_arrivals(rng, cfg).total == 0;
  EXPECT_NEAR(zeros / static_cast<double>(draws), std::exp(-1.0), 0.003);
}

TEST(Services, MeanWithinOnePercent) {
  Rng rng(4);
  const auto cfg = base(0.1, 1, 1000, 0.5);
  double sum = 0;
  for (int i = 0; i < 1000; ++i) {
    for (auto s : sample_services(rng, cfg)) sum += static_cast<double>(s);
  }
  EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
}

TEST(Services, RejectsBadMu) {
  Rng rng(4);
  auto cfg = base(0.1, 1);
  cfg.service_param = 1.0;
  EXPECT_THROW(sample_services(rng, cfg), std::invalid_argument);
}

TEST(Services, SmallMuMostlyZero) {
  Rng rng(5);
  auto cfg = base(0.1, 1, 20, 0.01);
  int all_zero = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto s = sample_services(rng, cfg);
    all_zero += std::all_of(s.begin(), s.end(), [](auto v) { return v == 0; });
  }
  EXPECT_GE(all_zero / 10000.0, std::pow(0.99, 20) - 0.02);
}

TEST(Load, HandArithmetic) {
  const auto cfg = base(2.0, 10, 100, 0.9);
  EXPECT_NEAR(cfg.load(), 20.0 / 900.0, 1e-15);
}

TEST(Load, RoundTrip) {
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    SystemConfig c;
    c.num_servers = 1 + static_cast<int>(rng.below(200));
    c.num_dispatchers = 1 + static_cast<int>(rng.below(30));
    c.service_param = 0.05 + 0.9 * rng.uniform();
    c.target_load = 0.99 * rng.uniform();
    SystemConfig back = c;
    back.target_load.reset();
    back.arrival_rate = c.lambda();
    EXPECT_NEAR(back.load(), *c.target_load, 1e-12);
  }
}

TEST(Determinism, SameSeedSameStreams) {
  auto cfg = base(3.0, 5, 20);
  Rng a = Rng::stream(77, "arrivals"), b = Rng::stream(77, "arrivals");
  Rng sa = Rng::stream(77, "services"), sb = Rng::stream(77, "services");
  for (int i = 0; i < 1000; ++i) {
    ASSERT_EQ(sample_arrivals(a, cfg).per_dispatcher, sample_arrivals(b, cfg).per_dispatcher);
    ASSERT_EQ(sample_services(sa, cfg), sample_services(sb, cfg));
  }
}

TEST(Config, ParsesAllKeys) {
  const auto cfg = parse_config_string(
      "# comment\n"
      "n_servers = 100\nm_dispatchers = 10\nrho = 0.9  # trailing\nmu = 0.8\nrounds = 500\n"
      "warmup = 50\neta = 0.25\npolicy = l-utwf\npolicy_param = 3\nsplittable = false\nseed = 99\n");
  EXPECT_EQ(cfg.num_servers, 100);
  EXPECT_EQ(cfg.num_dispatchers, 10);
  EXPECT_DOUBLE_EQ(cfg.load(), 0.9);
  EXPECT_DOUBLE_EQ(cfg.lambda(), 0.9 * 100 * 4.0 / 10);
  EXPECT_EQ(cfg.rounds, 500);
  EXPECT_EQ(cfg.warmup_rounds(), 50);
  EXPECT_DOUBLE_EQ(cfg.eta, 0.25);
  EXPECT_EQ(cfg.policy.kind, PolicyKind::UTWF);
  EXPECT_EQ(cfg.policy.info, InfoKind::PartialLocal);
  EXPECT_FALSE(cfg.splittable);
  EXPECT_EQ(cfg.seed, 99U);
}

TEST(Config, Defaults) {
  const auto cfg = parse_config_string("n_servers = 4\nm_dispatchers = 2\nlambda = 0.5\n");
  EXPECT_DOUBLE_EQ(cfg.service_param, 0.5);
  EXPECT_EQ(cfg.rounds, 100000);
  EXPECT_EQ(cfg.warmup_rounds(), 10000);
  EXPECT_EQ(cfg.policy.kind, PolicyKind::STWF);
  EXPECT_TRUE(cfg.splittable);
}

namespace {

std::string error_key(const std::string& text) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

}  // namespace

TEST(Config, ErrorsNameTheKey) {
  const std::string ok = "n_servers = 4\nm_dispatchers = 2\n";
  EXPECT_EQ(error_key(ok + "rho = 1.2\n"), "rho");
  EXPECT_EQ(error_key(ok + "lambda = 1\nrho = 0.5\n"), "lambda");
  EXPECT_EQ(error_key(ok), "lambda");
  EXPECT_EQ(error_key(ok + "rho = 0.5\nbogus = 1\n"), "bogus");
  EXPECT_EQ(error_key(ok + "rho = 0.5\nmu = 1.5\n"), "mu");
  EXPECT_EQ(error_key(ok + "rho = 0.5\neta = 0\n"), "eta");
  EXPECT_EQ(error_key(ok + "rho = 0.5\npolicy = nope\n"), "policy");
  EXPECT_EQ(error_key(ok + "rho = 0.5\npolicy = utwf\n"), "splittable");
  EXPECT_EQ(error_key(ok + "rho = 0.5\npolicy = stwf\nsplittable = false\n"), "splittable");
  EXPECT_EQ(error_key(ok + "rho = 0.5\npolicy = jsq2\npolicy_param = 9\n"), "policy_param");
  EXPECT_EQ(error_key(ok + "rho = 0.5\nrounds = 10\nwarmup = 11\n"), "warmup");
  EXPECT_EQ(error_key(ok + "rho = 0.5\nseed = x\n"), "seed");
  EXPECT_EQ(error_key(ok + "rho = 0.5\nrho = 0.6\n"), "rho");
  EXPECT_EQ(error_key("n_servers = 0\nm_dispatchers = 2\nrho = 0.5\n"), "n_servers");
}

TEST(Config, AdmissibilityMessage) {
  try {
    parse_config_string("n_servers = 4\nm_dispatchers = 2\nrho = 1.2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("admissibility violated"), std::string::npos);
  }
}
