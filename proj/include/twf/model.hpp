#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "twf/policy_spec.hpp"
#include "twf/rng.hpp"

namespace twf {

using QueueLength = std::int64_t;

/// Queue lengths of the N servers at a round boundary.
class QueueVector {
 public:
  QueueVector() = default;
  explicit QueueVector(std::vector<QueueLength> lengths) : lengths_(std::move(lengths)) {
    for (QueueLength q : lengths_) {
      if (q < 0) throw std::invalid_argument("QueueVector: negative queue length");
    }
  }
  QueueVector(std::initializer_list<QueueLength> lengths)
      : QueueVector(std::vector<QueueLength>(lengths)) {}

  std::size_t size() const { return lengths_.size(); }
  QueueLength operator[](std::size_t n) const { return lengths_[n]; }
  std::span<const QueueLength> view() const { return lengths_; }
  const std::vector<QueueLength>& lengths() const { return lengths_; }
  QueueLength total() const { return std::accumulate(lengths_.begin(), lengths_.end(), QueueLength{0}); }

  friend bool operator==(const QueueVector&, const QueueVector&) = default;

 private:
  std::vector<QueueLength> lengths_;
};

struct ArrivalBatch {
  std::vector<std::int64_t> per_dispatcher;
  std::int64_t total = 0;
};

struct JobRecord {
  std::int64_t arrival_round = 0;
  std::int32_t dispatcher = 0;
  std::int32_t server = 0;
  std::int64_t completion_round = 0;

  /// A job completed in its arrival round has response time 1.
  std::int64_t response_time() const { return completion_round - arrival_round + 1; }
};

/// Configuration errors name the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct SystemConfig {
  int num_servers = 0;
  int num_dispatchers = 0;
  std::optional<double> arrival_rate;  // lambda, per dispatcher per round
  std::optional<double> target_load;   // rho
  double service_param = 0.5;          // mu, Geometric parameter
  std::int64_t rounds = 100000;
  std::optional<std::int64_t> warmup;  // defaults to rounds / 10
  double eta = 1.0;
  PolicySpec policy;
  bool splittable = true;
  std::uint64_t seed = 1;

  double mean_service() const { return service_param / (1.0 - service_param); }

  double lambda() const {
    if (arrival_rate) return *arrival_rate;
    return target_load.value_or(0.0) * num_servers * mean_service() / num_dispatchers;
  }

  double load() const {
    if (target_load) return *target_load;
    return num_dispatchers * arrival_rate.value_or(0.0) / (num_servers * mean_service());
  }

  std::int64_t warmup_rounds() const { return warmup.value_or(rounds / 10); }

  /// Throws ConfigError on the first violated constraint.
  void validate() const {
    if (num_servers < 1) throw ConfigError("n_servers", "must be a positive integer");
    if (num_dispatchers < 1) throw ConfigError("m_dispatchers", "must be a positive integer");
    if (arrival_rate.has_value() == target_load.has_value()) {
      throw ConfigError("lambda", "exactly one of lambda and rho must be given");
    }
    if (!(service_param > 0.0 && service_param < 1.0)) throw ConfigError("mu", "must lie in (0,1)");
    if (arrival_rate && !(*arrival_rate >= 0.0 && std::isfinite(*arrival_rate))) {
      throw ConfigError("lambda", "must be a finite non-negative rate");
    }
    if (target_load && !(*target_load >= 0.0)) throw ConfigError("rho", "must be non-negative");
    if (!(load() < 1.0)) {
      throw ConfigError(target_load ? "rho" : "lambda",
                        "admissibility violated (load " + std::to_string(load()) + " >= 1)");
    }
    if (rounds < 1) throw ConfigError("rounds", "must be a positive integer");
    if (warmup_rounds() < 0 || warmup_rounds() > rounds) {
      throw ConfigError("warmup", "must lie in [0, rounds]");
    }
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta", "must lie in (0,1]");
    if (policy.sampled() && policy.d < 1) throw ConfigError("policy_param", "must be >= 1");
    if (policy.kind == PolicyKind::JSQd && policy.d > num_servers) {
      throw ConfigError("policy_param", "probe count exceeds n_servers");
    }
    if (policy.kind == PolicyKind::LSQSample && policy.d > num_servers) {
      throw ConfigError("policy_param", "refresh count exceeds n_servers");
    }
    if (policy.forces_splittable() && !splittable) {
      throw ConfigError("splittable", "stwf variants require splittable = true");
    }
    if (policy.forces_unsplittable() && splittable) {
      throw ConfigError("splittable", "utwf variants require splittable = false");
    }
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "cannot parse '" + text + "'");
  return value;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

}  // namespace detail

/// Flat `key = value` document; `#` starts a comment. Keys are those of
/// SystemConfig plus any listed in `extra_keys`, which are returned untouched.
inline SystemConfig parse_config(std::istream& in, std::map<std::string, std::string>* extras = nullptr,
                                 std::span<const std::string_view> extra_keys = {}) {
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    }
    std::string key = detail::trim(std::string_view(body).substr(0, eq));
    std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (kv.count(key)) throw ConfigError(key, "duplicate key");
    kv.emplace(std::move(key), std::move(value));
  }

  SystemConfig cfg;
  std::string policy_name = "stwf";
  std::optional<int> policy_param;
  for (const auto& [key, value] : kv) {
    if (key == "n_servers") {
      cfg.num_servers = detail::parse_number<int>(key, value);
    } else if (key == "m_dispatchers") {
      cfg.num_dispatchers = detail::parse_number<int>(key, value);
    } else if (key == "lambda") {
      cfg.arrival_rate = detail::parse_number<double>(key, value);
    } else if (key == "rho") {
      cfg.target_load = detail::parse_number<double>(key, value);
    } else if (key == "mu") {
      cfg.service_param = detail::parse_number<double>(key, value);
    } else if (key == "rounds") {
      cfg.rounds = detail::parse_number<std::int64_t>(key, value);
    } else if (key == "warmup") {
      cfg.warmup = detail::parse_number<std::int64_t>(key, value);
    } else if (key == "eta") {
      cfg.eta = detail::parse_number<double>(key, value);
    } else if (key == "policy") {
      policy_name = value;
    } else if (key == "policy_param") {
      policy_param = detail::parse_number<int>(key, value);
    } else if (key == "splittable") {
      cfg.splittable = detail::parse_bool(key, value);
    } else if (key == "seed") {
      cfg.seed = detail::parse_number<std::uint64_t>(key, value);
    } else if (std::find(extra_keys.begin(), extra_keys.end(), key) != extra_keys.end()) {
      if (extras) (*extras)[key] = value;
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  try {
    cfg.policy = parse_policy(policy_name, policy_param.value_or(2));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(policy_param && *policy_param < 1 ? "policy_param" : "policy", e.what());
  }
  cfg.validate();
  return cfg;
}

inline SystemConfig load_config(const std::string& path, std::map<std::string, std::string>* extras = nullptr,
                                std::span<const std::string_view> extra_keys = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  return parse_config(in, extras, extra_keys);
}

inline SystemConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

/// i.i.d. Poisson(lambda) arrivals at every dispatcher, written into `batch`.
inline void sample_arrivals(Rng& rng, const SystemConfig& config, ArrivalBatch& batch) {
  const double lambda = config.lambda();
  batch.per_dispatcher.resize(static_cast<std::size_t>(config.num_dispatchers));
  batch.total = 0;
  for (auto& a : batch.per_dispatcher) {
    a = rng.poisson(lambda);
    batch.total += a;
  }
}

inline ArrivalBatch sample_arrivals(Rng& rng, const SystemConfig& config) {
  ArrivalBatch batch;
  sample_arrivals(rng, config, batch);
  return batch;
}

/// i.i.d. Geometric(mu) service capacities, support starting at 0.
inline void sample_services(Rng& rng, const SystemConfig& config, std::vector<std::int64_t>& out) {
  if (!(config.service_param > 0.0 && config.service_param < 1.0)) {
    throw std::invalid_argument("sample_services: mu must lie in (0,1)");
  }
  out.resize(static_cast<std::size_t>(config.num_servers));
  for (auto& s : out) s = rng.geometric(config.service_param);
}

inline std::vector<std::int64_t> sample_services(Rng& rng, const SystemConfig& config) {
  std::vector<std::int64_t> out;
  sample_services(rng, config, out);
  return out;
}

}  // namespace twf
