#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "twf/engine.hpp"
#include "twf/model.hpp"
#include "twf/policy_spec.hpp"
#include "twf/verify.hpp"

// Subcommand bodies for the `twf` tool. Each returns the process exit code.

namespace twf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;

inline constexpr std::string_view kResultSchema = "twf.result/1";
inline constexpr std::string_view kCcdfSchema = "# schema: twf.ccdf/1 tau,ccdf";
inline constexpr std::string_view kSweepSchema =
    "# schema: twf.sweep/1 policy,param,value,seed,mean_response,p50,p90,p95,p99,p999,stability_avg";
inline constexpr std::string_view kCompareSchema =
    "# schema: twf.compare/1 policy,seed,mean_response,p50,p90,p95,p99,p999,stability_avg";
inline constexpr std::string_view kSummarySchema =
    "# schema: twf.summary/1 policy,runs,mean_response,pooled_p50,pooled_p90,pooled_p95,pooled_p99,pooled_p999,"
    "stability_avg";
inline constexpr std::string_view kCompareCcdfSchema = "# schema: twf.compare-ccdf/1 policy,tau,ccdf";

/// Fixed-format number for CSV cells.
inline std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::vector<std::string> split_list(const std::string& text, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = detail::trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

/// "1,2,7" or "1-5" (inclusive), or a mix.
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(text)) {
    const auto dash = item.find('-');
    if (dash != std::string::npos && dash > 0) {
      const auto lo = detail::parse_number<std::uint64_t>("seeds", item.substr(0, dash));
      const auto hi = detail::parse_number<std::uint64_t>("seeds", item.substr(dash + 1));
      if (hi < lo) throw ConfigError("seeds", "empty range '" + item + "'");
      for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    } else {
      seeds.push_back(detail::parse_number<std::uint64_t>("seeds", item));
    }
  }
  if (seeds.empty()) throw ConfigError("seeds", "no seeds given");
  return seeds;
}

inline std::vector<double> parse_values(const std::string& text) {
  std::vector<double> values;
  for (const auto& item : split_list(text)) values.push_back(detail::parse_number<double>("values", item));
  if (values.empty()) throw ConfigError("values", "no values given");
  return values;
}

/// A policy token: a policy id, optionally prefixed `s:` or `u:` to pick the
/// dispatch mode. TWF variants carry their own mode.
struct PolicyChoice {
  std::string label;
  PolicySpec spec;
  bool splittable = true;
};

inline PolicyChoice resolve_policy(const std::string& token, bool default_splittable, int d) {
  PolicyChoice c;
  c.label = token;
  std::string id = token;
  std::optional<bool> mode;
  if (token.size() > 2 && token[1] == ':' && (token[0] == 's' || token[0] == 'u')) {
    mode = token[0] == 's';
    id = token.substr(2);
  }
  try {
    c.spec = parse_policy(id, d);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("policies", e.what());
  }
  c.splittable = mode.value_or(default_splittable);
  if (c.spec.forces_splittable()) c.splittable = true;
  if (c.spec.forces_unsplittable()) c.splittable = false;
  if (mode && *mode != c.splittable) throw ConfigError("policies", "'" + token + "' contradicts its dispatch mode");
  return c;
}

inline SystemConfig with_policy(SystemConfig cfg, const PolicyChoice& choice) {
  cfg.policy = choice.spec;
  cfg.splittable = choice.splittable;
  return cfg;
}

// ---------------------------------------------------------------------------
// Serialization.

inline nlohmann::ordered_json config_json(const SystemConfig& c) {
  nlohmann::ordered_json j;
  j["n_servers"] = c.num_servers;
  j["m_dispatchers"] = c.num_dispatchers;
  j["lambda"] = c.lambda();
  j["rho"] = c.load();
  j["mu"] = c.service_param;
  j["rounds"] = c.rounds;
  j["warmup"] = c.warmup_rounds();
  j["eta"] = c.eta;
  j["policy"] = policy_id(c.policy);
  j["policy_param"] = c.policy.d;
  j["splittable"] = c.splittable;
  j["seed"] = c.seed;
  return j;
}

inline nlohmann::ordered_json result_json(const ExperimentResult& r) {
  nlohmann::ordered_json j;
  j["schema"] = kResultSchema;
  j["config"] = config_json(r.config);
  j["response_time"] = "completion_round - arrival_round + 1, jobs arriving at or after warmup";
  j["mean_response"] = r.mean_response;
  j["percentiles"] = {{"p50", r.percentiles.p50},
                      {"p90", r.percentiles.p90},
                      {"p95", r.percentiles.p95},
                      {"p99", r.percentiles.p99},
                      {"p999", r.percentiles.p999}};
  j["stability_avg"] = r.stability_avg;
  j["second_half_avg"] = r.second_half_avg;
  j["measured_jobs"] = r.measured_jobs;
  j["total_arrivals"] = r.total_arrivals;
  j["total_completions"] = r.total_completions;
  j["final_queue_mass"] = r.final_queue_mass;
  j["links_established"] = r.links_established;
  auto ccdf = nlohmann::ordered_json::array();
  for (const auto& [tau, frac] : r.ccdf) ccdf.push_back({tau, frac});
  j["ccdf"] = std::move(ccdf);
  return j;
}

inline void write_ccdf_csv(std::ostream& os, const std::vector<std::pair<std::int64_t, double>>& ccdf) {
  os << kCcdfSchema << '\n' << "tau,ccdf\n";
  for (const auto& [tau, frac] : ccdf) os << tau << ',' << num(frac) << '\n';
}

inline std::string stats_cells(const ExperimentResult& r) {
  const auto& p = r.percentiles;
  return num(r.mean_response) + ',' + num(p.p50) + ',' + num(p.p90) + ',' + num(p.p95) + ',' + num(p.p99) + ',' +
         num(p.p999) + ',' + num(r.stability_avg);
}

inline std::ofstream open_output(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / name, std::ios::binary);
  if (!out) throw ConfigError("out", "cannot write '" + (dir / name).string() + "'");
  return out;
}

/// Element-wise sum of response histograms.
inline std::vector<std::int64_t> pool_histograms(const std::vector<const ExperimentResult*>& runs) {
  std::vector<std::int64_t> pooled;
  for (const auto* r : runs) {
    if (r->response_histogram.size() > pooled.size()) pooled.resize(r->response_histogram.size(), 0);
    for (std::size_t t = 0; t < r->response_histogram.size(); ++t) pooled[t] += r->response_histogram[t];
  }
  return pooled;
}

// ---------------------------------------------------------------------------
// run

inline int cmd_run(const std::string& config_path, const std::string& out_dir, std::ostream& log = std::cout) {
  const SystemConfig cfg = load_config(config_path);
  const ExperimentResult r = run_simulation(cfg);
  {
    auto out = open_output(out_dir, "result.json");
    out << result_json(r).dump(2) << '\n';
  }
  {
    auto out = open_output(out_dir, "ccdf.csv");
    write_ccdf_csv(out, r.ccdf);
  }
  log << policy_id(cfg.policy) << (cfg.splittable ? " split" : " unsplit") << " rho=" << num(cfg.load())
      << " mean_response=" << num(r.mean_response) << " p99=" << num(r.percentiles.p99) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sweep

struct SweepSpec {
  SystemConfig base;
  std::string param = "load";
  std::vector<double> values;
  std::vector<std::string> policies;
  std::vector<std::uint64_t> seeds;
};

struct SweepOverrides {
  std::optional<std::string> param;
  std::optional<std::string> values;
  std::optional<std::string> policies;
  std::optional<std::string> seeds;
};

inline constexpr std::string_view kSweepKeys[] = {"sweep_param", "sweep_values", "sweep_policies", "sweep_seeds"};

inline SweepSpec load_sweep_spec(const std::string& path, const SweepOverrides& over = {}) {
  std::map<std::string, std::string> extras;
  SweepSpec spec;
  spec.base = load_config(path, &extras, kSweepKeys);
  auto pick = [&](const std::optional<std::string>& flag, const char* key) -> std::optional<std::string> {
    if (flag) return flag;
    if (auto it = extras.find(key); it != extras.end()) return it->second;
    return std::nullopt;
  };
  spec.param = pick(over.param, "sweep_param").value_or("load");
  if (spec.param != "load" && spec.param != "eta") throw ConfigError("sweep_param", "must be load or eta");
  const auto values = pick(over.values, "sweep_values");
  if (!values) throw ConfigError("sweep_values", "missing");
  spec.values = parse_values(*values);
  const auto policies = pick(over.policies, "sweep_policies");
  spec.policies = policies ? split_list(*policies) : std::vector<std::string>{policy_id(spec.base.policy)};
  if (spec.policies.empty()) throw ConfigError("sweep_policies", "no policies given");
  const auto seeds = pick(over.seeds, "sweep_seeds");
  spec.seeds = seeds ? parse_seeds(*seeds) : std::vector<std::uint64_t>{spec.base.seed};
  return spec;
}

/// Expands a sweep into validated cell configurations.
inline std::vector<std::pair<std::string, SystemConfig>> sweep_cells(const SweepSpec& spec) {
  std::vector<std::pair<std::string, SystemConfig>> cells;
  for (const auto& token : spec.policies) {
    const PolicyChoice choice = resolve_policy(token, spec.base.splittable, spec.base.policy.d);
    for (double v : spec.values) {
      for (auto seed : spec.seeds) {
        SystemConfig cfg = with_policy(spec.base, choice);
        cfg.seed = seed;
        if (spec.param == "load") {
          cfg.target_load = v;
          cfg.arrival_rate.reset();
        } else {
          cfg.eta = v;
        }
        cfg.validate();
        cells.emplace_back(choice.label, std::move(cfg));
      }
    }
  }
  return cells;
}

inline int cmd_sweep(const SweepSpec& spec, const std::string& out_dir, unsigned threads,
                     std::ostream& log = std::cout) {
  const auto cells = sweep_cells(spec);
  std::vector<SystemConfig> configs;
  configs.reserve(cells.size());
  for (const auto& [label, cfg] : cells) configs.push_back(cfg);
  const auto results = run_many(configs, threads);

  using Key = std::tuple<std::string, double, std::uint64_t>;
  std::vector<std::pair<Key, std::string>> rows;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const double v = spec.param == "load" ? cells[i].second.load() : cells[i].second.eta;
    rows.emplace_back(Key{cells[i].first, v, cells[i].second.seed},
                      cells[i].first + ',' + spec.param + ',' + num(v) + ',' + std::to_string(cells[i].second.seed) +
                          ',' + stats_cells(results[i]));
  }
  std::sort(rows.begin(), rows.end());
  auto out = open_output(out_dir, "sweep.csv");
  out << kSweepSchema << '\n' << "policy,param,value,seed,mean_response,p50,p90,p95,p99,p999,stability_avg\n";
  for (const auto& [key, row] : rows) out << row << '\n';
  log << "sweep: " << rows.size() << " runs\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// compare

/// Several policies on one configuration with the same seed list.
inline int cmd_compare(const SystemConfig& base, const std::vector<std::string>& policies,
                       const std::vector<std::uint64_t>& seeds, const std::string& out_dir, unsigned threads,
                       std::ostream& log = std::cout) {
  std::vector<PolicyChoice> choices;
  std::vector<SystemConfig> configs;
  for (const auto& token : policies) {
    choices.push_back(resolve_policy(token, base.splittable, base.policy.d));
    for (auto seed : seeds) {
      SystemConfig cfg = with_policy(base, choices.back());
      cfg.seed = seed;
      cfg.validate();
      configs.push_back(std::move(cfg));
    }
  }
  const auto results = run_many(configs, threads);

  auto runs_out = open_output(out_dir, "compare.csv");
  auto summary_out = open_output(out_dir, "summary.csv");
  auto ccdf_out = open_output(out_dir, "ccdf.csv");
  runs_out << kCompareSchema << '\n' << "policy,seed,mean_response,p50,p90,p95,p99,p999,stability_avg\n";
  summary_out << kSummarySchema << '\n'
              << "policy,runs,mean_response,pooled_p50,pooled_p90,pooled_p95,pooled_p99,pooled_p999,stability_avg\n";
  ccdf_out << kCompareCcdfSchema << '\n' << "policy,tau,ccdf\n";
  for (std::size_t p = 0; p < choices.size(); ++p) {
    std::vector<const ExperimentResult*> runs;
    double mean = 0, stab = 0;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& r = results[p * seeds.size() + s];
      runs.push_back(&r);
      mean += r.mean_response;
      stab += r.stability_avg;
      runs_out << choices[p].label << ',' << seeds[s] << ',' << stats_cells(r) << '\n';
    }
    mean /= static_cast<double>(seeds.size());
    stab /= static_cast<double>(seeds.size());
    const auto pooled = pool_histograms(runs);
    std::string pooled_cells;
    for (double q : {0.5, 0.9, 0.95, 0.99, 0.999}) {
      const double v = pooled.empty() ? 0.0 : static_cast<double>(histogram_quantile(pooled, q));
      pooled_cells += ',' + num(v);
    }
    summary_out << choices[p].label << ',' << seeds.size() << ',' << num(mean) << pooled_cells << ',' << num(stab)
                << '\n';
    if (!pooled.empty() && std::accumulate(pooled.begin(), pooled.end(), std::int64_t{0}) > 0) {
      for (const auto& [tau, frac] : ccdf_points(pooled)) {
        ccdf_out << choices[p].label << ',' << tau << ',' << num(frac) << '\n';
      }
    }
    log << choices[p].label << " mean_response=" << num(mean) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// verify

inline int cmd_verify(const std::string& level, std::ostream& log = std::cout,
                      const verify::PolicyUnderTest& pol = {}) {
  verify::Level lv;
  if (level == "fast") {
    lv = verify::Level::Fast;
  } else if (level == "full") {
    lv = verify::Level::Full;
  } else {
    throw ConfigError("level", "must be fast or full");
  }
  const auto report = verify::run(lv, pol);
  for (const auto& c : report.checks) {
    log << (c.passed ? "PASS " : "FAIL ") << c.name << " (" << c.instances << " instances)";
    if (!c.passed) log << " instance=" << c.failure;
    log << '\n';
  }
  log << (report.ok() ? "verify: all checks passed" : "verify: FAILED") << '\n';
  return report.ok() ? kExitOk : kExitVerifyFailed;
}

}  // namespace twf::cli
