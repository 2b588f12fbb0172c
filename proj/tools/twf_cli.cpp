// twf: run, sweep, compare and verify from the command line.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "twf/commands.hpp"

int main(int argc, char** argv) {
  using namespace twf;
  CLI::App app{"Multi-dispatcher load balancing simulator"};
  app.require_subcommand(1);

  std::string config;
  std::string out = "out";
  std::string seeds;
  std::string policies;
  std::string param;
  std::string values;
  std::string level = "fast";
  unsigned threads = 1;

  auto* run = app.add_subcommand("run", "Simulate one configuration; writes result.json and ccdf.csv");
  run->add_option("--config", config, "Config file")->required();
  run->add_option("--out", out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Sweep load or eta over policies and seeds; writes sweep.csv");
  sweep->add_option("--config", config, "Sweep spec file")->required();
  sweep->add_option("--out", out, "Output directory");
  sweep->add_option("--param", param, "load or eta");
  sweep->add_option("--values", values, "Comma-separated values");
  sweep->add_option("--policies", policies, "Comma-separated policy ids (prefix s: or u: to pick the mode)");
  sweep->add_option("--seeds", seeds, "Seeds, e.g. 1-5 or 1,4,9");
  sweep->add_option("--threads", threads, "Worker threads");

  auto* compare = app.add_subcommand("compare", "Several policies on one config with paired seeds");
  compare->add_option("--config", config, "Config file")->required();
  compare->add_option("--out", out, "Output directory");
  compare->add_option("--policies", policies, "Comma-separated policy ids")->required();
  compare->add_option("--seeds", seeds, "Seeds, e.g. 1-5");
  compare->add_option("--threads", threads, "Worker threads");

  auto* verify = app.add_subcommand("verify", "Oracle and invariant checks");
  verify->add_option("--level", level, "fast or full");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfigError;
  }

  try {
    if (*run) return cli::cmd_run(config, out);
    if (*sweep) {
      cli::SweepOverrides over;
      if (!param.empty()) over.param = param;
      if (!values.empty()) over.values = values;
      if (!policies.empty()) over.policies = policies;
      if (!seeds.empty()) over.seeds = seeds;
      return cli::cmd_sweep(cli::load_sweep_spec(config, over), out, threads);
    }
    if (*compare) {
      const SystemConfig base = load_config(config);
      const auto seed_list = seeds.empty() ? std::vector<std::uint64_t>{base.seed} : cli::parse_seeds(seeds);
      return cli::cmd_compare(base, cli::split_list(policies), seed_list, out, threads);
    }
    if (*verify) return cli::cmd_verify(level);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfigError;
  }
  return cli::kExitOk;
}
