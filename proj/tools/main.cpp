// prescore-attn: runs one experiment from a JSON config and writes
// results.csv / summary.json. Exit 0 when every threshold passes, 2 when a
// threshold fails, 1 on any error.
#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "psa/errors.hpp"
#include "psa/experiment.hpp"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitError = 1;
constexpr int kExitThreshold = 2;

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw psa::ConfigError("--seed-override: empty entry in '" + text + "'");
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size() || item.front() == '-') {
      throw psa::ConfigError("--seed-override: '" + item + "' is not a non-negative integer");
    }
    seeds.push_back(v);
  }
  if (seeds.empty()) throw psa::ConfigError("--seed-override: no seeds given");
  return seeds;
}

struct Args {
  std::string config;
  std::string out;
  int threads = 0;
  std::string seed_override;
};

// The summary minus the echoed config, which is already in summary.json.
nlohmann::json headline(const nlohmann::json& summary) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : summary.items()) {
    if (key != "grid" && key != "seeds" && key != "settings" && key != "points") out[key] = value;
  }
  return out;
}

int run(psa::Experiment expected, const Args& args) {
  psa::ExperimentConfig cfg = psa::load_config(args.config);
  if (cfg.experiment != expected) {
    throw psa::ConfigError(args.config + ": config is for " +
                           std::string(psa::to_string(cfg.experiment)) + ", not " +
                           std::string(psa::to_string(expected)));
  }
  psa::RunOptions opts;
  opts.threads = args.threads;
  if (!args.seed_override.empty()) opts.seed_override = parse_seed_list(args.seed_override);

  std::filesystem::path out = args.out;
  if (out.empty()) out = std::filesystem::path(cfg.output_path.empty() ? "." : cfg.output_path);

  const psa::ExperimentReport report = psa::run_experiment(cfg, opts);
  psa::write_report(report, cfg, out);

  std::cout << psa::to_string(cfg.experiment) << ": " << report.results.rows.size()
            << " rows written to " << out.string() << '\n'
            << headline(report.summary).dump(2) << '\n'
            << (report.pass ? "PASS" : "FAIL") << '\n';
  return report.pass ? kExitPass : kExitThreshold;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pre-scored attention experiment runner"};
  app.require_subcommand(1);

  const std::vector<std::pair<const char*, psa::Experiment>> commands = {
      {"theorem1", psa::Experiment::kTheorem1},
      {"theorem2", psa::Experiment::kTheorem2},
      {"claim1", psa::Experiment::kClaim1},
      {"corollary1", psa::Experiment::kCorollary1},
      {"counterexample", psa::Experiment::kCounterexample},
      {"coverage", psa::Experiment::kCoverage},
      {"speed", psa::Experiment::kSpeed},
      {"approx-error", psa::Experiment::kApproxError},
  };

  Args args;
  std::vector<std::pair<CLI::App*, psa::Experiment>> subs;
  for (const auto& [name, exp] : commands) {
    CLI::App* sub = app.add_subcommand(name, "Run the " + std::string(psa::to_string(exp)) +
                                                 " experiment");
    sub->add_option("--config", args.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", args.out, "Output directory (default: output_path from the config)");
    sub->add_option("--threads", args.threads, "Worker threads; 0 keeps the OpenMP default")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed-override", args.seed_override,
                    "Comma-separated seeds replacing the config's list");
    subs.emplace_back(sub, exp);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitError;
  }

  try {
    for (const auto& [sub, exp] : subs) {
      if (sub->parsed()) return run(exp, args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
