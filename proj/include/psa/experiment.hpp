#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace psa {

enum class Experiment {
  kTheorem1,
  kTheorem2,
  kClaim1,
  kCorollary1,
  kCounterexample,
  kCoverage,
  kSpeed,
  kApproxError,
};

inline constexpr std::string_view kConfigSchema = "psa-experiment/1";

std::string_view to_string(Experiment e) noexcept;
// Accepts THEOREM1 ... APPROX_ERROR and the lower-case, dash-separated
// subcommand spellings (theorem1, approx-error, ...).
Experiment parse_experiment(std::string_view name);

// Declarative experiment description; see configs/ and the README for the
// file format. Grids are lists of numbers; the run covers their cartesian
// product times `seeds`.
struct ExperimentConfig {
  Experiment experiment = Experiment::kTheorem1;
  std::map<std::string, std::vector<double>> grid;
  std::vector<std::uint64_t> seeds;
  nlohmann::json settings = nlohmann::json::object();
  std::string output_path;
};

// Parses and validates a JSON config. `source` names the input in error
// messages. Throws ConfigError with the line (for syntax errors) or the
// offending field.
ExperimentConfig parse_config(std::string_view text, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);
void validate(const ExperimentConfig& cfg);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

struct ExperimentReport {
  Table results;                // written to results.csv
  std::optional<Table> timings;  // SPEED only, written to timings.csv
  nlohmann::json summary;       // written to summary.json
  bool pass = false;
};

struct RunOptions {
  int threads = 0;  // 0 keeps the OpenMP default
  std::optional<std::vector<std::uint64_t>> seed_override;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {});

// results.csv: one '#' comment line with a timestamp, the header, then rows.
std::string to_csv(const Table& table, std::string_view comment);
// Drops the leading '#' lines so two runs can be compared byte for byte.
std::string csv_body(std::string_view csv);

// Writes results.csv, summary.json and (for SPEED) timings.csv into `dir`.
void write_report(const ExperimentReport& report, const ExperimentConfig& cfg,
                  const std::filesystem::path& dir);

// Least-squares slope of log(y) against log(x).
double log_log_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace psa
