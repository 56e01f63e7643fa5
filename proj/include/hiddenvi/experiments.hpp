#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hiddenvi/record.hpp"

namespace hiddenvi {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentInfo {
  std::string name;
  std::string figure;  // which numbered result plot the experiment reproduces
  std::string description;
};

const std::vector<ExperimentInfo>& experiment_catalog();

/// Parsed and validated experiment configuration. `params` holds the
/// experiment-specific section with defaults already applied.
struct ExperimentConfig {
  std::string experiment;
  std::size_t seeds = 1;
  std::uint64_t master_seed = 12345;
  std::string out_dir = "out";
  int threads = 1;
  bool timing = false;
  nlohmann::json params;
  nlohmann::json raw;  // config echo for the manifest

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
};

/// One seeded run of the configured experiment; run_index selects the derived
/// seed mix_seed(master_seed, run_index).
TrajectoryRecord run_experiment_once(const ExperimentConfig& cfg, std::size_t run_index);

struct RunSummary {
  std::vector<TrajectoryRecord> runs;
  double wall_ms_total = 0.0;
  std::size_t aborted_runs = 0;
};

/// Runs all seeds (optionally across threads) in run-index order.
RunSummary execute_experiment(const ExperimentConfig& cfg);

/// Per-run CSVs, the aggregate CSV, and the manifest, under cfg.out_dir.
void write_outputs(const ExperimentConfig& cfg, const RunSummary& summary);

}  // namespace hiddenvi
