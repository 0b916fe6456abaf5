#pragma once

// Runnable simulation studies producing tidy records (one value per row).

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace auxcov {

struct ExperimentConfig {
  std::vector<double> gammas{0.1, 0.5, 0.9};
  int p = 50;
  std::vector<int> ns{500};
  int blocks = 2;  // K
  double eta = 0.1;
  int replicates = 20;
  int folds = 10;
  std::vector<double> alpha_grid;  // empty: 51 points on [0, 1]
  int tau_min = 2;
  int tau_max = 10;
  int bootstrap_b = 200;
  int mc_draws = 100000;  // psi-verify
  std::vector<std::string> methods{"auxcov-ols", "auxcov-gls", "auxcov-splines", "maxdet", "lr"};
  int threads = 0;
};

struct ExperimentRecord {
  std::string replicate;  // index, or "mean" for aggregates
  double gamma = 0.0;
  int p = 0;
  int n = 0;
  int k = 0;
  double eta = 0.0;  // realized
  std::string method;
  std::string metric;
  double value = 0.0;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  ExperimentConfig config;
  std::vector<ExperimentRecord> records;
};

std::vector<std::string> experiment_names();

/// Throws ConfigOutOfRange for unknown names or configs beyond
/// p ≤ 200, n ≤ 5000, replicates ≤ 500.
ExperimentReport run_experiment(const std::string& name, const ExperimentConfig& config, std::uint64_t seed);

void validate_config(const ExperimentConfig& config);
nlohmann::json config_to_json(const ExperimentConfig& config);

std::string records_csv(const ExperimentReport& report);
nlohmann::json manifest(const ExperimentReport& report);

/// Writes <name>.csv and <name>.manifest.json into `dir`.
void write_experiment(const ExperimentReport& report, const std::filesystem::path& dir);

}  // namespace auxcov
