#pragma once

// Named experiments: simulate, estimate, certify, and write report.json plus CSVs.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kacov/config.hpp"
#include "kacov/simulate.hpp"

namespace kacov {

struct Certificate {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
  double slack = 0.0;  // >= 0 when the inequality holds
  std::string detail;
};

struct CsvTable {
  std::string name;  // file name
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(std::ostream& os) const;
};

struct ExperimentReport {
  ExperimentKind experiment = ExperimentKind::convergence;
  nlohmann::json config;
  nlohmann::json replicates = nlohmann::json::array();
  nlohmann::json aggregate = nlohmann::json::object();
  std::vector<Certificate> certificates;
  std::vector<CsvTable> tables;
  double wall_clock_seconds = 0.0;

  [[nodiscard]] bool passed() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

ExperimentReport run(const ExperimentConfig& cfg);

/// Writes report.json and every table into `dir` (created if needed).
void write_report(const ExperimentReport& report, const std::filesystem::path& dir);

/// Long-run variance of s_t = g(X_{t+eta}) f(X_t) under the stationary chain,
/// from the fundamental matrix of the (eta+1)-block chain. `fv`, `gv` hold f
/// and g at each state.
double exact_long_run_variance(const MarkovChainModel& model, std::size_t eta,
                               const Eigen::VectorXd& fv, const Eigen::VectorXd& gv);

/// Kolmogorov-Smirnov distance of a sample to the standard normal law.
double ks_distance_normal(std::vector<double> sample);

/// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> v, double p);

}  // namespace kacov
