#pragma once

// Experiment configuration read from TOML.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "kacov/kernel.hpp"
#include "kacov/simulate.hpp"

namespace kacov {

enum class ExperimentKind { convergence, clt, lil, pca, cme, koopman, gamma, bound };

std::string_view to_string(ExperimentKind e) noexcept;
std::optional<ExperimentKind> parse_experiment(std::string_view name);

/// A fixed finite chain. Without explicit states the chain lives on state
/// indices (for Table kernels).
struct MarkovSpec {
  Eigen::MatrixXd transition;
  PointList states;
};

/// A fresh random primitive chain on `size` states for every replicate.
struct RandomMarkovSpec {
  std::size_t size = 3;
};

using ModelSpec = std::variant<MarkovSpec, RandomMarkovSpec, AR1Model, NoisyMapModel>;

/// Either a fixed kernel or a fresh random full-rank Table kernel per replicate.
struct RandomTableSpec {
  std::size_t size = 3;
};
using KernelChoice = std::variant<KernelSpec, RandomTableSpec>;

/// gamma(n) = scale * n^exponent; a constant schedule has exponent 0.
struct GammaSchedule {
  double scale = 1.0;
  double exponent = -1.0 / 6.0;
  [[nodiscard]] double operator()(std::size_t n) const;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::convergence;
  ModelSpec model;
  KernelChoice kernel = KernelSpec::gaussian(1.0);
  std::size_t eta = 1;
  std::vector<std::size_t> n_grid;
  std::uint64_t base_seed = 0;
  std::size_t replicates = 1;
  GammaSchedule gamma;
  std::filesystem::path output = "out";
  nlohmann::json params = nlohmann::json::object();  // experiment-specific knobs
  nlohmann::json echo = nlohmann::json::object();    // the parsed TOML, for the report

  template <typename T>
  [[nodiscard]] T param(const std::string& key, T fallback) const {
    return params.contains(key) ? params.at(key).get<T>() : fallback;
  }
};

/// Parses TOML text; `source` names the input in diagnostics ("file:line: ...").
ExperimentConfig parse_config(std::string_view text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Model instance for one replicate (random chains draw from `seed`).
MarkovChainModel markov_model(const ExperimentConfig& cfg, std::uint64_t seed);
KernelSpec kernel_for(const ExperimentConfig& cfg, std::uint64_t seed);

/// Random primitive chain with rows drawn uniformly from [0.05, 1] and normalized.
MarkovChainModel random_markov_chain(std::size_t m, std::uint64_t seed);
/// Random full-rank PSD gram A A^T / m with standard normal A.
KernelSpec random_table_kernel(std::size_t m, std::uint64_t seed);

}  // namespace kacov
