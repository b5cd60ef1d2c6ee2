#pragma once

// Stationary, geometrically mixing test processes with exactly known laws.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "kacov/kernel.hpp"

namespace kacov {

/// Finite-state Markov chain with states embedded as points. The stationary
/// distribution is computed at construction; reducible or periodic chains are
/// rejected.
class MarkovChainModel {
 public:
  /// `states` defaults to the state indices 0..m-1 (for Table kernels).
  static MarkovChainModel create(Eigen::MatrixXd transition, PointList states = {});

  [[nodiscard]] const Eigen::MatrixXd& transition() const noexcept { return p_; }
  [[nodiscard]] const Eigen::VectorXd& stationary() const noexcept { return pi_; }
  [[nodiscard]] const PointList& states() const noexcept { return states_; }
  [[nodiscard]] std::size_t size() const noexcept { return states_.size(); }

  /// P^t.
  [[nodiscard]] Eigen::MatrixXd power(std::size_t t) const;

 private:
  MarkovChainModel() = default;
  Eigen::MatrixXd p_;
  Eigen::VectorXd pi_;
  PointList states_;
};

/// The symmetric 2-state chain with flip probability p.
MarkovChainModel two_state_chain(double p, PointList states = {});

struct AR1Model {
  double a = 0.0;
  double noise_std = 1.0;
};

enum class MapKind { logistic, doubling };

struct NoisyMapModel {
  MapKind map = MapKind::logistic;
  double r = 4.0;
  double noise_std = 0.01;
};

struct Trajectory {
  PointList points;
  std::size_t eta = 0;
  std::uint64_t seed = 0;
  std::size_t burn_in = 0;
  std::string model_id;

  /// Number of lagged pairs available at the reserved lag.
  [[nodiscard]] std::size_t n() const noexcept {
    return points.size() > eta ? points.size() - eta : 0;
  }
};

/// Probability vector pi with pi P = pi. Throws `degenerate_chain` unless P is
/// primitive (some power up to m^2 is strictly positive).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

Trajectory simulate_markov(const MarkovChainModel& model, std::size_t n, std::size_t eta,
                           std::uint64_t seed);

/// Same as `simulate_markov` but returns only the visited state indices.
std::vector<std::size_t> simulate_markov_indices(const MarkovChainModel& model, std::size_t length,
                                                 std::uint64_t seed);

Trajectory simulate_ar1(const AR1Model& model, std::size_t n, std::size_t eta, std::uint64_t seed,
                        std::size_t burn_in = 1000);

Trajectory simulate_noisy_map(const NoisyMapModel& model, std::size_t n, std::size_t eta,
                              std::uint64_t seed, std::size_t burn_in = 1000);

/// beta(t) = sum_i pi_i TV(P^t(i, .), pi).
double beta_mixing_markov(const MarkovChainModel& model, std::size_t t);

/// beta(1..t_max), computed with one running matrix power.
std::vector<double> beta_mixing_table(const MarkovChainModel& model, std::size_t t_max);

struct GeometricEnvelope {
  double a = 0.0;
  double r = 0.0;
  [[nodiscard]] double operator()(double t) const;
};

/// Least-squares fit of log beta = log a + t log r, with `a` then raised so the
/// envelope dominates every supplied point. Nonpositive values are dropped.
GeometricEnvelope fit_geometric_mixing(std::span<const std::pair<double, double>> betas);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is);

}  // namespace kacov
