#pragma once

// Closed-form concentration and limit-theorem bounds, long-run variance for
// the projected CLT statistic, and log-log rate fitting.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "kacov/operator.hpp"
#include "kacov/simulate.hpp"

namespace kacov {

/// Mixing coefficients alpha(t) for t >= 1, clamped into [0, 1/4]; lags
/// t <= 0 read as 1/4.
class MixingEnvelope {
 public:
  static MixingEnvelope zero();
  static MixingEnvelope constant(double value);
  static MixingEnvelope geometric(GeometricEnvelope g);
  /// table[t-1] = beta(t) for t = 1..T; past T the geometric tail is used, or
  /// the last entry when there is none.
  static MixingEnvelope tabulated(std::vector<double> table,
                                  std::optional<GeometricEnvelope> tail = std::nullopt);
  /// beta envelope of a finite chain: exact values up to `t_max`, then a
  /// fitted geometric tail.
  static MixingEnvelope markov(const MarkovChainModel& model, std::size_t t_max = 200);

  [[nodiscard]] double operator()(long long t) const;
  [[nodiscard]] const std::optional<GeometricEnvelope>& tail() const noexcept { return tail_; }

 private:
  explicit MixingEnvelope(std::function<double(long long)> fn,
                          std::optional<GeometricEnvelope> tail = std::nullopt);
  std::function<double(long long)> fn_;
  std::optional<GeometricEnvelope> tail_;
};

struct BoundInputs {
  double epsilon = 0.0;
  std::size_t n = 0;
  std::size_t nu = 1;
  std::size_t q = 1;
  double delta = 0.5;
  double c = 1.0;
  double lambda_tail = 0.0;
};

struct BoundTerms {
  double term1 = 0.0;
  double term2 = 0.0;
  double term3 = 0.0;
  [[nodiscard]] double total() const noexcept { return term1 + term2 + term3; }
};

/// The three terms of the concentration bound for P(||C_n - C|| > eps).
BoundTerms bosq_terms(const BoundInputs& in, const MixingEnvelope& env);
double bosq_bound(const BoundInputs& in, const MixingEnvelope& env);

struct OptimizedBound {
  double bound = 0.0;  // clipped at 1
  double raw = 0.0;
  BoundInputs argmin;
  BoundTerms terms;
};

/// Grid of q values: at most 32 geometric points in 1..floor(n/2), both ends included.
std::vector<std::size_t> q_grid(std::size_t n);

/// Minimum over nu in 1..min(50, len), the q grid, and delta in {0.1..0.9},
/// with lambda_tail = sum_{j > nu} lambdas[j].
OptimizedBound optimize_bound(double epsilon, std::size_t n, double c, const MixingEnvelope& env,
                              std::span<const double> lambdas);

/// (4c^2 + 32c^2 M)^{1/2}.
double lil_norm_bound(double c, double m);

/// L(n) = max(log n, 1) and a_n = sqrt(2 L(L(n))).
double lil_log(double x);
double lil_scale(double n);

/// sum_{t=1}^{horizon} alpha(t - eta) plus the certified geometric tail.
double mixing_sum(const MixingEnvelope& env, std::size_t eta, std::size_t horizon = 1000000,
                  std::optional<GeometricEnvelope> tail_cert = std::nullopt);

/// Bartlett long-run variance of s_t = g(x_{t+eta}) f(x_t), floored at 1e-12.
double asymptotic_variance(const Trajectory& traj, std::size_t eta, const KernelMeanExpansion& f,
                           const KernelMeanExpansion& g, std::size_t max_lag);
double long_run_variance(std::span<const double> series, std::size_t max_lag);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// OLS of log(error) on log(n).
RateFit rate_fit(std::span<const std::pair<double, double>> points);

}  // namespace kacov
