#pragma once

// Regularized conditional mean operator, the kernel sum rule, and its error
// decomposition against exact finite-state ground truth.

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "kacov/operator.hpp"
#include "kacov/simulate.hpp"

namespace kacov {

/// U_n = C_n(eta) (C_n(0) + gamma id)^{-1}.
///
/// With `AnchorPolicy::keep_all` the expansion is the textbook one: left
/// anchors x_{1+eta..n+eta}, right anchors x_{1..n}, B = (G_00 + n gamma I)^{-1}.
/// With merged anchors, B = N (K W + gamma I)^{-1} where N holds the empirical
/// pair frequencies and W the marginal frequencies of the right anchors; the
/// operator is the same.
struct CMEOperator {
  OperatorExpansion expansion;
  double gamma = 0.0;
  std::size_t n = 0;
};

CMEOperator fit_cme(const KernelSpec& k, std::span<const Point> points, std::size_t eta,
                    double gamma, AnchorPolicy policy = AnchorPolicy::merge_duplicates);
CMEOperator fit_cme(const KernelSpec& k, const Trajectory& traj, std::size_t eta, double gamma,
                    AnchorPolicy policy = AnchorPolicy::merge_duplicates);

/// A prior measure given by weighted support points.
class PriorSpec {
 public:
  static PriorSpec exact(PointList support, Eigen::VectorXd weights);
  static PriorSpec empirical(PointList samples);
  static PriorSpec point_mass(const Point& x);

  [[nodiscard]] const PointList& support() const noexcept { return support_; }
  [[nodiscard]] const Eigen::VectorXd& weights() const noexcept { return weights_; }

  /// mu_z = sum_i z_i phi(s_i).
  [[nodiscard]] KernelMeanExpansion embed(const KernelSpec& k) const;

 private:
  PriorSpec(PointList support, Eigen::VectorXd weights);
  PointList support_;
  Eigen::VectorXd weights_;
};

/// U mu_z, evaluated as `apply(U, mu_z)`.
KernelMeanExpansion kernel_sum_rule(const CMEOperator& u, const PriorSpec& prior);

/// Analytic U mu_z = sum_i z_i sum_j (P^eta)_ij phi(s_j). Throws
/// `rank_deficient` when some stationary probability vanishes.
KernelMeanExpansion exact_cme_markov(const KernelSpec& k, const MarkovChainModel& model,
                                     std::size_t eta, const Eigen::VectorXd& prior_weights);

/// Orthonormal coordinates for span{phi(s_i)} over a finite state list:
/// rows of `features` are the embedded states, features * features^T = K.
struct FiniteStateEmbedding {
  Eigen::MatrixXd features;
  static FiniteStateEmbedding of(const KernelSpec& k, const PointList& states);
};

/// c || (C(0) + gamma)^{-1} mu_z - C(0)^+ mu_z ||, computed in the explicit
/// finite-state embedding with a 1e-10 relative rank cut for the pseudo-inverse.
double regularization_error(const KernelSpec& k, const MarkovChainModel& model,
                            const Eigen::VectorXd& prior_weights, double gamma);

struct SumRuleError {
  double e_s = 0.0;
  double e_r = 0.0;
  double bound = 0.0;
  double measured = 0.0;
  double prior_error = 0.0;     // ||mu_hat - mu||
  double c0_error = 0.0;        // ||C_n(0) - C(0)||
  double ceta_error = 0.0;      // ||C_n(eta) - C(eta)||
  [[nodiscard]] bool holds(double tol = 1e-9) const { return measured <= bound + tol; }
};

/// Full decomposition on a simulated trajectory of `model`; the exact prior
/// has weights `prior_weights` over the model states.
SumRuleError error_decomposition(const KernelSpec& k, const Trajectory& traj, std::size_t eta,
                                 double gamma, const MarkovChainModel& model,
                                 const Eigen::VectorXd& prior_weights,
                                 const PriorSpec& prior_estimate);

/// Same decomposition with caller-supplied estimates of C(0) and C(eta).
SumRuleError error_decomposition(const KernelSpec& k, std::size_t eta, double gamma,
                                 const MarkovChainModel& model,
                                 const Eigen::VectorXd& prior_weights,
                                 const PriorSpec& prior_estimate, const OperatorExpansion& c0_hat,
                                 const OperatorExpansion& ceta_hat);

/// gamma(n) = n^exponent, by default n^{-1/6}.
double regularization_schedule(std::size_t n, double exponent = -1.0 / 6.0);

}  // namespace kacov
