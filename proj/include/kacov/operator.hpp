#pragma once

// Finite-rank RKHS operators and mean embeddings, represented over anchor
// points. Every norm, inner product and application reduces to Gram-matrix
// algebra on the anchors.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "kacov/kernel.hpp"
#include "kacov/simulate.hpp"

namespace kacov {

/// h = sum_i w_i phi(a_i).
class KernelMeanExpansion {
 public:
  KernelMeanExpansion(KernelSpec kernel, PointList anchors, Eigen::VectorXd weights);

  /// The feature map phi(x) = k(x, .).
  static KernelMeanExpansion feature(const KernelSpec& kernel, const Point& x);

  [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
  [[nodiscard]] const PointList& anchors() const noexcept { return anchors_; }
  [[nodiscard]] const Eigen::VectorXd& weights() const noexcept { return weights_; }

  /// h(x) = <h, phi(x)>.
  [[nodiscard]] double operator()(const Point& x) const;
  [[nodiscard]] double norm() const;

 private:
  KernelSpec kernel_;
  PointList anchors_;
  Eigen::VectorXd weights_;
};

double rkhs_inner(const KernelMeanExpansion& a, const KernelMeanExpansion& b);

/// sum_i c_i h_i over a shared kernel, with duplicate anchors merged.
KernelMeanExpansion combine(const std::vector<std::pair<double, KernelMeanExpansion>>& terms);

/// Same function with exactly-equal anchors merged (weights summed).
KernelMeanExpansion merge_anchors(const KernelMeanExpansion& h);

/// A = sum_{ij} B_ij phi(u_i) (x) phi(v_j), acting as A h = sum_ij B_ij <h, phi(v_j)> phi(u_i).
class OperatorExpansion {
 public:
  OperatorExpansion(KernelSpec kernel, PointList left, PointList right, Eigen::MatrixXd coeffs);

  /// phi(x) (x) phi(y).
  static OperatorExpansion rank_one(const KernelSpec& kernel, const Point& x, const Point& y);

  [[nodiscard]] const KernelSpec& kernel() const noexcept { return kernel_; }
  [[nodiscard]] const PointList& left() const noexcept { return left_; }
  [[nodiscard]] const PointList& right() const noexcept { return right_; }
  [[nodiscard]] const Eigen::MatrixXd& coeffs() const noexcept { return coeffs_; }

 private:
  KernelSpec kernel_;
  PointList left_;
  PointList right_;
  Eigen::MatrixXd coeffs_;
};

/// Whether an estimator keeps one anchor per sample or merges repeated
/// sample points into one anchor with summed coefficients. Both represent the
/// same operator; merging keeps finite-state trajectories at O(m^2) storage.
enum class AnchorPolicy { merge_duplicates, keep_all };

struct MergedPoints {
  PointList unique;
  std::vector<std::size_t> index;  // sample i -> position in `unique`
  std::vector<std::size_t> counts;
};

MergedPoints merge_points(std::span<const Point> points);

/// Exact re-expression with duplicate anchors merged on each side.
OperatorExpansion merge_anchors(const OperatorExpansion& a);

/// Re-expression over one shared anchor list (the union of both sides).
struct SquareForm {
  PointList anchors;
  Eigen::MatrixXd coeffs;
};
SquareForm to_square_form(const OperatorExpansion& a);

/// Empirical lag-eta autocovariance C_n(eta) from the first n + eta points.
OperatorExpansion empirical_autocov(const KernelSpec& k, std::span<const Point> points,
                                    std::size_t eta, bool centered,
                                    AnchorPolicy policy = AnchorPolicy::merge_duplicates);
OperatorExpansion empirical_autocov(const KernelSpec& k, const Trajectory& traj, std::size_t eta,
                                    bool centered,
                                    AnchorPolicy policy = AnchorPolicy::merge_duplicates);

/// Exact C(eta) = E[phi(X_eta) (x) phi(X_0)] of a stationary chain.
OperatorExpansion exact_autocov_markov(const KernelSpec& k, const MarkovChainModel& model,
                                       std::size_t eta, bool centered);

double hs_inner(const OperatorExpansion& a, const OperatorExpansion& b);
double hs_norm(const OperatorExpansion& a);

/// Largest singular value; dense eigensolves limit merged anchors to 5000 per side.
double op_norm(const OperatorExpansion& a);
inline constexpr std::size_t kOpNormAnchorBudget = 5000;

KernelMeanExpansion apply(const OperatorExpansion& a, const KernelMeanExpansion& h);

OperatorExpansion combine(const std::vector<std::pair<double, OperatorExpansion>>& terms);
OperatorExpansion adjoint(const OperatorExpansion& a);

/// (A + gamma id)^{-1} h for self-adjoint positive semi-definite A.
KernelMeanExpansion regularized_solve(const OperatorExpansion& a, double gamma,
                                      const KernelMeanExpansion& h);

/// Eigenvalues of the empirical covariance of the lagged pair features
/// phi(x_{t+eta}) (x) phi(x_t), padded with zeros to length n, descending.
std::vector<double> gamma_spectrum(const KernelSpec& k, std::span<const Point> points,
                                   std::size_t eta);
std::vector<double> gamma_spectrum(const KernelSpec& k, const Trajectory& traj, std::size_t eta);

/// Symmetric square root with negative eigenvalues clamped at zero.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym);

nlohmann::json to_json(const OperatorExpansion& a);
OperatorExpansion operator_from_json(const nlohmann::json& j);

}  // namespace kacov
