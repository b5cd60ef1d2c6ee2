#pragma once

// Kernel PCA, spectral projectors with perturbation certificates, and kernel
// EDMD eigendecomposition of the adjoint regularized conditional mean operator.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "kacov/cme.hpp"
#include "kacov/operator.hpp"

namespace kacov {

/// Relative threshold below which eigenvalues are treated as zero.
inline constexpr double kEigenTruncation = 1e-12;
/// Consecutive eigenvalues closer than this fraction of lambda_1 share a group.
inline constexpr double kGroupTolerance = 1e-6;

struct EigenGroup {
  double value = 0.0;
  std::vector<std::size_t> indices;  // 0-based positions in `eigenvalues`
  [[nodiscard]] std::size_t multiplicity() const noexcept { return indices.size(); }
};

/// Nonzero eigenpairs of a self-adjoint PSD operator. Eigenfunction i is
/// sum_a weights(a, i) phi(anchors[a]) with unit RKHS norm.
struct SpectralDecomposition {
  KernelSpec kernel;
  PointList anchors;
  std::vector<double> eigenvalues;
  Eigen::MatrixXd weights;
  std::vector<EigenGroup> groups;
  bool truncated = false;  // fewer pairs than requested (numerical rank)

  [[nodiscard]] std::size_t size() const noexcept { return eigenvalues.size(); }
  [[nodiscard]] KernelMeanExpansion eigenfunction(std::size_t i) const;
};

/// Top-r eigenpairs of C_n(0) from samples (centered: of the empirically
/// centered covariance).
SpectralDecomposition kpca(const KernelSpec& k, std::span<const Point> samples, bool centered,
                           std::size_t r);

/// Eigenpairs via K^{1/2} B K^{1/2}. With `self_adjoint` set, a non-symmetric
/// reduced matrix is an error; otherwise its symmetric part is used.
SpectralDecomposition spectral_decomposition_exact(const OperatorExpansion& a, bool self_adjoint);

/// g_j for the 1-based distinct-eigenvalue index j; a missing mu_{j+1} counts as 0.
double spectral_gap(const SpectralDecomposition& dec, std::size_t j);

/// Projector onto the eigenfunctions with the given 0-based indices (those
/// present in `dec`).
OperatorExpansion projector_onto(const SpectralDecomposition& dec,
                                 std::span<const std::size_t> indices);

/// P_j for the 1-based group index j.
OperatorExpansion spectral_projector(const SpectralDecomposition& dec, std::size_t j);

double projector_distance(const OperatorExpansion& pa, const OperatorExpansion& pb);

struct PerturbationCertificate {
  bool passed = false;
  double delta = 0.0;
  double eigenvalue_slack = 0.0;           // min_i delta - |lambda_i - lambda_hat_i|
  std::vector<double> projector_slacks;    // per exact group: 4 delta / g_j - distance
  [[nodiscard]] double min_projector_slack() const;
};

/// Checks both perturbation inequalities. The empirical projector for group j
/// uses the eigenfunctions at the exact decomposition's indices for that group.
PerturbationCertificate perturbation_certificate(const SpectralDecomposition& exact,
                                                 const SpectralDecomposition& empirical,
                                                 double delta, double tol = 1e-9);

struct KoopmanDecomposition {
  KernelSpec kernel;
  PointList anchors;
  std::vector<std::complex<double>> eigenvalues;  // by modulus, then real part, descending
  Eigen::MatrixXcd weights;                       // column i: unit-norm eigenfunction i
  CMEOperator cme;
};

KoopmanDecomposition kedmd(const KernelSpec& k, std::span<const Point> points, std::size_t eta,
                           double gamma);
KoopmanDecomposition kedmd(const KernelSpec& k, const Trajectory& traj, std::size_t eta,
                           double gamma);

/// ||U* f - lambda f|| / ||f|| for eigenpair i, with U* applied through the
/// operator expansion.
double koopman_residual(const KoopmanDecomposition& dec, std::size_t i);

/// Estimate of E[f(X_{t+eta}) | X_t = x] as (U_n* f)(x).
double koopman_predict(const CMEOperator& u, const KernelMeanExpansion& f, const Point& x);

/// {kernel, anchors, eigenvalues, weights, groups}; Koopman eigenvalues and
/// weights are stored as [re, im] pairs.
nlohmann::json to_json(const SpectralDecomposition& dec);
nlohmann::json to_json(const KoopmanDecomposition& dec);

}  // namespace kacov
