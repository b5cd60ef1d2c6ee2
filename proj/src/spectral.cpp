#include "kacov/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "kacov/error.hpp"
#include "kacov/io.hpp"

namespace kacov {

namespace {

std::vector<EigenGroup> group_eigenvalues(const std::vector<double>& vals) {
  std::vector<EigenGroup> groups;
  if (vals.empty()) return groups;
  const double tol = kGroupTolerance * vals.front();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (groups.empty() || vals[groups.back().indices.back()] - vals[i] > tol) {
      groups.push_back(EigenGroup{});
    }
    groups.back().indices.push_back(i);
  }
  for (auto& g : groups) {
    double s = 0.0;
    for (const std::size_t i : g.indices) s += vals[i];
    g.value = s / static_cast<double>(g.indices.size());
  }
  return groups;
}

// Builds a decomposition from a symmetric reduced matrix `core` whose
// eigenvector y maps to eigenfunction weights `lift(y, lambda)`.
template <typename Lift>
SpectralDecomposition decompose(const KernelSpec& k, PointList anchors, const Eigen::MatrixXd& core,
                                double scale, std::size_t r, Lift lift) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (core + core.transpose()));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "symmetric eigensolve failed");
  }
  const Eigen::Index m = core.rows();
  SpectralDecomposition dec{k, std::move(anchors), {}, {}, {}, false};
  const double top = es.eigenvalues()(m - 1);
  std::vector<Eigen::Index> keep;
  if (top > 1e-14 * scale) {
    for (Eigen::Index i = m - 1; i >= 0 && keep.size() < r; --i) {
      if (es.eigenvalues()(i) > kEigenTruncation * top) keep.push_back(i);
    }
  }
  dec.truncated = keep.size() < r;
  dec.weights.resize(static_cast<Eigen::Index>(dec.anchors.size()),
                     static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    const double lambda = es.eigenvalues()(keep[c]);
    dec.eigenvalues.push_back(lambda);
    dec.weights.col(static_cast<Eigen::Index>(c)) = lift(es.eigenvectors().col(keep[c]), lambda);
  }
  dec.groups = group_eigenvalues(dec.eigenvalues);
  return dec;
}

}  // namespace

KernelMeanExpansion SpectralDecomposition::eigenfunction(std::size_t i) const {
  if (i >= eigenvalues.size()) throw Error(ErrorCode::invalid_argument, "eigenpair index out of range");
  return KernelMeanExpansion(kernel, anchors, weights.col(static_cast<Eigen::Index>(i)));
}

SpectralDecomposition kpca(const KernelSpec& k, std::span<const Point> samples, bool centered,
                           std::size_t r) {
  if (samples.empty()) throw Error(ErrorCode::invalid_argument, "kpca needs samples");
  if (r < 1 || r > samples.size()) {
    throw Error(ErrorCode::invalid_argument, "kpca rank must satisfy 1 <= r <= n");
  }
  const MergedPoints m = merge_points(samples);
  const auto u = static_cast<Eigen::Index>(m.unique.size());
  Eigen::VectorXd w(u);
  for (Eigen::Index a = 0; a < u; ++a) {
    w(a) = static_cast<double>(m.counts[static_cast<std::size_t>(a)]) /
           static_cast<double>(samples.size());
  }
  const Eigen::MatrixXd g = gram(k, m.unique, m.unique);
  // Weighted form of (1/n) G (or (1/n) H G H) on the distinct samples.
  Eigen::MatrixXd center = Eigen::MatrixXd::Identity(u, u);
  if (centered) center -= w * Eigen::RowVectorXd::Ones(u);
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd core =
      sw.asDiagonal() * (center.transpose() * g * center) * sw.asDiagonal();
  return decompose(k, m.unique, core, g.diagonal().cwiseAbs().maxCoeff(), r,
                   [&](const Eigen::VectorXd& y, double lambda) -> Eigen::VectorXd {
                     return center * (sw.asDiagonal() * y) / std::sqrt(lambda);
                   });
}

SpectralDecomposition spectral_decomposition_exact(const OperatorExpansion& a, bool self_adjoint) {
  SquareForm sq = to_square_form(a);
  const Eigen::MatrixXd kmat = gram(a.kernel(), sq.anchors, sq.anchors);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ks(kmat);
  if (ks.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "anchor gram eigensolve failed");
  }
  const double ktop = std::max(ks.eigenvalues().maxCoeff(), 0.0);
  Eigen::VectorXd root(kmat.rows()), inv_root(kmat.rows());
  for (Eigen::Index i = 0; i < kmat.rows(); ++i) {
    const double s = ks.eigenvalues()(i);
    root(i) = s > 0.0 ? std::sqrt(s) : 0.0;
    inv_root(i) = s > kEigenTruncation * ktop ? 1.0 / std::sqrt(s) : 0.0;
  }
  const Eigen::MatrixXd& v = ks.eigenvectors();
  const Eigen::MatrixXd half = v * root.asDiagonal() * v.transpose();
  const Eigen::MatrixXd inv_half = v * inv_root.asDiagonal() * v.transpose();
  const Eigen::MatrixXd core = half * sq.coeffs * half;
  if (self_adjoint && core.size() > 0) {
    const double scale = std::max(1.0, core.cwiseAbs().maxCoeff());
    if ((core - core.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale) {
      throw Error(ErrorCode::not_self_adjoint, "operator is not self-adjoint");
    }
  }
  const std::size_t r = sq.anchors.size();
  return decompose(a.kernel(), std::move(sq.anchors), core, std::max(ktop, 1e-300), r,
                   [&](const Eigen::VectorXd& y, double) -> Eigen::VectorXd {
                     return inv_half * y;
                   });
}

double spectral_gap(const SpectralDecomposition& dec, std::size_t j) {
  if (j < 1 || j > dec.groups.size()) {
    throw Error(ErrorCode::invalid_argument, "spectral group index out of range");
  }
  const auto mu = [&](std::size_t g) { return g <= dec.groups.size() ? dec.groups[g - 1].value : 0.0; };
  if (j == 1) return mu(1) - mu(2);
  return std::min(mu(j - 1) - mu(j), mu(j) - mu(j + 1));
}

OperatorExpansion projector_onto(const SpectralDecomposition& dec,
                                 std::span<const std::size_t> indices) {
  const auto m = static_cast<Eigen::Index>(dec.anchors.size());
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(m, m);
  for (const std::size_t i : indices) {
    if (i >= dec.size()) continue;
    const auto col = dec.weights.col(static_cast<Eigen::Index>(i));
    b.noalias() += col * col.transpose();
  }
  return OperatorExpansion(dec.kernel, dec.anchors, dec.anchors, std::move(b));
}

OperatorExpansion spectral_projector(const SpectralDecomposition& dec, std::size_t j) {
  if (j < 1 || j > dec.groups.size()) {
    throw Error(ErrorCode::invalid_argument, "spectral group index out of range");
  }
  return projector_onto(dec, dec.groups[j - 1].indices);
}

double projector_distance(const OperatorExpansion& pa, const OperatorExpansion& pb) {
  return op_norm(combine({{1.0, pa}, {-1.0, pb}}));
}

double PerturbationCertificate::min_projector_slack() const {
  return projector_slacks.empty() ? 0.0
                                  : *std::min_element(projector_slacks.begin(), projector_slacks.end());
}

PerturbationCertificate perturbation_certificate(const SpectralDecomposition& exact,
                                                 const SpectralDecomposition& empirical,
                                                 double delta, double tol) {
  if (!(exact.kernel == empirical.kernel)) {
    throw Error(ErrorCode::kernel_mismatch, "decompositions use different kernels");
  }
  PerturbationCertificate cert;
  cert.delta = delta;
  const std::size_t len = std::max(exact.size(), empirical.size());
  cert.eigenvalue_slack = delta;
  for (std::size_t i = 0; i < len; ++i) {
    const double a = i < exact.size() ? exact.eigenvalues[i] : 0.0;
    const double b = i < empirical.size() ? empirical.eigenvalues[i] : 0.0;
    cert.eigenvalue_slack = std::min(cert.eigenvalue_slack, delta - std::abs(a - b));
  }
  bool ok = cert.eigenvalue_slack >= -tol;
  for (std::size_t j = 1; j <= exact.groups.size(); ++j) {
    const double gap = spectral_gap(exact, j);
    const double dist = projector_distance(spectral_projector(exact, j),
                                           projector_onto(empirical, exact.groups[j - 1].indices));
    const double slack = 4.0 * delta / gap - dist;
    cert.projector_slacks.push_back(slack);
    ok = ok && slack >= -tol;
  }
  cert.passed = ok;
  return cert;
}

KoopmanDecomposition kedmd(const KernelSpec& k, std::span<const Point> points, std::size_t eta,
                           double gamma) {
  if (points.size() < eta + 2) {
    throw Error(ErrorCode::invalid_argument, "kedmd needs n >= 2 lagged pairs");
  }
  CMEOperator cme = fit_cme(k, points, eta, gamma);
  const OperatorExpansion& u = cme.expansion;
  // U* restricted to span{phi(right anchors)} in weight coordinates.
  const Eigen::MatrixXd m = u.coeffs().transpose() * gram(k, u.left(), u.right());
  Eigen::EigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "kedmd eigensolve failed");
  }
  const Eigen::MatrixXd krr = gram(k, u.right(), u.right());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m.rows()));
  std::iota(order.begin(), order.end(), 0);
  const auto& ev = es.eigenvalues();
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double ma = std::abs(ev(a)), mb = std::abs(ev(b));
    if (ma != mb) return ma > mb;
    if (ev(a).real() != ev(b).real()) return ev(a).real() > ev(b).real();
    return ev(a).imag() > ev(b).imag();
  });
  KoopmanDecomposition dec{k, u.right(), {}, Eigen::MatrixXcd(m.rows(), m.rows()), std::move(cme)};
  for (std::size_t c = 0; c < order.size(); ++c) {
    Eigen::VectorXcd w = es.eigenvectors().col(order[c]);
    const double sq = (w.adjoint() * krr.cast<std::complex<double>>() * w)(0, 0).real();
    if (sq > 0.0) w /= std::sqrt(sq);
    dec.eigenvalues.push_back(ev(order[c]));
    dec.weights.col(static_cast<Eigen::Index>(c)) = w;
  }
  return dec;
}

KoopmanDecomposition kedmd(const KernelSpec& k, const Trajectory& traj, std::size_t eta,
                           double gamma) {
  return kedmd(k, std::span<const Point>(traj.points), eta, gamma);
}

double koopman_residual(const KoopmanDecomposition& dec, std::size_t i) {
  if (i >= dec.eigenvalues.size()) {
    throw Error(ErrorCode::invalid_argument, "eigenpair index out of range");
  }
  const OperatorExpansion adj = adjoint(dec.cme.expansion);
  const Eigen::VectorXcd w = dec.weights.col(static_cast<Eigen::Index>(i));
  const KernelMeanExpansion re = apply(adj, KernelMeanExpansion(dec.kernel, dec.anchors, w.real()));
  const KernelMeanExpansion im = apply(adj, KernelMeanExpansion(dec.kernel, dec.anchors, w.imag()));
  Eigen::VectorXcd image(w.size());
  image.real() = re.weights();
  image.imag() = im.weights();
  const Eigen::VectorXcd r = image - dec.eigenvalues[i] * w;
  const Eigen::MatrixXcd kc = gram(dec.kernel, dec.anchors, dec.anchors).cast<std::complex<double>>();
  const double num = std::max((r.adjoint() * kc * r)(0, 0).real(), 0.0);
  const double den = (w.adjoint() * kc * w)(0, 0).real();
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

double koopman_predict(const CMEOperator& u, const KernelMeanExpansion& f, const Point& x) {
  return apply(adjoint(u.expansion), f)(x);
}

nlohmann::json to_json(const SpectralDecomposition& dec) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const Point& p : dec.anchors) anchors.push_back(to_json(p));
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : dec.groups) groups.push_back({{"value", g.value}, {"indices", g.indices}});
  return {{"kernel", to_json(dec.kernel)}, {"anchors", std::move(anchors)},
          {"eigenvalues", dec.eigenvalues}, {"weights", to_json(dec.weights)},
          {"groups", std::move(groups)}, {"truncated", dec.truncated}};
}

nlohmann::json to_json(const KoopmanDecomposition& dec) {
  nlohmann::json anchors = nlohmann::json::array();
  for (const Point& p : dec.anchors) anchors.push_back(to_json(p));
  nlohmann::json values = nlohmann::json::array();
  for (const auto& l : dec.eigenvalues) values.push_back({l.real(), l.imag()});
  nlohmann::json weights = nlohmann::json::array();
  for (Eigen::Index i = 0; i < dec.weights.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < dec.weights.cols(); ++j) {
      row.push_back({dec.weights(i, j).real(), dec.weights(i, j).imag()});
    }
    weights.push_back(std::move(row));
  }
  return {{"kernel", to_json(dec.kernel)}, {"anchors", std::move(anchors)},
          {"eigenvalues", std::move(values)}, {"weights", std::move(weights)}, {"gamma", dec.cme.gamma}};
}

}  // namespace kacov
