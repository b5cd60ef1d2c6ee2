#include "kacov/operator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>

#include <nlohmann/json.hpp>

#include "kacov/error.hpp"
#include "kacov/io.hpp"

namespace kacov {

namespace {

void require_same_kernel(const KernelSpec& a, const KernelSpec& b) {
  if (!(a == b)) {
    throw Error(ErrorCode::kernel_mismatch, a.name() + " vs " + b.name());
  }
}

// S B S'^T: sums coefficients of anchors that were merged together.
Eigen::MatrixXd aggregate(const Eigen::MatrixXd& b, const MergedPoints& rows,
                          const MergedPoints& cols) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.unique.size()),
                                              static_cast<Eigen::Index>(cols.unique.size()));
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    const auto cj = static_cast<Eigen::Index>(cols.index[static_cast<std::size_t>(j)]);
    for (Eigen::Index i = 0; i < b.rows(); ++i) {
      out(static_cast<Eigen::Index>(rows.index[static_cast<std::size_t>(i)]), cj) += b(i, j);
    }
  }
  return out;
}

}  // namespace

KernelMeanExpansion::KernelMeanExpansion(KernelSpec kernel, PointList anchors,
                                         Eigen::VectorXd weights)
    : kernel_(std::move(kernel)), anchors_(std::move(anchors)), weights_(std::move(weights)) {
  if (anchors_.empty()) throw Error(ErrorCode::invalid_argument, "expansion needs anchors");
  if (static_cast<std::size_t>(weights_.size()) != anchors_.size()) {
    throw Error(ErrorCode::invalid_argument, "weight count does not match anchor count");
  }
  check_domain(kernel_, anchors_);
}

KernelMeanExpansion KernelMeanExpansion::feature(const KernelSpec& kernel, const Point& x) {
  return KernelMeanExpansion(kernel, PointList{x}, Eigen::VectorXd::Ones(1));
}

double KernelMeanExpansion::operator()(const Point& x) const {
  double s = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    s += weights_(static_cast<Eigen::Index>(i)) * kernel_(anchors_[i], x);
  }
  return s;
}

double KernelMeanExpansion::norm() const {
  const KernelMeanExpansion m = merge_anchors(*this);
  const double sq = m.weights().dot(gram(m.kernel(), m.anchors(), m.anchors()) * m.weights());
  return std::sqrt(std::max(sq, 0.0));
}

double rkhs_inner(const KernelMeanExpansion& a, const KernelMeanExpansion& b) {
  require_same_kernel(a.kernel(), b.kernel());
  return a.weights().dot(gram(a.kernel(), a.anchors(), b.anchors()) * b.weights());
}

KernelMeanExpansion merge_anchors(const KernelMeanExpansion& h) {
  const MergedPoints m = merge_points(h.anchors());
  if (m.unique.size() == h.anchors().size()) return h;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m.unique.size()));
  for (std::size_t i = 0; i < m.index.size(); ++i) {
    w(static_cast<Eigen::Index>(m.index[i])) += h.weights()(static_cast<Eigen::Index>(i));
  }
  return KernelMeanExpansion(h.kernel(), m.unique, std::move(w));
}

KernelMeanExpansion combine(const std::vector<std::pair<double, KernelMeanExpansion>>& terms) {
  if (terms.empty()) throw Error(ErrorCode::invalid_argument, "combine of an empty list");
  PointList anchors;
  std::vector<double> w;
  for (const auto& [c, h] : terms) {
    require_same_kernel(terms.front().second.kernel(), h.kernel());
    anchors.insert(anchors.end(), h.anchors().begin(), h.anchors().end());
    for (Eigen::Index i = 0; i < h.weights().size(); ++i) w.push_back(c * h.weights()(i));
  }
  return merge_anchors(KernelMeanExpansion(terms.front().second.kernel(), std::move(anchors),
                                           Eigen::Map<Eigen::VectorXd>(w.data(),
                                                                       static_cast<Eigen::Index>(w.size()))));
}

OperatorExpansion::OperatorExpansion(KernelSpec kernel, PointList left, PointList right,
                                     Eigen::MatrixXd coeffs)
    : kernel_(std::move(kernel)),
      left_(std::move(left)),
      right_(std::move(right)),
      coeffs_(std::move(coeffs)) {
  if (left_.empty() || right_.empty()) {
    throw Error(ErrorCode::invalid_argument, "operator expansion needs anchors on both sides");
  }
  if (static_cast<std::size_t>(coeffs_.rows()) != left_.size() ||
      static_cast<std::size_t>(coeffs_.cols()) != right_.size()) {
    throw Error(ErrorCode::invalid_argument, "coefficient shape does not match anchors");
  }
  check_domain(kernel_, left_);
  check_domain(kernel_, right_);
}

OperatorExpansion OperatorExpansion::rank_one(const KernelSpec& kernel, const Point& x,
                                              const Point& y) {
  return OperatorExpansion(kernel, PointList{x}, PointList{y}, Eigen::MatrixXd::Ones(1, 1));
}

MergedPoints merge_points(std::span<const Point> points) {
  MergedPoints m;
  m.index.reserve(points.size());
  std::map<std::reference_wrapper<const Point>, std::size_t, std::less<const Point>> seen;
  for (const Point& p : points) {
    auto [it, inserted] = seen.try_emplace(std::cref(p), m.unique.size());
    if (inserted) {
      m.unique.push_back(p);
      m.counts.push_back(0);
    }
    m.index.push_back(it->second);
    ++m.counts[it->second];
  }
  return m;
}

OperatorExpansion merge_anchors(const OperatorExpansion& a) {
  const MergedPoints l = merge_points(a.left());
  const MergedPoints r = merge_points(a.right());
  if (l.unique.size() == a.left().size() && r.unique.size() == a.right().size()) return a;
  return OperatorExpansion(a.kernel(), l.unique, r.unique, aggregate(a.coeffs(), l, r));
}

SquareForm to_square_form(const OperatorExpansion& a) {
  PointList all = a.left();
  all.insert(all.end(), a.right().begin(), a.right().end());
  MergedPoints m = merge_points(all);
  MergedPoints rows{m.unique, {m.index.begin(), m.index.begin() + static_cast<std::ptrdiff_t>(a.left().size())}, {}};
  MergedPoints cols{m.unique, {m.index.begin() + static_cast<std::ptrdiff_t>(a.left().size()), m.index.end()}, {}};
  return SquareForm{std::move(m.unique), aggregate(a.coeffs(), rows, cols)};
}

OperatorExpansion empirical_autocov(const KernelSpec& k, std::span<const Point> points,
                                    std::size_t eta, bool centered, AnchorPolicy policy) {
  if (points.size() < eta + 1) {
    throw Error(ErrorCode::invalid_argument, "trajectory too short for the requested lag");
  }
  const std::size_t n = points.size() - eta;
  const auto right = points.subspan(0, n);
  const auto left = points.subspan(eta, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto nn = static_cast<Eigen::Index>(n);

  if (policy == AnchorPolicy::keep_all) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(nn, nn) * inv_n;
    if (centered) b.array() -= inv_n * inv_n;
    return OperatorExpansion(k, PointList(left.begin(), left.end()),
                             PointList(right.begin(), right.end()), std::move(b));
  }

  const MergedPoints ml = merge_points(left);
  const MergedPoints mr = merge_points(right);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ml.unique.size()),
                                            static_cast<Eigen::Index>(mr.unique.size()));
  for (std::size_t t = 0; t < n; ++t) {
    b(static_cast<Eigen::Index>(ml.index[t]), static_cast<Eigen::Index>(mr.index[t])) += inv_n;
  }
  if (centered) {
    Eigen::VectorXd wl(b.rows()), wr(b.cols());
    for (Eigen::Index i = 0; i < wl.size(); ++i) wl(i) = static_cast<double>(ml.counts[static_cast<std::size_t>(i)]) * inv_n;
    for (Eigen::Index j = 0; j < wr.size(); ++j) wr(j) = static_cast<double>(mr.counts[static_cast<std::size_t>(j)]) * inv_n;
    b -= wl * wr.transpose();
  }
  return OperatorExpansion(k, ml.unique, mr.unique, std::move(b));
}

OperatorExpansion empirical_autocov(const KernelSpec& k, const Trajectory& traj, std::size_t eta,
                                    bool centered, AnchorPolicy policy) {
  return empirical_autocov(k, std::span<const Point>(traj.points), eta, centered, policy);
}

OperatorExpansion exact_autocov_markov(const KernelSpec& k, const MarkovChainModel& model,
                                       std::size_t eta, bool centered) {
  const Eigen::VectorXd& pi = model.stationary();
  // Joint law P(X_0 = i, X_eta = j) = pi_i (P^eta)_ij sits at B[j][i].
  Eigen::MatrixXd b = (pi.asDiagonal() * model.power(eta)).transpose();
  if (centered) b -= pi * pi.transpose();
  return OperatorExpansion(k, model.states(), model.states(), std::move(b));
}

double hs_inner(const OperatorExpansion& a, const OperatorExpansion& b) {
  require_same_kernel(a.kernel(), b.kernel());
  const OperatorExpansion ma = merge_anchors(a);
  const OperatorExpansion mb = merge_anchors(b);
  // trace(K_{u u'} B2 K_{v' v} B1^T)
  const Eigen::MatrixXd x = gram(ma.kernel(), ma.left(), mb.left()) * mb.coeffs();
  const Eigen::MatrixXd y = gram(ma.kernel(), mb.right(), ma.right()) * ma.coeffs().transpose();
  return x.cwiseProduct(y.transpose()).sum();
}

double hs_norm(const OperatorExpansion& a) { return std::sqrt(std::max(hs_inner(a, a), 0.0)); }

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "symmetric eigensolve failed");
  }
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

double op_norm(const OperatorExpansion& a) {
  const OperatorExpansion m = merge_anchors(a);
  if (m.left().size() > kOpNormAnchorBudget || m.right().size() > kOpNormAnchorBudget) {
    throw Error(ErrorCode::size_budget_exceeded,
                "op_norm supports at most " + std::to_string(kOpNormAnchorBudget) + " anchors");
  }
  if (m.coeffs().cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const Eigen::MatrixXd ku = psd_sqrt(gram(m.kernel(), m.left(), m.left()));
  const Eigen::MatrixXd kv = psd_sqrt(gram(m.kernel(), m.right(), m.right()));
  const Eigen::MatrixXd core = ku * m.coeffs() * kv;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(core);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

KernelMeanExpansion apply(const OperatorExpansion& a, const KernelMeanExpansion& h) {
  require_same_kernel(a.kernel(), h.kernel());
  Eigen::VectorXd w = a.coeffs() * (gram(a.kernel(), a.right(), h.anchors()) * h.weights());
  return KernelMeanExpansion(a.kernel(), a.left(), std::move(w));
}

OperatorExpansion combine(const std::vector<std::pair<double, OperatorExpansion>>& terms) {
  if (terms.empty()) throw Error(ErrorCode::invalid_argument, "combine of an empty list");
  const KernelSpec& k = terms.front().second.kernel();
  PointList left, right;
  Eigen::Index rows = 0, cols = 0;
  for (const auto& [c, op] : terms) {
    require_same_kernel(k, op.kernel());
    rows += op.coeffs().rows();
    cols += op.coeffs().cols();
  }
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(rows, cols);
  Eigen::Index r0 = 0, c0 = 0;
  for (const auto& [c, op] : terms) {
    b.block(r0, c0, op.coeffs().rows(), op.coeffs().cols()) = c * op.coeffs();
    r0 += op.coeffs().rows();
    c0 += op.coeffs().cols();
    left.insert(left.end(), op.left().begin(), op.left().end());
    right.insert(right.end(), op.right().begin(), op.right().end());
  }
  return merge_anchors(OperatorExpansion(k, std::move(left), std::move(right), std::move(b)));
}

OperatorExpansion adjoint(const OperatorExpansion& a) {
  return OperatorExpansion(a.kernel(), a.right(), a.left(), a.coeffs().transpose());
}

KernelMeanExpansion regularized_solve(const OperatorExpansion& a, double gamma,
                                      const KernelMeanExpansion& h) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be positive");
  require_same_kernel(a.kernel(), h.kernel());
  // (A + gamma)^{-1} h = h / gamma + Phi_c y with (B K_cc + gamma) y = -B K_ch w / gamma.
  const SquareForm sq = to_square_form(a);
  const auto m = static_cast<Eigen::Index>(sq.anchors.size());
  const Eigen::MatrixXd kcc = gram(a.kernel(), sq.anchors, sq.anchors);
  const Eigen::VectorXd rhs =
      -(sq.coeffs * (gram(a.kernel(), sq.anchors, h.anchors()) * h.weights())) / gamma;
  const Eigen::MatrixXd lhs = sq.coeffs * kcc + gamma * Eigen::MatrixXd::Identity(m, m);
  const Eigen::VectorXd y = lhs.partialPivLu().solve(rhs);

  PointList anchors = h.anchors();
  anchors.insert(anchors.end(), sq.anchors.begin(), sq.anchors.end());
  Eigen::VectorXd w(h.weights().size() + m);
  w << h.weights() / gamma, y;
  return merge_anchors(KernelMeanExpansion(a.kernel(), std::move(anchors), std::move(w)));
}

std::vector<double> gamma_spectrum(const KernelSpec& k, std::span<const Point> points,
                                   std::size_t eta) {
  if (points.size() < eta + 2) {
    throw Error(ErrorCode::invalid_argument, "gamma spectrum needs n >= 2 lagged pairs");
  }
  const std::size_t n = points.size() - eta;
  // Lagged pairs as 2-point tuples; repeated pairs are merged with weights.
  std::vector<Point> pairs;
  pairs.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    std::vector<double> key;
    const auto encode = [&key](const Point& p) {
      if (p.kind() == PointKind::state) {
        key.push_back(static_cast<double>(p.state_index()));
      } else {
        key.insert(key.end(), p.coords().begin(), p.coords().end());
      }
    };
    encode(points[t + eta]);
    encode(points[t]);
    pairs.push_back(Point::at(std::move(key)));
  }
  const MergedPoints m = merge_points(pairs);
  const auto u = static_cast<Eigen::Index>(m.unique.size());
  std::vector<std::size_t> first(m.unique.size(), n);
  for (std::size_t t = 0; t < n; ++t) first[m.index[t]] = std::min(first[m.index[t]], t);

  Eigen::MatrixXd g(u, u);
  for (Eigen::Index a = 0; a < u; ++a) {
    const std::size_t ta = first[static_cast<std::size_t>(a)];
    for (Eigen::Index b = a; b < u; ++b) {
      const std::size_t tb = first[static_cast<std::size_t>(b)];
      const double v = product_eval(k, {points[ta + eta], points[ta]}, {points[tb + eta], points[tb]});
      g(a, b) = v;
      g(b, a) = v;
    }
  }
  Eigen::VectorXd w(u);
  for (Eigen::Index a = 0; a < u; ++a) {
    w(a) = static_cast<double>(m.counts[static_cast<std::size_t>(a)]) / static_cast<double>(n);
  }
  // Nonzero spectrum of sum_a w_a (psi_a - mean)(psi_a - mean)^T equals that of
  // D^{1/2} (I - 1 w^T) G (I - w 1^T) D^{1/2}; with unit counts this is H G H / n.
  const Eigen::MatrixXd center =
      Eigen::MatrixXd::Identity(u, u) - Eigen::VectorXd::Ones(u) * w.transpose();
  const Eigen::VectorXd sw = w.cwiseSqrt();
  Eigen::MatrixXd core = sw.asDiagonal() * (center * g * center.transpose()) * sw.asDiagonal();
  core = 0.5 * (core + core.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(core, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "gamma spectrum eigensolve failed");
  }
  std::vector<double> out(n, 0.0);
  for (Eigen::Index i = 0; i < u; ++i) {
    out[static_cast<std::size_t>(i)] = std::max(es.eigenvalues()(u - 1 - i), 0.0);
  }
  return out;
}

std::vector<double> gamma_spectrum(const KernelSpec& k, const Trajectory& traj, std::size_t eta) {
  return gamma_spectrum(k, std::span<const Point>(traj.points), eta);
}

nlohmann::json to_json(const OperatorExpansion& a) {
  nlohmann::json left = nlohmann::json::array();
  nlohmann::json right = nlohmann::json::array();
  for (const Point& p : a.left()) left.push_back(to_json(p));
  for (const Point& p : a.right()) right.push_back(to_json(p));
  return {{"kernel", to_json(a.kernel())},
          {"left_anchors", std::move(left)},
          {"right_anchors", std::move(right)},
          {"B", to_json(a.coeffs())}};
}

OperatorExpansion operator_from_json(const nlohmann::json& j) {
  PointList left, right;
  for (const auto& p : j.at("left_anchors")) left.push_back(point_from_json(p));
  for (const auto& p : j.at("right_anchors")) right.push_back(point_from_json(p));
  return OperatorExpansion(kernel_from_json(j.at("kernel")), std::move(left), std::move(right),
                           matrix_from_json(j.at("B")));
}

}  // namespace kacov
