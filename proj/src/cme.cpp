#include "kacov/cme.hpp"

#include <cmath>

#include "kacov/error.hpp"

namespace kacov {

CMEOperator fit_cme(const KernelSpec& k, std::span<const Point> points, std::size_t eta,
                    double gamma, AnchorPolicy policy) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be positive");
  if (points.size() < eta + 1) {
    throw Error(ErrorCode::invalid_argument, "trajectory too short for the requested lag");
  }
  const std::size_t n = points.size() - eta;
  const auto right = points.subspan(0, n);
  const auto left = points.subspan(eta, n);
  const double nd = static_cast<double>(n);

  if (policy == AnchorPolicy::keep_all) {
    Eigen::MatrixXd g = gram(k, right, right);
    g.diagonal().array() += nd * gamma;
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd b = g.ldlt().solve(Eigen::MatrixXd::Identity(nn, nn));
    b = 0.5 * (b + b.transpose()).eval();
    return CMEOperator{OperatorExpansion(k, PointList(left.begin(), left.end()),
                                         PointList(right.begin(), right.end()), std::move(b)),
                       gamma, n};
  }

  const MergedPoints ml = merge_points(left);
  const MergedPoints mr = merge_points(right);
  const auto nl = static_cast<Eigen::Index>(ml.unique.size());
  const auto nr = static_cast<Eigen::Index>(mr.unique.size());
  Eigen::MatrixXd freq = Eigen::MatrixXd::Zero(nl, nr);
  for (std::size_t t = 0; t < n; ++t) {
    freq(static_cast<Eigen::Index>(ml.index[t]), static_cast<Eigen::Index>(mr.index[t])) += 1.0 / nd;
  }
  Eigen::VectorXd marginal(nr);
  for (Eigen::Index j = 0; j < nr; ++j) {
    marginal(j) = static_cast<double>(mr.counts[static_cast<std::size_t>(j)]) / nd;
  }
  // B^T = (W K + gamma I)^{-1} N^T.
  Eigen::MatrixXd lhs = marginal.asDiagonal() * gram(k, mr.unique, mr.unique);
  lhs.diagonal().array() += gamma;
  const Eigen::MatrixXd bt = lhs.partialPivLu().solve(freq.transpose());
  return CMEOperator{OperatorExpansion(k, ml.unique, mr.unique, bt.transpose()), gamma, n};
}

CMEOperator fit_cme(const KernelSpec& k, const Trajectory& traj, std::size_t eta, double gamma,
                    AnchorPolicy policy) {
  return fit_cme(k, std::span<const Point>(traj.points), eta, gamma, policy);
}

PriorSpec::PriorSpec(PointList support, Eigen::VectorXd weights)
    : support_(std::move(support)), weights_(std::move(weights)) {
  if (support_.empty() || static_cast<std::size_t>(weights_.size()) != support_.size()) {
    throw Error(ErrorCode::invalid_argument, "prior needs one weight per support point");
  }
  if (!weights_.allFinite() || weights_.minCoeff() < 0.0) {
    throw Error(ErrorCode::invalid_argument, "prior weights must be nonnegative");
  }
  if (std::abs(weights_.sum() - 1.0) > 1e-12) {
    throw Error(ErrorCode::invalid_argument, "prior weights must sum to 1");
  }
}

PriorSpec PriorSpec::exact(PointList support, Eigen::VectorXd weights) {
  return PriorSpec(std::move(support), std::move(weights));
}

PriorSpec PriorSpec::empirical(PointList samples) {
  const auto n = static_cast<Eigen::Index>(samples.size());
  if (n == 0) throw Error(ErrorCode::invalid_argument, "empirical prior needs samples");
  return PriorSpec(std::move(samples), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

PriorSpec PriorSpec::point_mass(const Point& x) {
  return PriorSpec(PointList{x}, Eigen::VectorXd::Ones(1));
}

KernelMeanExpansion PriorSpec::embed(const KernelSpec& k) const {
  return KernelMeanExpansion(k, support_, weights_);
}

KernelMeanExpansion kernel_sum_rule(const CMEOperator& u, const PriorSpec& prior) {
  return apply(u.expansion, prior.embed(u.expansion.kernel()));
}

KernelMeanExpansion exact_cme_markov(const KernelSpec& k, const MarkovChainModel& model,
                                     std::size_t eta, const Eigen::VectorXd& prior_weights) {
  if (static_cast<std::size_t>(prior_weights.size()) != model.size()) {
    throw Error(ErrorCode::invalid_argument, "prior weights must cover every state");
  }
  if (model.stationary().minCoeff() <= 0.0) {
    throw Error(ErrorCode::rank_deficient, "some state has zero stationary probability");
  }
  Eigen::VectorXd w = model.power(eta).transpose() * prior_weights;
  return KernelMeanExpansion(k, model.states(), std::move(w));
}

FiniteStateEmbedding FiniteStateEmbedding::of(const KernelSpec& k, const PointList& states) {
  const Eigen::MatrixXd g = gram(k, states, states);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "state gram eigensolve failed");
  }
  const double top = es.eigenvalues().maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    if (es.eigenvalues()(i) > 1e-12 * top) keep.push_back(i);
  }
  FiniteStateEmbedding e;
  e.features.resize(g.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t c = 0; c < keep.size(); ++c) {
    e.features.col(static_cast<Eigen::Index>(c)) =
        es.eigenvectors().col(keep[c]) * std::sqrt(es.eigenvalues()(keep[c]));
  }
  return e;
}

double regularization_error(const KernelSpec& k, const MarkovChainModel& model,
                            const Eigen::VectorXd& prior_weights, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be positive");
  if (model.stationary().minCoeff() <= 0.0) {
    throw Error(ErrorCode::rank_deficient, "some state has zero stationary probability");
  }
  const FiniteStateEmbedding emb = FiniteStateEmbedding::of(k, model.states());
  const Eigen::MatrixXd& f = emb.features;
  const Eigen::MatrixXd cov = f.transpose() * model.stationary().asDiagonal() * f;
  const Eigen::VectorXd mu = f.transpose() * prior_weights;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd& lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  const Eigen::VectorXd coef = es.eigenvectors().transpose() * mu;
  Eigen::VectorXd diff(coef.size());
  for (Eigen::Index i = 0; i < coef.size(); ++i) {
    const double reg = coef(i) / (lam(i) + gamma);
    const double pinv = lam(i) > 1e-10 * top ? coef(i) / lam(i) : 0.0;
    diff(i) = reg - pinv;
  }
  return kernel_bound(k) * diff.norm();
}

namespace {

double distance(const KernelMeanExpansion& a, const KernelMeanExpansion& b) {
  return combine({{1.0, a}, {-1.0, b}}).norm();
}

double op_distance(const OperatorExpansion& a, const OperatorExpansion& b) {
  return op_norm(combine({{1.0, a}, {-1.0, b}}));
}

SumRuleError assemble(const KernelSpec& k, std::size_t eta, double gamma,
                      const MarkovChainModel& model, const Eigen::VectorXd& prior_weights,
                      const PriorSpec& prior_estimate, const OperatorExpansion& c0_hat,
                      const OperatorExpansion& ceta_hat, const KernelMeanExpansion& estimate) {
  const double c = kernel_bound(k);
  const KernelMeanExpansion mu = KernelMeanExpansion(k, model.states(), prior_weights);
  SumRuleError out;
  out.prior_error = distance(prior_estimate.embed(k), mu);
  out.c0_error = op_distance(c0_hat, exact_autocov_markov(k, model, 0, false));
  out.ceta_error = op_distance(ceta_hat, exact_autocov_markov(k, model, eta, false));
  out.e_s = c / gamma * out.prior_error + std::pow(c, 1.5) / (gamma * gamma) * out.c0_error +
            std::sqrt(c) / gamma * out.ceta_error;
  out.e_r = regularization_error(k, model, prior_weights, gamma);
  out.bound = out.e_s + out.e_r;
  out.measured = distance(estimate, exact_cme_markov(k, model, eta, prior_weights));
  return out;
}

}  // namespace

SumRuleError error_decomposition(const KernelSpec& k, const Trajectory& traj, std::size_t eta,
                                 double gamma, const MarkovChainModel& model,
                                 const Eigen::VectorXd& prior_weights,
                                 const PriorSpec& prior_estimate) {
  const CMEOperator u = fit_cme(k, traj, eta, gamma);
  return assemble(k, eta, gamma, model, prior_weights, prior_estimate,
                  empirical_autocov(k, traj, 0, false), empirical_autocov(k, traj, eta, false),
                  kernel_sum_rule(u, prior_estimate));
}

SumRuleError error_decomposition(const KernelSpec& k, std::size_t eta, double gamma,
                                 const MarkovChainModel& model,
                                 const Eigen::VectorXd& prior_weights,
                                 const PriorSpec& prior_estimate, const OperatorExpansion& c0_hat,
                                 const OperatorExpansion& ceta_hat) {
  const KernelMeanExpansion estimate =
      apply(ceta_hat, regularized_solve(c0_hat, gamma, prior_estimate.embed(k)));
  return assemble(k, eta, gamma, model, prior_weights, prior_estimate, c0_hat, ceta_hat, estimate);
}

double regularization_schedule(std::size_t n, double exponent) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "n must be >= 1");
  return std::pow(static_cast<double>(n), exponent);
}

}  // namespace kacov
