#include "kacov/kernel.hpp"

#include <cmath>
#include <sstream>

#include "kacov/error.hpp"

namespace kacov {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::domain_mismatch: return "domain mismatch";
    case ErrorCode::state_out_of_range: return "state out of range";
    case ErrorCode::unbounded_domain: return "unbounded domain";
    case ErrorCode::degenerate_chain: return "degenerate chain";
    case ErrorCode::non_mixing_configuration: return "non-mixing configuration";
    case ErrorCode::size_budget_exceeded: return "size budget exceeded";
    case ErrorCode::kernel_mismatch: return "kernel mismatch";
    case ErrorCode::rank_deficient: return "rank deficient";
    case ErrorCode::unconverged_sum: return "unconverged sum";
    case ErrorCode::eigensolver_failure: return "eigensolver failure";
    case ErrorCode::not_self_adjoint: return "not self-adjoint";
    case ErrorCode::config_parse: return "config parse error";
    case ErrorCode::io: return "i/o error";
  }
  return "error";
}

KernelSpec KernelSpec::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::invalid_argument, "gaussian bandwidth must be positive");
  }
  return KernelSpec(GaussianKernel{sigma});
}

KernelSpec KernelSpec::linear(std::optional<double> radius) {
  if (radius && !(*radius >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "linear kernel radius must be nonnegative");
  }
  return KernelSpec(LinearKernel{radius});
}

KernelSpec KernelSpec::table(Eigen::MatrixXd gram) {
  if (gram.rows() == 0 || gram.rows() != gram.cols()) {
    throw Error(ErrorCode::invalid_argument, "table gram must be a nonempty square matrix");
  }
  if (!gram.allFinite() || (gram - gram.transpose()).cwiseAbs().maxCoeff() != 0.0) {
    throw Error(ErrorCode::invalid_argument, "table gram must be finite and symmetric");
  }
  const double trace = gram.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::abs(trace)) {
    throw Error(ErrorCode::invalid_argument, "table gram is not positive semi-definite");
  }
  return KernelSpec(TableKernel{std::move(gram)});
}

PointKind KernelSpec::domain_kind() const noexcept {
  return std::holds_alternative<TableKernel>(v_) ? PointKind::state : PointKind::coordinates;
}

std::string KernelSpec::name() const {
  std::ostringstream os;
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, GaussianKernel>) {
          os << "gaussian(sigma=" << k.sigma << ")";
        } else if constexpr (std::is_same_v<K, LinearKernel>) {
          os << "linear";
          if (k.radius) os << "(radius=" << *k.radius << ")";
        } else {
          os << "table(m=" << k.gram.rows() << ")";
        }
      },
      v_);
  return os.str();
}

namespace {

void require_coords(const Point& x, const Point& y) {
  if (x.kind() != PointKind::coordinates || y.kind() != PointKind::coordinates) {
    throw Error(ErrorCode::domain_mismatch, "kernel expects coordinate points");
  }
  if (x.dim() != y.dim()) {
    throw Error(ErrorCode::domain_mismatch, "points have different dimensions");
  }
}

}  // namespace

double KernelSpec::operator()(const Point& x, const Point& y) const {
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, TableKernel>) {
          if (x.kind() != PointKind::state || y.kind() != PointKind::state) {
            throw Error(ErrorCode::domain_mismatch, "table kernel expects state points");
          }
          const auto m = static_cast<std::size_t>(k.gram.rows());
          if (x.state_index() >= m || y.state_index() >= m) {
            throw Error(ErrorCode::state_out_of_range, "state index exceeds table size");
          }
          return k.gram(static_cast<Eigen::Index>(x.state_index()),
                        static_cast<Eigen::Index>(y.state_index()));
        } else {
          require_coords(x, y);
          const auto a = x.coords();
          const auto b = y.coords();
          if constexpr (std::is_same_v<K, GaussianKernel>) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
              const double d = a[i] - b[i];
              d2 += d * d;
            }
            return std::exp(-d2 / (2.0 * k.sigma * k.sigma));
          } else {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::size_t i = 0; i < a.size(); ++i) {
              dot += a[i] * b[i];
              na += a[i] * a[i];
              nb += b[i] * b[i];
            }
            if (k.radius && std::max(na, nb) > *k.radius * *k.radius * (1.0 + 1e-12)) {
              throw Error(ErrorCode::domain_mismatch, "point lies outside the linear kernel's radius");
            }
            return dot;
          }
        }
      },
      v_);
}

double eval(const KernelSpec& k, const Point& x, const Point& y) { return k(x, y); }

Eigen::MatrixXd gram(const KernelSpec& k, std::span<const Point> xs, std::span<const Point> ys) {
  if (xs.empty() || ys.empty()) {
    throw Error(ErrorCode::invalid_argument, "gram of an empty point list");
  }
  const auto p = static_cast<Eigen::Index>(xs.size());
  const auto q = static_cast<Eigen::Index>(ys.size());
  Eigen::MatrixXd g(p, q);
  for (Eigen::Index j = 0; j < q; ++j) {
    for (Eigen::Index i = 0; i < p; ++i) {
      g(i, j) = k(xs[static_cast<std::size_t>(i)], ys[static_cast<std::size_t>(j)]);
    }
  }
  return g;
}

double product_eval(const KernelSpec& k, const std::pair<Point, Point>& x,
                    const std::pair<Point, Point>& y) {
  return k(x.first, y.first) * k(x.second, y.second);
}

double kernel_bound(const KernelSpec& k) {
  return std::visit(
      [](const auto& kv) -> double {
        using K = std::decay_t<decltype(kv)>;
        if constexpr (std::is_same_v<K, GaussianKernel>) {
          return 1.0;
        } else if constexpr (std::is_same_v<K, LinearKernel>) {
          if (!kv.radius) {
            throw Error(ErrorCode::unbounded_domain,
                        "linear kernel needs a domain radius to be bounded");
          }
          return *kv.radius * *kv.radius;
        } else {
          return kv.gram.diagonal().maxCoeff();
        }
      },
      k.variant());
}

void check_domain(const KernelSpec& k, std::span<const Point> points) {
  if (points.empty()) return;
  const Point& first = points.front();
  for (const Point& p : points) {
    if (p.kind() != k.domain_kind()) {
      throw Error(ErrorCode::domain_mismatch, "point kind does not match kernel " + k.name());
    }
    if (p.kind() == PointKind::coordinates && p.dim() != first.dim()) {
      throw Error(ErrorCode::domain_mismatch, "points have different dimensions");
    }
    if (const auto* t = std::get_if<TableKernel>(&k.variant())) {
      if (p.state_index() >= static_cast<std::size_t>(t->gram.rows())) {
        throw Error(ErrorCode::state_out_of_range, "state index exceeds table size");
      }
    }
  }
}

}  // namespace kacov
