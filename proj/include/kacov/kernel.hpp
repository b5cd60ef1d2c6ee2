#pragma once

// Positive-definite kernels on R^d points and on finite state sets.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace kacov {

enum class PointKind { coordinates, state };

/// A point of the sample space: either a coordinate vector in R^d or an index
/// into a finite state set.
class Point {
 public:
  Point() = default;

  static Point at(std::vector<double> coords) {
    Point p;
    p.kind_ = PointKind::coordinates;
    p.coords_ = std::move(coords);
    return p;
  }
  static Point at(double x) { return at(std::vector<double>{x}); }
  static Point state(std::size_t index) {
    Point p;
    p.kind_ = PointKind::state;
    p.state_ = index;
    return p;
  }

  [[nodiscard]] PointKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t dim() const noexcept { return coords_.size(); }
  [[nodiscard]] std::span<const double> coords() const noexcept { return coords_; }
  [[nodiscard]] std::size_t state_index() const noexcept { return state_; }

  auto operator<=>(const Point&) const = default;
  bool operator==(const Point&) const = default;

 private:
  PointKind kind_ = PointKind::coordinates;
  std::size_t state_ = 0;
  std::vector<double> coords_;
};

using PointList = std::vector<Point>;

struct GaussianKernel {
  double sigma = 1.0;
  bool operator==(const GaussianKernel&) const = default;
};

/// Dot-product kernel. The radius bounds the domain so that sup k(x,x) = R^2
/// is finite; without it `kernel_bound` refuses to answer.
struct LinearKernel {
  std::optional<double> radius;
  bool operator==(const LinearKernel&) const = default;
};

struct TableKernel {
  Eigen::MatrixXd gram;
  bool operator==(const TableKernel& other) const {
    return gram.rows() == other.gram.rows() && gram.cols() == other.gram.cols() &&
           gram == other.gram;
  }
};

class KernelSpec {
 public:
  using Variant = std::variant<GaussianKernel, LinearKernel, TableKernel>;

  static KernelSpec gaussian(double sigma);
  static KernelSpec linear(std::optional<double> radius = std::nullopt);
  static KernelSpec table(Eigen::MatrixXd gram);

  [[nodiscard]] const Variant& variant() const noexcept { return v_; }
  [[nodiscard]] PointKind domain_kind() const noexcept;
  [[nodiscard]] std::string name() const;

  /// k(x, y); throws on domain mismatch or out-of-range state index.
  [[nodiscard]] double operator()(const Point& x, const Point& y) const;

  bool operator==(const KernelSpec&) const = default;

 private:
  explicit KernelSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

[[nodiscard]] double eval(const KernelSpec& k, const Point& x, const Point& y);

/// G[i][j] = k(xs[i], ys[j]).
[[nodiscard]] Eigen::MatrixXd gram(const KernelSpec& k, std::span<const Point> xs,
                                   std::span<const Point> ys);

/// Product kernel on pairs: k(x1, y1) * k(x2, y2).
[[nodiscard]] double product_eval(const KernelSpec& k, const std::pair<Point, Point>& x,
                                  const std::pair<Point, Point>& y);

/// c = sup_x k(x, x).
[[nodiscard]] double kernel_bound(const KernelSpec& k);

/// Checks that every point matches the kernel's domain kind (and, for the
/// Table kernel, the state range). Throws otherwise.
void check_domain(const KernelSpec& k, std::span<const Point> points);

}  // namespace kacov
