#include <doctest.h>

#include <cmath>

#include "kacov/error.hpp"
#include "kacov/io.hpp"
#include "kacov/kernel.hpp"
#include "kacov/rng.hpp"

using namespace kacov;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("eval examples") {
  const auto g = KernelSpec::gaussian(1.0);
  CHECK(eval(g, Point::at(0.0), Point::at(0.0)) == 1.0);
  CHECK(eval(g, Point::at(0.0), Point::at(1.0)) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(eval(KernelSpec::linear(), Point::at(2.0), Point::at(3.0)) == 6.0);
}

TEST_CASE("eval rejects mismatched domains") {
  const auto g = KernelSpec::gaussian(1.0);
  CHECK(code_of([&] { (void)eval(g, Point::state(0), Point::at(0.0)); }) == ErrorCode::domain_mismatch);
  CHECK(code_of([&] { (void)eval(g, Point::at(0.0), Point::at(std::vector<double>{0.0, 1.0})); }) ==
        ErrorCode::domain_mismatch);
  const auto t = KernelSpec::table(Eigen::Matrix2d::Identity());
  CHECK(code_of([&] { (void)eval(t, Point::state(2), Point::state(0)); }) == ErrorCode::state_out_of_range);
  CHECK(code_of([&] { (void)eval(t, Point::at(0.0), Point::state(0)); }) == ErrorCode::domain_mismatch);
}

TEST_CASE("kernel construction validates parameters") {
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0), Error);
  CHECK_THROWS_AS(KernelSpec::gaussian(-1.0), Error);
  Eigen::Matrix2d asym;
  asym << 1, 0.5, 0.2, 1;
  CHECK_THROWS_AS(KernelSpec::table(asym), Error);
  Eigen::Matrix2d indefinite;
  indefinite << 1, 2, 2, 1;
  CHECK_THROWS_AS(KernelSpec::table(indefinite), Error);
  CHECK_THROWS_AS(KernelSpec::linear(-1.0), Error);
}

TEST_CASE("gram examples") {
  const PointList zeros{Point::at(0.0), Point::at(0.0)};
  CHECK(gram(KernelSpec::gaussian(1.0), zeros, zeros) == Eigen::Matrix2d::Ones());
  const PointList xs{Point::at(1.0), Point::at(2.0)}, ys{Point::at(3.0)};
  const Eigen::MatrixXd lin = gram(KernelSpec::linear(), xs, ys);
  REQUIRE(lin.rows() == 2);
  REQUIRE(lin.cols() == 1);
  CHECK(lin(0, 0) == 3.0);
  CHECK(lin(1, 0) == 6.0);
  Eigen::Matrix2d g;
  g << 2, 1, 1, 2;
  const PointList s{Point::state(0), Point::state(1)};
  CHECK(gram(KernelSpec::table(g), s, s) == g);
}

TEST_CASE("product_eval examples") {
  const auto g = KernelSpec::gaussian(1.0);
  const auto z = Point::at(0.0), o = Point::at(1.0);
  CHECK(product_eval(g, {z, z}, {z, z}) == 1.0);
  CHECK(product_eval(g, {z, z}, {o, o}) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(product_eval(KernelSpec::linear(), {Point::at(1.0), Point::at(2.0)}, {Point::at(3.0), Point::at(4.0)}) ==
        24.0);
}

TEST_CASE("Gaussian product kernel is a Gaussian on the concatenated space") {
  CounterRng rng(7);
  const auto g = KernelSpec::gaussian(0.7);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.normal(), b = rng.normal(), c = rng.normal(), d = rng.normal();
    const double joint = eval(g, Point::at(std::vector<double>{a, b}), Point::at(std::vector<double>{c, d}));
    CHECK(product_eval(g, {Point::at(a), Point::at(b)}, {Point::at(c), Point::at(d)}) ==
          doctest::Approx(joint).epsilon(1e-14));
  }
}

TEST_CASE("kernel_bound examples") {
  CHECK(kernel_bound(KernelSpec::gaussian(0.5)) == 1.0);
  Eigen::Matrix2d g;
  g << 2, 1, 1, 3;
  CHECK(kernel_bound(KernelSpec::table(g)) == 3.0);
  CHECK(kernel_bound(KernelSpec::linear(2.0)) == 4.0);
  CHECK(code_of([] { (void)kernel_bound(KernelSpec::linear()); }) == ErrorCode::unbounded_domain);
}

TEST_CASE("linear kernel with a radius rejects points outside the ball") {
  const auto k = KernelSpec::linear(1.0);
  CHECK_NOTHROW((void)eval(k, Point::at(0.5), Point::at(-1.0)));
  CHECK_THROWS_AS((void)eval(k, Point::at(1.5), Point::at(0.0)), Error);
}

TEST_CASE("symmetry, PSD and bound properties") {
  CounterRng rng(11);
  Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(5, 5, [&] { return rng.normal(); });
  const std::vector<KernelSpec> kernels{KernelSpec::gaussian(0.8), KernelSpec::linear(3.0),
                                        KernelSpec::table(a * a.transpose())};
  const auto draw = [&](const KernelSpec& k) {
    if (k.domain_kind() == PointKind::state) return Point::state(rng.next_u64() % 5);
    return Point::at(std::vector<double>{rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0});
  };
  for (const auto& k : kernels) {
    CAPTURE(k.name());
    for (int i = 0; i < 100; ++i) {
      const Point x = draw(k), y = draw(k);
      CHECK(eval(k, x, y) == eval(k, y, x));
    }
    for (int s = 0; s < 20; ++s) {
      PointList pts;
      const auto size = 1 + rng.next_u64() % 30;
      for (std::uint64_t i = 0; i < size; ++i) pts.push_back(draw(k));
      const Eigen::MatrixXd g = gram(k, pts, pts);
      const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().minCoeff();
      CHECK(min_eig >= -1e-10 * g.trace());
    }
    const double c = kernel_bound(k);
    for (int i = 0; i < 1000; ++i) {
      const Point x = draw(k);
      CHECK(eval(k, x, x) <= c);
    }
  }
}

TEST_CASE("kernel and point JSON round trip") {
  Eigen::Matrix2d g;
  g << 2, 1, 1, 2;
  for (const auto& k : {KernelSpec::gaussian(0.3), KernelSpec::linear(), KernelSpec::linear(2.0),
                        KernelSpec::table(g)}) {
    CHECK(kernel_from_json(to_json(k)) == k);
  }
  CHECK(point_from_json(to_json(Point::state(3))) == Point::state(3));
  const auto p = Point::at(std::vector<double>{0.1, -2.5});
  CHECK(point_from_json(to_json(p)) == p);
}
