#include <doctest.h>

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "kacov/error.hpp"
#include "kacov/operator.hpp"
#include "kacov/simulate.hpp"
#include "oracle.hpp"

using namespace kacov;

namespace {

PointList states(std::initializer_list<std::size_t> idx) {
  PointList p;
  for (auto i : idx) p.push_back(Point::state(i));
  return p;
}

Eigen::MatrixXd identity_gram(Eigen::Index m) { return Eigen::MatrixXd::Identity(m, m); }

double spectral_norm(const Eigen::MatrixXd& a) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(0);
}

}  // namespace

TEST_CASE("empirical autocovariance small examples") {
  const KernelSpec k = KernelSpec::table(identity_gram(2));
  SUBCASE("single pair") {
    const auto c = empirical_autocov(k, states({0, 1}), 1, false);
    REQUIRE(c.left().size() == 1);
    CHECK(c.left()[0].state_index() == 1);
    CHECK(c.right()[0].state_index() == 0);
    CHECK(c.coeffs()(0, 0) == doctest::Approx(1.0));
  }
  SUBCASE("centered, two pairs, keep_all") {
    const auto c = empirical_autocov(k, states({0, 1, 0}), 1, true, AnchorPolicy::keep_all);
    CHECK(c.coeffs()(0, 0) == doctest::Approx(0.25));
    CHECK(c.coeffs()(0, 1) == doctest::Approx(-0.25));
    CHECK(c.coeffs()(1, 1) == doctest::Approx(0.25));
  }
  SUBCASE("trajectory shorter than the lag") {
    CHECK_THROWS_AS(empirical_autocov(k, states({0}), 1, false), Error);
  }
}

TEST_CASE("merged and keep_all policies represent the same operator") {
  CounterRng rng(11);
  const Eigen::MatrixXd g = oracle::random_gram(rng, 4);
  const KernelSpec k = KernelSpec::table(g);
  const oracle::Embedding e(g);
  const auto pts = oracle::random_states(rng, 300, 4);
  for (bool centered : {false, true}) {
    const auto a = empirical_autocov(k, pts, 2, centered, AnchorPolicy::merge_duplicates);
    const auto b = empirical_autocov(k, pts, 2, centered, AnchorPolicy::keep_all);
    CHECK(a.left().size() <= 4);
    CHECK(b.left().size() == 298);
    CHECK((e.of(a) - e.of(b)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(hs_norm(combine({{1.0, a}, {-1.0, b}})) < 1e-10);
  }
}

TEST_CASE("exact autocovariance examples") {
  const Eigen::MatrixXd p = (Eigen::MatrixXd(2, 2) << 0.75, 0.25, 0.25, 0.75).finished();
  const auto model = MarkovChainModel::create(p);
  const KernelSpec k = KernelSpec::table(identity_gram(2));
  SUBCASE("lag zero is diag(pi)") {
    const auto c = exact_autocov_markov(k, model, 0, false);
    CHECK(c.coeffs()(0, 0) == doctest::Approx(0.5));
    CHECK(c.coeffs()(0, 1) == doctest::Approx(0.0));
  }
  SUBCASE("iid uniform chain has zero centered autocovariance") {
    const auto iid = MarkovChainModel::create(Eigen::MatrixXd::Constant(3, 3, 1.0 / 3.0));
    const auto c = exact_autocov_markov(KernelSpec::table(identity_gram(3)), iid, 1, true);
    CHECK(hs_norm(c) < 1e-14);
  }
  SUBCASE("joint law orientation") {
    const auto c = exact_autocov_markov(k, model, 1, false);
    // B[j][i] = pi_i P_ij
    CHECK(c.coeffs()(1, 0) == doctest::Approx(0.5 * 0.25));
    CHECK(c.coeffs()(0, 0) == doctest::Approx(0.5 * 0.75));
  }
}

TEST_CASE("linear kernel on {0,1}: ||C(1)||_HS approaches 3/8") {
  // Two-state chain flipping with prob 1/4 on {0, 1}: E[X_1 X_0] = pi_1 P_11 = 3/8.
  const auto model = two_state_chain(0.25, {Point::at(0.0), Point::at(1.0)});
  const KernelSpec k = KernelSpec::linear(1.0);
  CHECK(hs_norm(exact_autocov_markov(k, model, 1, false)) == doctest::Approx(0.375).epsilon(1e-12));
  const Trajectory t = simulate_markov(model, 100000, 1, 17);
  CHECK(std::abs(hs_norm(empirical_autocov(k, t, 1, false)) - 0.375) < 0.01);
}

TEST_CASE("HS and operator norm examples") {
  const KernelSpec k = KernelSpec::table(identity_gram(3));
  const auto r = OperatorExpansion::rank_one(k, Point::state(0), Point::state(1));
  CHECK(hs_norm(r) == doctest::Approx(1.0));
  CHECK(op_norm(r) == doctest::Approx(1.0));
  const OperatorExpansion d(k, states({0, 1, 2}), states({0, 1, 2}),
                            Eigen::Vector3d(3.0, -2.0, 1.0).asDiagonal().toDenseMatrix());
  CHECK(hs_norm(d) == doctest::Approx(std::sqrt(14.0)));
  CHECK(op_norm(d) == doctest::Approx(3.0));
  CHECK(hs_inner(d, r) == doctest::Approx(0.0));
  CHECK(hs_inner(d, d) == doctest::Approx(14.0));

  const OperatorExpansion zero(k, states({0}), states({1}), Eigen::MatrixXd::Zero(1, 1));
  CHECK(op_norm(zero) == 0.0);
}

TEST_CASE("norms, inner products and application agree with an explicit embedding") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 2 + static_cast<Eigen::Index>(rng.next_u64() % 5);
    const Eigen::MatrixXd g = oracle::random_gram(rng, m);
    const KernelSpec k = KernelSpec::table(g);
    const oracle::Embedding e(g);
    const auto a = oracle::random_operator(rng, k, static_cast<std::size_t>(m));
    const auto b = oracle::random_operator(rng, k, static_cast<std::size_t>(m));
    const auto h = oracle::random_mean(rng, k, static_cast<std::size_t>(m));
    const Eigen::MatrixXd ea = e.of(a), eb = e.of(b);

    CHECK(hs_inner(a, b) == doctest::Approx(ea.cwiseProduct(eb).sum()).epsilon(1e-9));
    CHECK(hs_norm(a) == doctest::Approx(ea.norm()).epsilon(1e-9));
    CHECK(std::abs(op_norm(a) - spectral_norm(ea)) < 1e-8 * std::max(1.0, spectral_norm(ea)));
    CHECK((e.of(apply(a, h)) - ea * e.of(h)).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, ea.norm()));
    CHECK((e.of(adjoint(a)) - ea.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((e.of(combine({{2.0, a}, {-0.5, b}})) - (2.0 * ea - 0.5 * eb)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(rkhs_inner(h, apply(a, h)) == doctest::Approx(e.of(h).dot(ea * e.of(h))).epsilon(1e-9));
  }
}

TEST_CASE("regularized solve inverts A + gamma I") {
  CounterRng rng(5);
  const Eigen::MatrixXd g = oracle::random_gram(rng, 4);
  const KernelSpec k = KernelSpec::table(g);
  const oracle::Embedding e(g);
  const auto c0 = empirical_autocov(k, oracle::random_states(rng, 200, 4), 0, false);
  const auto h = oracle::random_mean(rng, k, 4);
  const double gamma = 0.1;
  const Eigen::MatrixXd a = e.of(c0) + gamma * Eigen::MatrixXd::Identity(4, 4);
  const Eigen::VectorXd want = a.ldlt().solve(e.of(h));
  CHECK((e.of(regularized_solve(c0, gamma, h)) - want).cwiseAbs().maxCoeff() < 1e-9);
  CHECK_THROWS_AS(regularized_solve(c0, 0.0, h), Error);
}

TEST_CASE("property: homogeneity, op <= HS, ||C_n|| <= c") {
  CounterRng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd g = oracle::random_gram(rng, 5);
    const KernelSpec k = KernelSpec::table(g);
    const auto a = oracle::random_operator(rng, k, 5);
    const double s = rng.normal();
    CHECK(hs_norm(combine({{s, a}})) == doctest::Approx(std::abs(s) * hs_norm(a)).epsilon(1e-9));
    CHECK(op_norm(a) <= hs_norm(a) * (1 + 1e-10) + 1e-12);
    const auto c = empirical_autocov(k, oracle::random_states(rng, 64, 5), 1, false);
    CHECK(hs_norm(c) <= kernel_bound(k) * (1 + 1e-10));
  }
}

TEST_CASE("op_norm refuses oversize expansions after merging") {
  const KernelSpec k = KernelSpec::gaussian(1.0);
  PointList left;
  for (std::size_t i = 0; i <= kOpNormAnchorBudget; ++i) left.push_back(Point::at(static_cast<double>(i)));
  const OperatorExpansion big(k, left, {Point::at(0.0)},
                              Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(left.size()), 1, 1e-3));
  CHECK_THROWS_AS(op_norm(big), Error);
  try {
    (void)op_norm(big);
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::size_budget_exceeded);
  }
  // Duplicates collapse first, so many copies of one point are fine.
  const PointList same(6000, Point::at(0.5));
  const OperatorExpansion dup(k, same, {Point::at(0.0)}, Eigen::MatrixXd::Constant(6000, 1, 1.0 / 6000));
  CHECK(op_norm(dup) == doctest::Approx(1.0));  // ||phi(0.5)|| ||phi(0)||
}

TEST_CASE("gamma spectrum examples") {
  const KernelSpec k = KernelSpec::table(identity_gram(3));
  SUBCASE("identical pairs have zero spread") {
    const auto s = gamma_spectrum(k, states({1, 1, 1}), 1);
    REQUIRE(s.size() == 2);
    CHECK(s[0] == doctest::Approx(0.0));
    CHECK(s[1] == doctest::Approx(0.0));
  }
  SUBCASE("two distinct orthogonal pairs") {
    // psi_1, psi_2 orthonormal: covariance has one eigenvalue |psi_1 - psi_2|^2 / 4 = 1/2.
    const auto s = gamma_spectrum(k, states({0, 1, 2}), 1);
    CHECK(s[0] == doctest::Approx(0.5));
    CHECK(s[1] == doctest::Approx(0.0));
  }
  SUBCASE("too short") { CHECK_THROWS_AS(gamma_spectrum(k, states({0, 1}), 1), Error); }
}

TEST_CASE("gamma spectrum matches the brute-force centered pair gram") {
  CounterRng rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd g = oracle::random_gram(rng, 3);
    const KernelSpec k = KernelSpec::table(g);
    const auto pts = oracle::random_states(rng, 40, 3);
    const std::size_t eta = 1 + trial % 2, n = pts.size() - eta;
    const auto ni = static_cast<Eigen::Index>(n);
    Eigen::MatrixXd pg(ni, ni);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t t = 0; t < n; ++t)
        pg(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) =
            k(pts[s + eta], pts[t + eta]) * k(pts[s], pts[t]);
    const Eigen::MatrixXd h = Eigen::MatrixXd::Identity(ni, ni) - Eigen::MatrixXd::Constant(ni, ni, 1.0 / n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h * pg * h / static_cast<double>(n));
    const auto got = gamma_spectrum(k, pts, eta);
    REQUIRE(got.size() == n);
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double want = std::max(es.eigenvalues()(ni - 1 - static_cast<Eigen::Index>(i)), 0.0);
      CHECK(std::abs(got[i] - want) < 1e-10);
      trace += got[i];
    }
    CHECK(trace == doctest::Approx((h * pg * h).trace() / static_cast<double>(n)).epsilon(1e-9));
    CHECK(std::is_sorted(got.rbegin(), got.rend()));
  }
}

TEST_CASE("gamma spectrum of a noisy logistic map decays") {
  const Trajectory t = simulate_noisy_map({MapKind::logistic, 4.0, 0.01}, 300, 1, 3);
  const auto s = gamma_spectrum(KernelSpec::gaussian(0.3), t, 1);
  REQUIRE(s[0] > 0.0);
  CHECK(s[19] / s[0] < 1e-2);
}

TEST_CASE("operator JSON round trip") {
  CounterRng rng(1);
  const Eigen::MatrixXd g = oracle::random_gram(rng, 3);
  const KernelSpec k = KernelSpec::table(g);
  const auto a = oracle::random_operator(rng, k, 3);
  const auto b = operator_from_json(nlohmann::json::parse(to_json(a).dump()));
  CHECK(b.coeffs() == a.coeffs());
  CHECK(b.left() == a.left());
  CHECK(b.right() == a.right());
  const auto j = to_json(a);
  CHECK(j.contains("kernel"));
  CHECK(j.contains("B"));
}
