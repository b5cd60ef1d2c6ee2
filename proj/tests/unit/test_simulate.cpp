#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "kacov/error.hpp"
#include "kacov/simulate.hpp"

using namespace kacov;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

std::vector<double> values(const Trajectory& t) {
  std::vector<double> v;
  for (const auto& p : t.points) v.push_back(p.coords()[0]);
  return v;
}

double autocorr(const std::vector<double>& x, std::size_t lag) {
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    den += (x[t] - m) * (x[t] - m);
    if (t + lag < x.size()) num += (x[t] - m) * (x[t + lag] - m);
  }
  return num / den;
}

}  // namespace

TEST_CASE("stationary distribution examples") {
  const Eigen::VectorXd a = stationary_distribution(mat2(0.5, 0.5, 0.5, 0.5));
  CHECK(a(0) == doctest::Approx(0.5).epsilon(1e-14));
  const Eigen::VectorXd b = stationary_distribution(mat2(0.75, 0.25, 0.25, 0.75));
  CHECK(b(1) == doctest::Approx(0.5).epsilon(1e-14));
  const Eigen::VectorXd c = stationary_distribution(mat2(0.9, 0.1, 0.5, 0.5));
  CHECK(c(0) == doctest::Approx(5.0 / 6.0).epsilon(1e-13));
  CHECK(c(1) == doctest::Approx(1.0 / 6.0).epsilon(1e-13));
}

TEST_CASE("reducible or periodic chains are rejected") {
  for (const auto& p : {mat2(1, 0, 0, 1), mat2(0, 1, 1, 0), mat2(0.5, 0.5, 0, 1)}) {
    try {
      (void)stationary_distribution(p);
      FAIL("accepted a degenerate chain");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::degenerate_chain);
    }
  }
  CHECK_THROWS_AS(MarkovChainModel::create(mat2(0.5, 0.6, 0.5, 0.5)), Error);
}

TEST_CASE("stationary residual on random chains") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    Eigen::MatrixXd p = (Eigen::MatrixXd::Random(5, 5).array() + 1.1).matrix();
    for (Eigen::Index i = 0; i < 5; ++i) p.row(i) /= p.row(i).sum();
    const Eigen::VectorXd pi = stationary_distribution(p);
    CHECK((pi.transpose() * p - pi.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(pi.minCoeff() >= 0.0);
  }
}

TEST_CASE("simulate_markov is deterministic and stationary") {
  const auto model = two_state_chain(0.25);
  const Trajectory a = simulate_markov(model, 5, 1, 42);
  const Trajectory b = simulate_markov(model, 5, 1, 42);
  CHECK(a.points.size() == 6);
  CHECK(a.points == b.points);
  CHECK(a.n() == 5);
  CHECK(a.burn_in == 0);
  CHECK(a.seed == 42);

  const auto idx = simulate_markov_indices(model, 100000, 3);
  std::vector<double> freq(2, 0.0);
  Eigen::Matrix2d trans = Eigen::Matrix2d::Zero();
  for (std::size_t t = 0; t < idx.size(); ++t) {
    freq[idx[t]] += 1.0 / static_cast<double>(idx.size());
    if (t + 1 < idx.size()) trans(static_cast<Eigen::Index>(idx[t]), static_cast<Eigen::Index>(idx[t + 1])) += 1.0;
  }
  CHECK(std::abs(freq[0] - 0.5) < 0.01);
  for (Eigen::Index i = 0; i < 2; ++i) trans.row(i) /= trans.row(i).sum();
  CHECK((trans - model.transition()).cwiseAbs().maxCoeff() < 0.02);
}

TEST_CASE("simulate_markov emits the configured state embedding") {
  const auto model = two_state_chain(0.25, {Point::at(0.0), Point::at(1.0)});
  const Trajectory t = simulate_markov(model, 50, 2, 1);
  CHECK(t.points.size() == 52);
  for (const auto& p : t.points) CHECK((p == Point::at(0.0) || p == Point::at(1.0)));
}

TEST_CASE("AR(1) moments") {
  const auto iid = values(simulate_ar1(AR1Model{0.0, 1.0}, 10000, 0, 5));
  CHECK(std::abs(autocorr(iid, 1)) < 0.05);

  const auto x = values(simulate_ar1(AR1Model{0.5, 1.0}, 100000, 0, 6));
  const double n = static_cast<double>(x.size());
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (const double v : x) var += (v - m) * (v - m) / n;
  CHECK(std::abs(var - 4.0 / 3.0) < 0.1);
  CHECK(std::abs(autocorr(x, 1) - 0.5) < 0.05);

  CHECK_THROWS_AS(simulate_ar1(AR1Model{1.0, 1.0}, 10, 0, 1), Error);
  CHECK(values(simulate_ar1(AR1Model{0.5, 1.0}, 100, 1, 9)) == values(simulate_ar1(AR1Model{0.5, 1.0}, 100, 1, 9)));
}

TEST_CASE("noisy maps stay in the unit interval") {
  const auto d = values(simulate_noisy_map(NoisyMapModel{MapKind::doubling, 4.0, 0.05}, 1000, 0, 1));
  CHECK(std::all_of(d.begin(), d.end(), [](double v) { return v >= 0.0 && v <= 1.0; }));

  const NoisyMapModel logistic{MapKind::logistic, 4.0, 0.01};
  const auto a = values(simulate_noisy_map(logistic, 100000, 0, 1));
  const auto b = values(simulate_noisy_map(logistic, 100000, 0, 2));
  const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  CHECK(mean >= 0.3);
  CHECK(mean <= 0.7);
  CHECK(a != b);
  std::vector<double> ha(20, 0.0), hb(20, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ha[std::min<std::size_t>(19, static_cast<std::size_t>(a[i] * 20))] += 1.0 / static_cast<double>(a.size());
    hb[std::min<std::size_t>(19, static_cast<std::size_t>(b[i] * 20))] += 1.0 / static_cast<double>(b.size());
  }
  double tv = 0.0;
  for (std::size_t i = 0; i < 20; ++i) tv += 0.5 * std::abs(ha[i] - hb[i]);
  CHECK(tv < 0.05);
}

TEST_CASE("noise-free logistic map below chaos is rejected") {
  try {
    (void)simulate_noisy_map(NoisyMapModel{MapKind::logistic, 3.2, 0.0}, 10, 0, 1);
    FAIL("accepted a non-mixing configuration");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::non_mixing_configuration);
  }
}

TEST_CASE("beta mixing of finite chains") {
  const auto model = two_state_chain(0.25);
  CHECK(beta_mixing_markov(model, 2) == doctest::Approx(0.125).epsilon(1e-13));
  // Closed form (1/2)|1-2p|^t.
  for (std::size_t t = 1; t <= 30; ++t) {
    CHECK(std::abs(beta_mixing_markov(model, t) - 0.5 * std::pow(0.5, static_cast<double>(t))) <= 1e-12);
  }
  const auto uniform = MarkovChainModel::create(Eigen::MatrixXd::Constant(4, 4, 0.25));
  CHECK(beta_mixing_markov(uniform, 1) <= 1e-15);

  Eigen::MatrixXd p(3, 3);
  p << 0.2, 0.5, 0.3, 0.6, 0.1, 0.3, 0.25, 0.25, 0.5;
  const auto chain = MarkovChainModel::create(p);
  const auto table = beta_mixing_table(chain, 40);
  for (std::size_t t = 1; t <= 40; ++t) {
    // Oracle: explicit matrix power.
    Eigen::MatrixXd pt = Eigen::MatrixXd::Identity(3, 3);
    for (std::size_t i = 0; i < t; ++i) pt = pt * p;
    double beta = 0.0;
    for (Eigen::Index i = 0; i < 3; ++i) {
      beta += chain.stationary()(i) * 0.5 * (pt.row(i).transpose() - chain.stationary()).cwiseAbs().sum();
    }
    CHECK(std::abs(table[t - 1] - beta) <= 1e-12);
    if (t > 1) CHECK(table[t - 1] <= table[t - 2] + 1e-12);
  }
}

TEST_CASE("geometric envelope fits") {
  std::vector<std::pair<double, double>> exact;
  for (int t = 1; t <= 10; ++t) exact.emplace_back(t, 0.5 * std::pow(0.5, t));
  const GeometricEnvelope e = fit_geometric_mixing(exact);
  CHECK(e.a == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(e.r == doctest::Approx(0.5).epsilon(1e-8));

  const auto model = two_state_chain(0.25);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = 1; t <= 10; ++t) pts.emplace_back(static_cast<double>(t), beta_mixing_markov(model, t));
  CHECK(std::abs(fit_geometric_mixing(pts).r - 0.5) <= 1e-6);

  const std::vector<std::pair<double, double>> one{{1.0, 0.2}, {2.0, 0.0}, {3.0, -1.0}};
  CHECK_THROWS_AS(fit_geometric_mixing(one), Error);

  const std::vector<std::pair<double, double>> noisy{{1, 0.3}, {2, 0.08}, {3, 0.05}, {4, 0.01}, {5, 0.009}};
  const GeometricEnvelope env = fit_geometric_mixing(noisy);
  for (const auto& [t, b] : noisy) CHECK(b <= env(t) * (1.0 + 1e-12));
}

TEST_CASE("trajectory CSV round trip") {
  const Trajectory a = simulate_ar1(AR1Model{0.3, 1.0}, 20, 1, 4);
  std::stringstream ss;
  write_trajectory_csv(ss, a);
  CHECK(ss.str().rfind("t,coord_0\n", 0) == 0);
  const Trajectory b = read_trajectory_csv(ss);
  CHECK(b.points == a.points);

  const Trajectory s = simulate_markov(two_state_chain(0.25), 10, 0, 1);
  std::stringstream ss2;
  write_trajectory_csv(ss2, s);
  CHECK(read_trajectory_csv(ss2).points == s.points);
}
