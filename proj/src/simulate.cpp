#include "kacov/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "kacov/error.hpp"
#include "kacov/io.hpp"
#include "kacov/rng.hpp"

namespace kacov {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kStationaryTol = 1e-10;

void validate_transition(const Eigen::MatrixXd& p) {
  if (p.rows() == 0 || p.rows() != p.cols()) {
    throw Error(ErrorCode::invalid_argument, "transition matrix must be square and nonempty");
  }
  if (!p.allFinite() || p.minCoeff() < 0.0) {
    throw Error(ErrorCode::invalid_argument, "transition matrix entries must be finite and >= 0");
  }
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (std::abs(p.row(i).sum() - 1.0) > kRowSumTol) {
      throw Error(ErrorCode::invalid_argument, "transition matrix rows must sum to 1");
    }
  }
}

// Primitive iff some power up to (m-1)^2 + 1 <= m^2 is strictly positive.
bool is_primitive(const Eigen::MatrixXd& p) {
  const Eigen::Index m = p.rows();
  using BoolMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const BoolMat adj = (p.array() > 0.0).cast<int>();
  BoolMat reach = adj;
  const Eigen::Index max_power = std::max<Eigen::Index>(1, m * m);
  for (Eigen::Index k = 1; k <= max_power; ++k) {
    if ((reach.array() > 0).all()) return true;
    reach = ((reach * adj).array() > 0).cast<int>();
  }
  return false;
}

double reflect_unit(double x) {
  double y = std::fmod(std::abs(x), 2.0);
  if (y > 1.0) y = 2.0 - y;
  return y;
}

std::size_t draw_index(CounterRng& rng, const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  const Eigen::Index last = probs.size() - 1;
  for (Eigen::Index j = 0; j < last; ++j) {
    acc += probs(j);
    if (u < acc) return static_cast<std::size_t>(j);
  }
  // Skip trailing zero-probability states when rounding leaves u >= acc.
  Eigen::Index j = last;
  while (j > 0 && probs(j) == 0.0) --j;
  return static_cast<std::size_t>(j);
}

}  // namespace

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition) {
  validate_transition(transition);
  if (!is_primitive(transition)) {
    throw Error(ErrorCode::degenerate_chain, "chain is reducible or periodic");
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(transition.transpose());
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::eigensolver_failure, "eigensolve of P^T failed");
  }
  Eigen::Index best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double d = std::abs(es.eigenvalues()(i) - std::complex<double>(1.0, 0.0));
    if (d < best_dist) {
      best_dist = d;
      best = i;
    }
  }
  Eigen::VectorXd pi = es.eigenvectors().col(best).real();
  pi /= pi.sum();
  pi = pi.cwiseMax(0.0);
  pi /= pi.sum();
  // A few power steps polish the eigensolver output to the residual budget.
  for (int it = 0; it < 4; ++it) {
    const Eigen::VectorXd next = transition.transpose() * pi;
    if ((next - pi).cwiseAbs().maxCoeff() <= 1e-14) break;
    pi = next / next.sum();
  }
  if ((transition.transpose() * pi - pi).cwiseAbs().maxCoeff() > kStationaryTol) {
    throw Error(ErrorCode::eigensolver_failure, "stationary residual exceeds tolerance");
  }
  return pi;
}

MarkovChainModel MarkovChainModel::create(Eigen::MatrixXd transition, PointList states) {
  MarkovChainModel model;
  model.pi_ = stationary_distribution(transition);
  model.p_ = std::move(transition);
  if (states.empty()) {
    states.reserve(static_cast<std::size_t>(model.p_.rows()));
    for (Eigen::Index i = 0; i < model.p_.rows(); ++i) {
      states.push_back(Point::state(static_cast<std::size_t>(i)));
    }
  }
  if (states.size() != static_cast<std::size_t>(model.p_.rows())) {
    throw Error(ErrorCode::invalid_argument, "state list size does not match transition matrix");
  }
  model.states_ = std::move(states);
  return model;
}

Eigen::MatrixXd MarkovChainModel::power(std::size_t t) const {
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(p_.rows(), p_.cols());
  Eigen::MatrixXd base = p_;
  while (t > 0) {
    if (t & 1U) result = result * base;
    t >>= 1U;
    if (t > 0) base = base * base;
  }
  return result;
}

MarkovChainModel two_state_chain(double p, PointList states) {
  Eigen::MatrixXd transition(2, 2);
  transition << 1.0 - p, p, p, 1.0 - p;
  return MarkovChainModel::create(std::move(transition), std::move(states));
}

std::vector<std::size_t> simulate_markov_indices(const MarkovChainModel& model, std::size_t length,
                                                 std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<std::size_t> idx;
  idx.reserve(length);
  if (length == 0) return idx;
  std::size_t s = draw_index(rng, model.stationary().transpose());
  idx.push_back(s);
  for (std::size_t t = 1; t < length; ++t) {
    s = draw_index(rng, model.transition().row(static_cast<Eigen::Index>(s)));
    idx.push_back(s);
  }
  return idx;
}

Trajectory simulate_markov(const MarkovChainModel& model, std::size_t n, std::size_t eta,
                           std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "n must be >= 1");
  const auto idx = simulate_markov_indices(model, n + eta, seed);
  Trajectory traj;
  traj.points.reserve(idx.size());
  for (const std::size_t s : idx) traj.points.push_back(model.states()[s]);
  traj.eta = eta;
  traj.seed = seed;
  traj.burn_in = 0;
  traj.model_id = "markov(m=" + std::to_string(model.size()) + ")";
  return traj;
}

Trajectory simulate_ar1(const AR1Model& model, std::size_t n, std::size_t eta, std::uint64_t seed,
                        std::size_t burn_in) {
  if (!(std::abs(model.a) < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "AR(1) coefficient must satisfy |a| < 1");
  }
  if (!(model.noise_std > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "AR(1) noise_std must be positive");
  }
  if (n < 1) throw Error(ErrorCode::invalid_argument, "n must be >= 1");
  CounterRng rng(seed);
  double x = rng.normal() * model.noise_std / std::sqrt(1.0 - model.a * model.a);
  for (std::size_t t = 0; t < burn_in; ++t) x = model.a * x + model.noise_std * rng.normal();
  Trajectory traj;
  traj.points.reserve(n + eta);
  for (std::size_t t = 0; t < n + eta; ++t) {
    traj.points.push_back(Point::at(x));
    x = model.a * x + model.noise_std * rng.normal();
  }
  traj.eta = eta;
  traj.seed = seed;
  traj.burn_in = burn_in;
  std::ostringstream id;
  id << "ar1(a=" << model.a << ",noise_std=" << model.noise_std << ")";
  traj.model_id = id.str();
  return traj;
}

Trajectory simulate_noisy_map(const NoisyMapModel& model, std::size_t n, std::size_t eta,
                              std::uint64_t seed, std::size_t burn_in) {
  if (!(model.noise_std >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "noise_std must be nonnegative");
  }
  if (model.map == MapKind::logistic) {
    if (!(model.r > 0.0 && model.r <= 4.0)) {
      throw Error(ErrorCode::invalid_argument, "logistic parameter must lie in (0, 4]");
    }
    if (model.noise_std == 0.0 && model.r < 3.57) {
      throw Error(ErrorCode::non_mixing_configuration,
                  "noise-free logistic map below r = 3.57 is not mixing");
    }
  }
  if (n < 1) throw Error(ErrorCode::invalid_argument, "n must be >= 1");
  CounterRng rng(seed);
  const auto step = [&](double x) {
    const double mapped =
        model.map == MapKind::logistic ? model.r * x * (1.0 - x) : std::fmod(2.0 * x, 1.0);
    const double noise = model.noise_std > 0.0 ? model.noise_std * rng.normal() : 0.0;
    return reflect_unit(mapped + noise);
  };
  double x = rng.uniform();
  for (std::size_t t = 0; t < burn_in; ++t) x = step(x);
  Trajectory traj;
  traj.points.reserve(n + eta);
  for (std::size_t t = 0; t < n + eta; ++t) {
    traj.points.push_back(Point::at(x));
    x = step(x);
  }
  traj.eta = eta;
  traj.seed = seed;
  traj.burn_in = burn_in;
  std::ostringstream id;
  id << (model.map == MapKind::logistic ? "logistic(r=" : "doubling(") ;
  if (model.map == MapKind::logistic) id << model.r << ",";
  id << "noise_std=" << model.noise_std << ")";
  traj.model_id = id.str();
  return traj;
}

namespace {

double beta_from_power(const Eigen::MatrixXd& pt, const Eigen::VectorXd& pi) {
  double beta = 0.0;
  for (Eigen::Index i = 0; i < pt.rows(); ++i) {
    const double tv = 0.5 * (pt.row(i).transpose() - pi).cwiseAbs().sum();
    beta += pi(i) * tv;
  }
  return beta;
}

}  // namespace

double beta_mixing_markov(const MarkovChainModel& model, std::size_t t) {
  if (t < 1) throw Error(ErrorCode::invalid_argument, "mixing lag must be >= 1");
  return beta_from_power(model.power(t), model.stationary());
}

std::vector<double> beta_mixing_table(const MarkovChainModel& model, std::size_t t_max) {
  std::vector<double> out;
  out.reserve(t_max);
  Eigen::MatrixXd pt = model.transition();
  for (std::size_t t = 1; t <= t_max; ++t) {
    out.push_back(beta_from_power(pt, model.stationary()));
    pt = pt * model.transition();
  }
  return out;
}

double GeometricEnvelope::operator()(double t) const { return a * std::pow(r, t); }

GeometricEnvelope fit_geometric_mixing(std::span<const std::pair<double, double>> betas) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& [t, b] : betas) {
    if (b > 0.0 && std::isfinite(b)) pts.emplace_back(t, b);
  }
  if (pts.size() < 3) {
    throw Error(ErrorCode::invalid_argument, "need at least 3 positive mixing coefficients");
  }
  double mt = 0.0, my = 0.0;
  for (const auto& [t, b] : pts) {
    mt += t;
    my += std::log(b);
  }
  mt /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0, sxx = 0.0;
  for (const auto& [t, b] : pts) {
    sxy += (t - mt) * (std::log(b) - my);
    sxx += (t - mt) * (t - mt);
  }
  if (sxx == 0.0) throw Error(ErrorCode::invalid_argument, "mixing lags must not all coincide");
  const double slope = sxy / sxx;
  const double r = std::exp(slope);
  if (!(r > 0.0 && r < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "mixing coefficients do not decay geometrically");
  }
  double log_a = my - slope * mt;
  for (const auto& [t, b] : pts) log_a = std::max(log_a, std::log(b) - t * slope);
  return GeometricEnvelope{std::exp(log_a), r};
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.points.empty()) {
    os << "t,coord_0\n";
    return;
  }
  const bool states = traj.points.front().kind() == PointKind::state;
  os << "t";
  if (states) {
    os << ",state";
  } else {
    for (std::size_t d = 0; d < traj.points.front().dim(); ++d) os << ",coord_" << d;
  }
  os << "\n";
  for (std::size_t t = 0; t < traj.points.size(); ++t) {
    const Point& p = traj.points[t];
    os << t;
    if (states) {
      os << "," << p.state_index();
    } else {
      for (const double c : p.coords()) os << "," << format_double(c);
    }
    os << "\n";
  }
}

Trajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::io, "empty trajectory file");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "t") {
    throw Error(ErrorCode::io, "trajectory header must start with 't'");
  }
  const bool states = header[1] == "state";
  Trajectory traj;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::io, "trajectory row " + std::to_string(row) + " has wrong width");
    }
    try {
      if (states) {
        traj.points.push_back(Point::state(std::stoull(cells[1])));
      } else {
        std::vector<double> coords;
        for (std::size_t c = 1; c < cells.size(); ++c) coords.push_back(std::stod(cells[c]));
        traj.points.push_back(Point::at(std::move(coords)));
      }
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::io, "trajectory row " + std::to_string(row) + " is not numeric");
    }
  }
  traj.model_id = "csv";
  return traj;
}

}  // namespace kacov
