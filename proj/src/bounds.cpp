#include "kacov/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kacov/error.hpp"

namespace kacov {

namespace {

constexpr double kAlphaMax = 0.25;

double clamp_alpha(double v) {
  if (!std::isfinite(v)) return kAlphaMax;
  return std::clamp(v, 0.0, kAlphaMax);
}

void require(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::invalid_argument, what);
}

}  // namespace

MixingEnvelope::MixingEnvelope(std::function<double(long long)> fn,
                               std::optional<GeometricEnvelope> tail)
    : fn_(std::move(fn)), tail_(tail) {}

MixingEnvelope MixingEnvelope::zero() {
  return MixingEnvelope([](long long) { return 0.0; }, GeometricEnvelope{0.0, 0.5});
}

MixingEnvelope MixingEnvelope::constant(double value) {
  require(value >= 0.0, "mixing coefficient must be nonnegative");
  return MixingEnvelope([value](long long) { return value; });
}

MixingEnvelope MixingEnvelope::geometric(GeometricEnvelope g) {
  require(g.a >= 0.0 && g.r >= 0.0 && g.r < 1.0, "geometric envelope needs a >= 0, 0 <= r < 1");
  return MixingEnvelope([g](long long t) { return g(static_cast<double>(t)); }, g);
}

MixingEnvelope MixingEnvelope::tabulated(std::vector<double> table,
                                         std::optional<GeometricEnvelope> tail) {
  require(!table.empty(), "mixing table must not be empty");
  // Running minimum keeps the envelope nonincreasing even with roundoff.
  for (std::size_t i = 1; i < table.size(); ++i) table[i] = std::min(table[i], table[i - 1]);
  auto fn = [table = std::move(table), tail](long long t) {
    const auto idx = static_cast<std::size_t>(t - 1);
    if (idx < table.size()) return table[idx];
    const double last = table.back();
    return tail ? std::min(last, (*tail)(static_cast<double>(t))) : last;
  };
  return MixingEnvelope(std::move(fn), tail);
}

MixingEnvelope MixingEnvelope::markov(const MarkovChainModel& model, std::size_t t_max) {
  require(t_max >= 1, "t_max must be >= 1");
  std::vector<double> table = beta_mixing_table(model, t_max);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t t = 0; t < table.size(); ++t) {
    // Values near machine precision are roundoff, not signal.
    if (table[t] > 1e-13) pts.emplace_back(static_cast<double>(t + 1), table[t]);
  }
  std::optional<GeometricEnvelope> tail;
  if (pts.size() >= 3) {
    tail = fit_geometric_mixing(pts);
  } else {
    tail = GeometricEnvelope{table.back(), 0.5};
  }
  return tabulated(std::move(table), tail);
}

double MixingEnvelope::operator()(long long t) const {
  if (t <= 0) return kAlphaMax;
  return clamp_alpha(fn_(t));
}

BoundTerms bosq_terms(const BoundInputs& in, const MixingEnvelope& env) {
  require(in.epsilon > 0.0, "epsilon must be positive");
  require(in.n >= 2, "n must be >= 2");
  require(in.nu >= 1, "nu must be >= 1");
  require(in.q >= 1 && in.q <= in.n / 2, "q must lie in 1..floor(n/2)");
  require(in.delta > 0.0 && in.delta < 1.0, "delta must lie in (0,1)");
  require(in.c > 0.0, "kernel bound must be positive");
  require(in.lambda_tail >= 0.0 && std::isfinite(in.lambda_tail), "lambda_tail must be >= 0");
  const double nu = static_cast<double>(in.nu);
  const double q = static_cast<double>(in.q);
  const double e2 = in.epsilon * in.epsilon;
  BoundTerms t;
  t.term1 = 4.0 * nu * std::exp(-(1.0 - in.delta) * e2 * q / (32.0 * nu * in.c * in.c));
  const auto lag = static_cast<long long>(in.n / (2 * in.q));
  const double alpha = env(lag);
  t.term2 = alpha == 0.0 ? 0.0
                         : 22.0 * nu * q *
                               std::sqrt(1.0 + 8.0 * in.c / (in.epsilon * std::sqrt(1.0 - in.delta))) *
                               alpha;
  t.term3 = in.lambda_tail / (in.delta * e2);
  return t;
}

double bosq_bound(const BoundInputs& in, const MixingEnvelope& env) {
  return bosq_terms(in, env).total();
}

std::vector<std::size_t> q_grid(std::size_t n) {
  require(n >= 2, "n must be >= 2");
  const std::size_t qmax = n / 2;
  std::vector<std::size_t> grid;
  constexpr int kPoints = 32;
  for (int i = 0; i < kPoints; ++i) {
    const double frac = static_cast<double>(i) / (kPoints - 1);
    const auto q = static_cast<std::size_t>(std::llround(std::pow(static_cast<double>(qmax), frac)));
    grid.push_back(std::clamp<std::size_t>(q, 1, qmax));
  }
  grid.push_back(qmax);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

OptimizedBound optimize_bound(double epsilon, std::size_t n, double c, const MixingEnvelope& env,
                              std::span<const double> lambdas) {
  const std::size_t nu_max = std::max<std::size_t>(1, std::min<std::size_t>(50, lambdas.size()));
  // suffix[j] = sum of lambdas[j..]
  std::vector<double> suffix(lambdas.size() + 1, 0.0);
  for (std::size_t j = lambdas.size(); j-- > 0;) suffix[j] = suffix[j + 1] + std::max(lambdas[j], 0.0);
  const std::vector<std::size_t> qs = q_grid(n);

  OptimizedBound best;
  best.raw = std::numeric_limits<double>::infinity();
  for (std::size_t nu = 1; nu <= nu_max; ++nu) {
    for (const std::size_t q : qs) {
      for (int d = 1; d <= 9; ++d) {
        BoundInputs in{epsilon, n, nu, q, d / 10.0, c, nu < suffix.size() ? suffix[nu] : 0.0};
        const BoundTerms t = bosq_terms(in, env);
        if (t.total() < best.raw) {
          best.raw = t.total();
          best.argmin = in;
          best.terms = t;
        }
      }
    }
  }
  best.bound = std::min(best.raw, 1.0);
  return best;
}

double lil_norm_bound(double c, double m) {
  require(c > 0.0 && m >= 0.0, "lil bound needs c > 0 and M >= 0");
  return std::sqrt(4.0 * c * c + 32.0 * c * c * m);
}

double lil_log(double x) { return x > 0.0 ? std::max(std::log(x), 1.0) : 1.0; }

double lil_scale(double n) { return std::sqrt(2.0 * lil_log(lil_log(n))); }

double mixing_sum(const MixingEnvelope& env, std::size_t eta, std::size_t horizon,
                  std::optional<GeometricEnvelope> tail_cert) {
  require(horizon >= 1, "horizon must be >= 1");
  const auto shift = static_cast<long long>(eta);
  const auto h = static_cast<long long>(horizon);
  if (!tail_cert && env(h - shift) > 1e-12) {
    throw Error(ErrorCode::unconverged_sum, "mixing sum has not converged at the horizon");
  }
  double m = 0.0;
  for (long long t = 1; t <= h; ++t) m += env(t - shift);
  if (tail_cert && tail_cert->a > 0.0) {
    require(tail_cert->r >= 0.0 && tail_cert->r < 1.0, "tail certificate needs r < 1");
    m += tail_cert->a * std::pow(tail_cert->r, static_cast<double>(h - shift + 1)) /
         (1.0 - tail_cert->r);
  }
  return m;
}

double long_run_variance(std::span<const double> s, std::size_t max_lag) {
  const std::size_t n = s.size();
  require(n >= 1, "series must not be empty");
  require(4 * max_lag < n, "max_lag must be below n/4");
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  const auto autocov = [&](std::size_t h) {
    double acc = 0.0;
    for (std::size_t t = 0; t + h < n; ++t) acc += (s[t] - mean) * (s[t + h] - mean);
    return acc / static_cast<double>(n);
  };
  double v = autocov(0);
  for (std::size_t h = 1; h <= max_lag; ++h) {
    const double w = 1.0 - static_cast<double>(h) / static_cast<double>(max_lag + 1);
    v += 2.0 * w * autocov(h);
  }
  return std::max(v, 1e-12);
}

double asymptotic_variance(const Trajectory& traj, std::size_t eta, const KernelMeanExpansion& f,
                           const KernelMeanExpansion& g, std::size_t max_lag) {
  require(traj.points.size() > eta, "trajectory too short for the requested lag");
  const std::size_t n = traj.points.size() - eta;
  require(4 * max_lag < n, "max_lag must be below n/4");
  // Evaluate f and g once per distinct point.
  const MergedPoints m = merge_points(traj.points);
  std::vector<double> fv(m.unique.size()), gv(m.unique.size());
  for (std::size_t i = 0; i < m.unique.size(); ++i) {
    fv[i] = f(m.unique[i]);
    gv[i] = g(m.unique[i]);
  }
  std::vector<double> s(n);
  for (std::size_t t = 0; t < n; ++t) s[t] = gv[m.index[t + eta]] * fv[m.index[t]];
  return long_run_variance(s, max_lag);
}

RateFit rate_fit(std::span<const std::pair<double, double>> points) {
  require(points.size() >= 3, "rate fit needs at least 3 points");
  std::vector<double> x, y;
  for (const auto& [n, e] : points) {
    require(n > 0.0, "rate fit needs positive n");
    require(e > 0.0, "rate fit needs positive errors");
    x.push_back(std::log(n));
    y.push_back(std::log(e));
  }
  const double k = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / k;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / k;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  require(sxx > 0.0, "rate fit needs distinct n values");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

}  // namespace kacov
