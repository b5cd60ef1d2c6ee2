#include "kacov/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <fstream>
#include <numeric>

#include "kacov/bounds.hpp"
#include "kacov/cme.hpp"
#include "kacov/error.hpp"
#include "kacov/io.hpp"
#include "kacov/operator.hpp"
#include "kacov/parallel.hpp"
#include "kacov/spectral.hpp"

namespace kacov {

namespace {

using Row = std::vector<std::string>;

std::string cell(double x) { return format_double(x); }
std::string cell_int(std::uint64_t x) { return std::to_string(x); }

Certificate at_most(std::string name, double value, double threshold, std::string detail = {}) {
  return Certificate{std::move(name), value <= threshold, value, threshold, threshold - value,
                     std::move(detail)};
}

std::uint64_t seed_of(const ExperimentConfig& cfg, std::size_t r) { return cfg.base_seed + r; }

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

Trajectory simulate(const ExperimentConfig& cfg, std::size_t n, std::uint64_t seed) {
  const auto burn = cfg.param<std::size_t>("burn_in", 1000);
  if (const auto* ar = std::get_if<AR1Model>(&cfg.model)) return simulate_ar1(*ar, n, cfg.eta, seed, burn);
  if (const auto* nm = std::get_if<NoisyMapModel>(&cfg.model)) {
    return simulate_noisy_map(*nm, n, cfg.eta, seed, burn);
  }
  return simulate_markov(markov_model(cfg, seed), n, cfg.eta, seed);
}

Trajectory prefix(const Trajectory& t, std::size_t n, std::size_t eta) {
  Trajectory p = t;
  p.points.resize(std::min(t.points.size(), n + eta));
  return p;
}

double hs_distance(const OperatorExpansion& a, const OperatorExpansion& b) {
  return hs_norm(combine({{1.0, a}, {-1.0, b}}));
}

double op_distance(const OperatorExpansion& a, const OperatorExpansion& b) {
  return op_norm(combine({{1.0, a}, {-1.0, b}}));
}

// errors[r][i] for replicate r and grid point i -> median curve.
void add_curve(ExperimentReport& rep, const std::vector<std::size_t>& grid,
               const std::vector<std::vector<double>>& errors, const std::string& file) {
  CsvTable t{file, {"n", "median", "q25", "q75"}, {}};
  nlohmann::json curve = nlohmann::json::array();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<double> col;
    for (const auto& row : errors) col.push_back(row[i]);
    const double med = median(col), q25 = quantile(col, 0.25), q75 = quantile(col, 0.75);
    t.rows.push_back({cell_int(grid[i]), cell(med), cell(q25), cell(q75)});
    curve.push_back({{"n", grid[i]}, {"median", med}, {"q25", q25}, {"q75", q75}});
  }
  rep.tables.push_back(std::move(t));
  rep.aggregate["curve"] = std::move(curve);
}

double curve_median(const ExperimentReport& rep, std::size_t i) {
  return rep.aggregate.at("curve").at(i).at("median").get<double>();
}

// --- experiments -----------------------------------------------------------

void run_convergence(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const bool centered = cfg.param<bool>("centered", false);
  const std::size_t nmax = cfg.n_grid.back();
  const auto errors = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    const OperatorExpansion exact = exact_autocov_markov(k, model, cfg.eta, centered);
    const Trajectory traj = simulate_markov(model, nmax, cfg.eta, seed);
    std::vector<double> e;
    for (const std::size_t n : cfg.n_grid) {
      e.push_back(hs_distance(empirical_autocov(k, prefix(traj, n, cfg.eta), cfg.eta, centered), exact));
    }
    return e;
  });

  CsvTable t{"errors.csv", {"seed", "n", "error"}, {}};
  for (std::size_t r = 0; r < errors.size(); ++r) {
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
      t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(cfg.n_grid[i]), cell(errors[r][i])});
    }
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"errors", errors[r]}});
  }
  rep.tables.push_back(std::move(t));
  add_curve(rep, cfg.n_grid, errors, "curve.csv");

  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
    pts.emplace_back(static_cast<double>(cfg.n_grid[i]), curve_median(rep, i));
  }
  const double first = curve_median(rep, 0);
  const double last = curve_median(rep, cfg.n_grid.size() - 1);
  rep.certificates.push_back(at_most("slln", last / first, cfg.param<double>("slln_ratio", 0.25),
                                     "median error ratio, largest n over smallest n"));
  if (pts.size() >= 3) {
    const RateFit fit = rate_fit(pts);
    rep.aggregate["slope"] = fit.slope;
    rep.aggregate["intercept"] = fit.intercept;
    rep.aggregate["r2"] = fit.r2;
    const double lo = cfg.param<double>("slope_min", -0.65);
    const double hi = cfg.param<double>("slope_max", -0.35);
    rep.certificates.push_back(Certificate{"rate", fit.slope >= lo && fit.slope <= hi, fit.slope, hi,
                                           std::min(fit.slope - lo, hi - fit.slope),
                                           "log-log slope of the median curve"});
  }
}

void run_clt(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t n = cfg.n_grid.back();
  const auto f_state = cfg.param<std::size_t>("f_state", 1);
  const auto g_state = cfg.param<std::size_t>("g_state", 1);
  const auto max_lag = cfg.param<std::size_t>(
      "max_lag", static_cast<std::size_t>(std::floor(std::cbrt(static_cast<double>(n)))));

  struct Out {
    double numerator, sigma_hat, sigma_exact;
  };
  const auto outs = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    if (f_state >= model.size() || g_state >= model.size()) {
      throw Error(ErrorCode::invalid_argument, "f_state/g_state out of range");
    }
    const KernelMeanExpansion f(k, {model.states()[f_state]}, Eigen::VectorXd::Ones(1));
    const KernelMeanExpansion g(k, {model.states()[g_state]}, Eigen::VectorXd::Ones(1));
    const Trajectory traj = simulate_markov(model, n, cfg.eta, seed);
    const OperatorExpansion diff = combine({{1.0, empirical_autocov(k, traj, cfg.eta, false)},
                                            {-1.0, exact_autocov_markov(k, model, cfg.eta, false)}});
    Eigen::VectorXd fv(static_cast<Eigen::Index>(model.size())), gv(fv.size());
    for (std::size_t i = 0; i < model.size(); ++i) {
      fv(static_cast<Eigen::Index>(i)) = f(model.states()[i]);
      gv(static_cast<Eigen::Index>(i)) = g(model.states()[i]);
    }
    return Out{rkhs_inner(g, apply(diff, f)), std::sqrt(asymptotic_variance(traj, cfg.eta, f, g, max_lag)),
               std::sqrt(exact_long_run_variance(model, cfg.eta, fv, gv))};
  });

  const double rn = std::sqrt(static_cast<double>(n));
  std::vector<double> z, z_exact;
  CsvTable t{"statistics.csv", {"seed", "n", "numerator", "sigma_hat", "sigma_exact", "statistic", "statistic_exact"}, {}};
  for (std::size_t r = 0; r < outs.size(); ++r) {
    const Out& o = outs[r];
    z.push_back(rn * o.numerator / o.sigma_hat);
    z_exact.push_back(rn * o.numerator / o.sigma_exact);
    t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(n), cell(o.numerator), cell(o.sigma_hat),
                      cell(o.sigma_exact), cell(z.back()), cell(z_exact.back())});
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"n", n}, {"statistic", z.back()},
                              {"sigma_hat", o.sigma_hat}});
  }
  rep.tables.push_back(std::move(t));

  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  CsvTable qq{"qq.csv", {"theoretical", "empirical"}, {}};
  nlohmann::json qq_json = nlohmann::json::array();
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double p = (static_cast<double>(i) + 0.5) / static_cast<double>(sorted.size());
    // Inverse normal CDF by bisection on erfc; plenty for plotting positions.
    double lo = -10.0, hi = 10.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
    }
    const double th = 0.5 * (lo + hi);
    qq.rows.push_back({cell(th), cell(sorted[i])});
    qq_json.push_back({th, sorted[i]});
  }
  rep.tables.push_back(std::move(qq));

  const double ks = ks_distance_normal(z);
  const double ks_exact = ks_distance_normal(z_exact);
  rep.aggregate["ks"] = ks;
  rep.aggregate["ks_exact_variance"] = ks_exact;
  rep.aggregate["max_lag"] = max_lag;
  rep.aggregate["exact_sigma"] = outs.front().sigma_exact;
  rep.aggregate["qq"] = std::move(qq_json);
  rep.certificates.push_back(at_most("ks", ks, cfg.param<double>("ks_max", 0.08),
                                     "KS distance of the standardized statistic to N(0,1)"));
}

void run_lil(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t nmax = cfg.n_grid.back();
  const auto horizon = cfg.param<std::size_t>("horizon", 1000000);
  const double slack = cfg.param<double>("slack", 0.25);
  const bool centered = cfg.param<bool>("centered", false);

  const auto rescaled = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    const OperatorExpansion exact = exact_autocov_markov(k, model, cfg.eta, centered);
    const Trajectory traj = simulate_markov(model, nmax, cfg.eta, seed);
    std::vector<double> v;
    for (const std::size_t n : cfg.n_grid) {
      const double e = hs_distance(empirical_autocov(k, prefix(traj, n, cfg.eta), cfg.eta, centered), exact);
      const double nd = static_cast<double>(n);
      v.push_back(std::sqrt(nd) * e / lil_scale(nd));
    }
    return v;
  });

  // The limit uses the base replicate's model and kernel (fixed models agree across seeds).
  const MarkovChainModel model = markov_model(cfg, cfg.base_seed);
  const MixingEnvelope env = MixingEnvelope::markov(model);
  const double m = mixing_sum(env, cfg.eta, horizon, env.tail());
  const double c = kernel_bound(kernel_for(cfg, cfg.base_seed));
  const double limit = lil_norm_bound(c, m) + slack;

  CsvTable t{"rescaled.csv", {"seed", "n", "rescaled"}, {}};
  double worst = 0.0;
  for (std::size_t r = 0; r < rescaled.size(); ++r) {
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
      t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(cfg.n_grid[i]), cell(rescaled[r][i])});
      worst = std::max(worst, rescaled[r][i]);
    }
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"rescaled", rescaled[r]}});
  }
  rep.tables.push_back(std::move(t));
  add_curve(rep, cfg.n_grid, rescaled, "curve.csv");
  rep.aggregate["mixing_sum"] = m;
  rep.aggregate["kernel_bound"] = c;
  rep.aggregate["limit"] = limit;
  rep.aggregate["max_rescaled"] = worst;
  rep.certificates.push_back(at_most("lil", worst, limit, "max rescaled error vs LIL constant + slack"));
}

void run_pca(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t n = cfg.n_grid.back();
  const bool centered = cfg.param<bool>("centered", false);
  const double tol = cfg.param<double>("tolerance", 1e-9);

  struct Out {
    double delta, eig_slack, proj_slack;
    bool passed;
  };
  const auto outs = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    const Trajectory traj = simulate_markov(model, n, 0, seed);
    const OperatorExpansion exact = exact_autocov_markov(k, model, 0, centered);
    const OperatorExpansion emp = empirical_autocov(k, traj, 0, centered);
    const double delta = op_distance(emp, exact);
    const SpectralDecomposition de = spectral_decomposition_exact(exact, true);
    const SpectralDecomposition dn =
        kpca(k, traj.points, centered, std::min(traj.points.size(), model.size()));
    const PerturbationCertificate pc = perturbation_certificate(de, dn, delta, tol);
    return Out{delta, pc.eigenvalue_slack, pc.min_projector_slack(), pc.passed};
  });

  CsvTable t{"trials.csv", {"seed", "n", "delta", "eigenvalue_slack", "projector_slack", "passed"}, {}};
  std::size_t passes = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < outs.size(); ++r) {
    const Out& o = outs[r];
    passes += o.passed ? 1 : 0;
    min_slack = std::min({min_slack, o.eig_slack, o.proj_slack});
    t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(n), cell(o.delta), cell(o.eig_slack),
                      cell(o.proj_slack), o.passed ? "1" : "0"});
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"delta", o.delta},
                              {"eigenvalue_slack", o.eig_slack}, {"projector_slack", o.proj_slack},
                              {"passed", o.passed}});
  }
  rep.tables.push_back(std::move(t));
  rep.aggregate["passes"] = passes;
  rep.aggregate["trials"] = outs.size();
  rep.aggregate["min_slack"] = min_slack;
  rep.certificates.push_back(Certificate{"perturbation", passes == outs.size(),
                                         static_cast<double>(passes), static_cast<double>(outs.size()),
                                         min_slack, "trials where both inequalities hold"});
}

void run_cme(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t nmax = cfg.n_grid.back();
  const auto prior_state = cfg.param<std::size_t>("prior_state", 0);
  const double tol = cfg.param<double>("tolerance", 1e-9);

  const auto outs = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    if (prior_state >= model.size()) throw Error(ErrorCode::invalid_argument, "prior_state out of range");
    Eigen::VectorXd z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.size()));
    z(static_cast<Eigen::Index>(prior_state)) = 1.0;
    const PriorSpec prior = PriorSpec::point_mass(model.states()[prior_state]);
    const Trajectory traj = simulate_markov(model, nmax, cfg.eta, seed);
    std::vector<SumRuleError> v;
    for (const std::size_t n : cfg.n_grid) {
      v.push_back(error_decomposition(k, prefix(traj, n, cfg.eta), cfg.eta, cfg.gamma(n), model, z, prior));
    }
    return v;
  });

  CsvTable t{"trials.csv",
             {"seed", "n", "gamma", "measured", "e_s", "e_r", "bound", "prior_error", "c0_error", "ceta_error"},
             {}};
  std::vector<std::vector<double>> measured;
  std::size_t holds = 0, total = 0;
  double min_slack = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < outs.size(); ++r) {
    measured.emplace_back();
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t i = 0; i < cfg.n_grid.size(); ++i) {
      const SumRuleError& e = outs[r][i];
      const std::size_t n = cfg.n_grid[i];
      t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(n), cell(cfg.gamma(n)), cell(e.measured),
                        cell(e.e_s), cell(e.e_r), cell(e.bound), cell(e.prior_error), cell(e.c0_error),
                        cell(e.ceta_error)});
      measured.back().push_back(e.measured);
      holds += e.holds(tol) ? 1 : 0;
      ++total;
      min_slack = std::min(min_slack, e.bound - e.measured);
      per.push_back({{"n", n}, {"measured", e.measured}, {"bound", e.bound}});
    }
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"trials", std::move(per)}});
  }
  rep.tables.push_back(std::move(t));
  add_curve(rep, cfg.n_grid, measured, "curve.csv");
  rep.aggregate["holds"] = holds;
  rep.aggregate["trials"] = total;
  rep.certificates.push_back(Certificate{"sum_rule_bound", holds == total, static_cast<double>(holds),
                                         static_cast<double>(total), min_slack,
                                         "trials with measured <= e_s + e_r + tolerance"});
  const double ratio = curve_median(rep, cfg.n_grid.size() - 1) / curve_median(rep, 0);
  rep.aggregate["median_ratio"] = ratio;
  rep.certificates.push_back(at_most("halving", ratio, cfg.param<double>("halving_ratio", 0.5),
                                     "median measured error ratio, largest n over smallest n"));
}

void run_koopman(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t n = cfg.n_grid.back();
  const double gamma = cfg.gamma(n);
  const double tol = cfg.param<double>("tolerance", 0.05);

  struct Out {
    std::vector<std::complex<double>> got, want;
    std::vector<double> residual;
  };
  const auto outs = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    const Trajectory traj = simulate_markov(model, n, cfg.eta, seed);
    const KoopmanDecomposition dec = kedmd(k, traj, cfg.eta, gamma);
    Eigen::EigenSolver<Eigen::MatrixXd> es(model.power(cfg.eta));
    std::vector<std::complex<double>> want(es.eigenvalues().begin(), es.eigenvalues().end());
    std::stable_sort(want.begin(), want.end(), [](auto a, auto b) {
      if (std::abs(a) != std::abs(b)) return std::abs(a) > std::abs(b);
      return a.real() > b.real();
    });
    Out o{dec.eigenvalues, want, {}};
    for (std::size_t i = 0; i < dec.eigenvalues.size(); ++i) o.residual.push_back(koopman_residual(dec, i));
    return o;
  });

  CsvTable t{"eigenvalues.csv",
             {"seed", "index", "real", "imag", "modulus", "exact_real", "exact_imag", "exact_modulus", "residual"},
             {}};
  double worst = 0.0;
  for (std::size_t r = 0; r < outs.size(); ++r) {
    const Out& o = outs[r];
    const std::size_t m = std::max(o.got.size(), o.want.size());
    nlohmann::json moduli = nlohmann::json::array();
    for (std::size_t i = 0; i < m; ++i) {
      const std::complex<double> a = i < o.got.size() ? o.got[i] : 0.0;
      const std::complex<double> b = i < o.want.size() ? o.want[i] : 0.0;
      worst = std::max(worst, std::abs(std::abs(a) - std::abs(b)));
      const double res = i < o.residual.size() ? o.residual[i] : 0.0;
      t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(i), cell(a.real()), cell(a.imag()), cell(std::abs(a)),
                        cell(b.real()), cell(b.imag()), cell(std::abs(b)), cell(res)});
      moduli.push_back(std::abs(a));
    }
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"moduli", std::move(moduli)}});
  }
  rep.tables.push_back(std::move(t));
  rep.aggregate["max_modulus_error"] = worst;
  rep.aggregate["gamma"] = gamma;
  rep.certificates.push_back(at_most("eigenvalue_moduli", worst, tol,
                                     "max |modulus error| against the dense eigensolve of P^eta"));
}

void run_gamma(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t n = cfg.n_grid.back();
  const auto ratio_index = cfg.param<std::size_t>("ratio_index", 20);
  const double ratio_max = cfg.param<double>("ratio_max", 1e-4);
  const double floor_rel = cfg.param<double>("decrease_threshold", 1e-10);

  const auto spectra = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    return gamma_spectrum(kernel_for(cfg, seed), simulate(cfg, n, seed), cfg.eta);
  });

  CsvTable t{"spectrum.csv", {"seed", "j", "lambda", "jlogj"}, {}};
  bool decreasing = true;
  double worst_ratio = 0.0, worst_slope = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < spectra.size(); ++r) {
    const auto& lam = spectra[r];
    for (std::size_t j = 0; j < lam.size(); ++j) {
      const double jj = static_cast<double>(j + 1);
      t.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(j + 1), cell(lam[j]), cell(jj * std::log(jj))});
    }
    const double top = lam.empty() ? 0.0 : lam.front();
    // Significant part of the spectrum: lambda_j > floor_rel * lambda_1.
    std::size_t sig = 0;
    while (sig < lam.size() && lam[sig] > floor_rel * top) ++sig;
    bool dec = sig >= 1;
    for (std::size_t j = 1; j < sig; ++j) dec = dec && lam[j] < lam[j - 1];
    const double ratio = ratio_index <= lam.size() && top > 0.0 ? lam[ratio_index - 1] / top : 1.0;
    // Slope of log lambda_j on j log j (ordinary least squares).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t j = 0; j < sig; ++j) {
      const double x = static_cast<double>(j + 1) * std::log(static_cast<double>(j + 1));
      const double y = std::log(lam[j]);
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    const double k = static_cast<double>(sig);
    const double den = k * sxx - sx * sx;
    const double slope = sig >= 2 && den > 0.0 ? (k * sxy - sx * sy) / den : 0.0;
    decreasing = decreasing && dec;
    worst_ratio = std::max(worst_ratio, ratio);
    worst_slope = std::max(worst_slope, slope);
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"significant", sig}, {"strictly_decreasing", dec},
                              {"ratio", ratio}, {"slope", slope}});
  }
  rep.tables.push_back(std::move(t));

  // Seed-median spectrum for plotting.
  nlohmann::json med = nlohmann::json::array();
  const std::size_t len = spectra.empty() ? 0 : spectra.front().size();
  for (std::size_t j = 0; j < len; ++j) {
    std::vector<double> col;
    for (const auto& s : spectra) col.push_back(j < s.size() ? s[j] : 0.0);
    med.push_back(median(col));
  }
  rep.aggregate["spectrum"] = std::move(med);
  rep.aggregate["max_ratio"] = worst_ratio;
  rep.aggregate["max_slope"] = worst_slope;
  rep.certificates.push_back(Certificate{"strictly_decreasing", decreasing, decreasing ? 1.0 : 0.0, 1.0,
                                         decreasing ? 0.0 : -1.0,
                                         "eigenvalues above the relative floor strictly decrease"});
  rep.certificates.push_back(at_most("decay_ratio", worst_ratio, ratio_max,
                                     "lambda_" + std::to_string(ratio_index) + " / lambda_1"));
  rep.certificates.push_back(Certificate{"decay_slope", worst_slope < 0.0, worst_slope, 0.0, -worst_slope,
                                         "slope of log lambda_j against j log j"});
}

void run_bound(const ExperimentConfig& cfg, ExperimentReport& rep) {
  const std::size_t n = cfg.n_grid.back();
  const auto epsilons = cfg.param<std::vector<double>>("epsilons", {0.05, 0.1, 0.2});
  const bool centered = cfg.param<bool>("centered", false);

  const auto errors = parallel_map(cfg.replicates, [&](std::size_t r) {
    const auto seed = seed_of(cfg, r);
    const MarkovChainModel model = markov_model(cfg, seed);
    const KernelSpec k = kernel_for(cfg, seed);
    const Trajectory traj = simulate_markov(model, n, cfg.eta, seed);
    return hs_distance(empirical_autocov(k, traj, cfg.eta, centered),
                       exact_autocov_markov(k, model, cfg.eta, centered));
  });

  const MarkovChainModel model = markov_model(cfg, cfg.base_seed);
  const KernelSpec k = kernel_for(cfg, cfg.base_seed);
  const MixingEnvelope env = MixingEnvelope::markov(model);
  const double c = kernel_bound(k);
  const std::vector<double> lambdas =
      gamma_spectrum(k, simulate_markov(model, n, cfg.eta, cfg.base_seed), cfg.eta);

  CsvTable errs{"errors.csv", {"seed", "n", "error"}, {}};
  for (std::size_t r = 0; r < errors.size(); ++r) {
    errs.rows.push_back({cell_int(seed_of(cfg, r)), cell_int(n), cell(errors[r])});
    rep.replicates.push_back({{"seed", seed_of(cfg, r)}, {"error", errors[r]}});
  }
  rep.tables.push_back(std::move(errs));

  CsvTable terms{"bound.csv", {"epsilon", "nu", "q", "delta", "term1", "term2", "term3", "total"}, {}};
  CsvTable exceed{"exceedance.csv", {"epsilon", "bound", "raw", "frequency"}, {}};
  nlohmann::json agg = nlohmann::json::array();
  bool ok = true;
  double min_slack = std::numeric_limits<double>::infinity();
  for (const double eps : epsilons) {
    const OptimizedBound ob = optimize_bound(eps, n, c, env, lambdas);
    const auto hits = std::count_if(errors.begin(), errors.end(), [&](double e) { return e > eps; });
    const double freq = static_cast<double>(hits) / static_cast<double>(errors.size());
    const BoundInputs& a = ob.argmin;
    terms.rows.push_back({cell(eps), cell_int(a.nu), cell_int(a.q), cell(a.delta), cell(ob.terms.term1),
                          cell(ob.terms.term2), cell(ob.terms.term3), cell(ob.raw)});
    exceed.rows.push_back({cell(eps), cell(ob.bound), cell(ob.raw), cell(freq)});
    agg.push_back({{"epsilon", eps}, {"bound", ob.bound}, {"raw", ob.raw}, {"frequency", freq},
                   {"nu", a.nu}, {"q", a.q}, {"delta", a.delta}});
    ok = ok && ob.bound >= freq;
    min_slack = std::min(min_slack, ob.bound - freq);
  }
  rep.tables.push_back(std::move(terms));
  rep.tables.push_back(std::move(exceed));
  rep.aggregate["epsilons"] = std::move(agg);
  rep.aggregate["kernel_bound"] = c;
  rep.certificates.push_back(Certificate{"concentration", ok, min_slack, 0.0, min_slack,
                                         "optimized bound (clipped at 1) >= exceedance frequency"});
}

}  // namespace

void CsvTable::write(std::ostream& os) const {
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << csv_escape(cells[i]);
    os << "\r\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
}

bool ExperimentReport::passed() const {
  return std::all_of(certificates.begin(), certificates.end(), [](const Certificate& c) { return c.passed; });
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json certs = nlohmann::json::array();
  for (const auto& c : certificates) {
    certs.push_back({{"name", c.name}, {"passed", c.passed}, {"value", c.value},
                     {"threshold", c.threshold}, {"slack", c.slack}, {"detail", c.detail}});
  }
  nlohmann::json files = nlohmann::json::array();
  for (const auto& t : tables) files.push_back(t.name);
  return {{"experiment", std::string(to_string(experiment))},
          {"config", config},
          {"replicates", replicates},
          {"aggregate", aggregate},
          {"certificates", std::move(certs)},
          {"passed", passed()},
          {"files", std::move(files)},
          {"wall_clock_seconds", wall_clock_seconds}};
}

ExperimentReport run(const ExperimentConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.experiment = cfg.experiment;
  rep.config = cfg.echo;
  rep.config["seeds"]["base"] = cfg.base_seed;
  rep.config["seeds"]["replicates"] = cfg.replicates;
  rep.config["output"] = cfg.output.string();
  switch (cfg.experiment) {
    case ExperimentKind::convergence: run_convergence(cfg, rep); break;
    case ExperimentKind::clt: run_clt(cfg, rep); break;
    case ExperimentKind::lil: run_lil(cfg, rep); break;
    case ExperimentKind::pca: run_pca(cfg, rep); break;
    case ExperimentKind::cme: run_cme(cfg, rep); break;
    case ExperimentKind::koopman: run_koopman(cfg, rep); break;
    case ExperimentKind::gamma: run_gamma(cfg, rep); break;
    case ExperimentKind::bound: run_bound(cfg, rep); break;
  }
  rep.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

void write_report(const ExperimentReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());
  const auto open = [&](const std::string& name) {
    std::ofstream os(dir / name, std::ios::binary);
    if (!os) throw Error(ErrorCode::io, "cannot write " + (dir / name).string());
    return os;
  };
  for (const auto& t : report.tables) {
    auto os = open(t.name);
    t.write(os);
  }
  auto os = open("report.json");
  os << report.to_json().dump(2) << "\n";
}

double exact_long_run_variance(const MarkovChainModel& model, std::size_t eta,
                               const Eigen::VectorXd& fv, const Eigen::VectorXd& gv) {
  const std::size_t m = model.size();
  std::size_t size = 1;
  for (std::size_t i = 0; i <= eta; ++i) {
    size *= m;
    if (size > 4096) throw Error(ErrorCode::size_budget_exceeded, "block chain too large for the exact variance");
  }
  const std::size_t shift = size / m;  // m^eta
  const Eigen::MatrixXd& p = model.transition();
  const Eigen::VectorXd& pi = model.stationary();
  const auto s = static_cast<Eigen::Index>(size);
  Eigen::VectorXd law(s), h(s);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(s, s);
  std::vector<Eigen::Index> digits(eta + 1);
  for (std::size_t y = 0; y < size; ++y) {
    std::size_t rest = y;
    for (std::size_t d = eta + 1; d-- > 0;) {
      digits[d] = static_cast<Eigen::Index>(rest % m);
      rest /= m;
    }
    double w = pi(digits[0]);
    for (std::size_t d = 1; d <= eta; ++d) w *= p(digits[d - 1], digits[d]);
    const auto yi = static_cast<Eigen::Index>(y);
    law(yi) = w;
    h(yi) = fv(digits[0]) * gv(digits[eta]);
    for (std::size_t j = 0; j < m; ++j) {
      q(yi, static_cast<Eigen::Index>((y % shift) * m + j)) += p(digits[eta], static_cast<Eigen::Index>(j));
    }
  }
  const Eigen::VectorXd hc = h.array() - law.dot(h);
  Eigen::MatrixXd fundamental = Eigen::MatrixXd::Identity(s, s) - q;
  fundamental.rowwise() += law.transpose();
  const Eigen::VectorXd zh = fundamental.fullPivLu().solve(hc);
  const double v = 2.0 * law.dot(hc.cwiseProduct(zh)) - law.dot(hc.cwiseProduct(hc));
  return std::max(v, 0.0);
}

double ks_distance_normal(std::vector<double> sample) {
  if (sample.empty()) throw Error(ErrorCode::invalid_argument, "KS distance needs a sample");
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double cdf = 0.5 * std::erfc(-sample[i] / std::sqrt(2.0));
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  return d;
}

double quantile(std::vector<double> v, double p) {
  if (v.empty()) throw Error(ErrorCode::invalid_argument, "quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = (static_cast<double>(v.size()) - 1.0) * std::clamp(p, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace kacov
