// Acceptance checks: one PASS/FAIL line per criterion id given on the command
// line (all ids when none are given). Thresholds are fixed here, not read from
// the configs; the configs only supply the experiment setup, which is itself
// checked against the required shape before a verdict is printed.
//
// Exit status is 0 when every requested criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oracle.hpp"
#include "kacov/bounds.hpp"
#include "kacov/cme.hpp"
#include "kacov/config.hpp"
#include "kacov/experiment.hpp"

using namespace kacov;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

fs::path config_dir() {
  if (const char* env = std::getenv("KACOV_CONFIG_DIR")) return env;
  return KACOV_CONFIG_DIR;
}

ExperimentConfig config(const std::string& name) { return load_config(config_dir() / (name + ".toml")); }

std::map<std::string, ExperimentReport>& cache() {
  static std::map<std::string, ExperimentReport> reports;
  return reports;
}

const ExperimentReport& report(const std::string& name) {
  auto it = cache().find(name);
  if (it == cache().end()) it = cache().emplace(name, run(config(name))).first;
  return it->second;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double median_at(const json& curve, std::size_t n) {
  for (const auto& p : curve) {
    if (p.at("n").get<std::size_t>() == n) return p.at("median").get<double>();
  }
  throw std::runtime_error("no curve point at n=" + std::to_string(n));
}

std::vector<std::size_t> pow2(int lo, int hi) {
  std::vector<std::size_t> v;
  for (int e = lo; e <= hi; ++e) v.push_back(std::size_t{1} << e);
  return v;
}

bool shape(const ExperimentConfig& cfg, const std::vector<std::size_t>& grid, std::size_t reps,
           std::string& why) {
  if (cfg.n_grid != grid) why += " [n_grid differs]";
  if (cfg.replicates != reps) why += " [replicates differ]";
  return why.empty();
}

// 1. Embedding oracle over 20 random Table-kernel instances.
Verdict oracle_equivalence() {
  CounterRng rng(0x5eed);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = static_cast<Eigen::Index>(2 + rng.next_u64() % 7);  // m <= 8
    const auto ms = static_cast<std::size_t>(m);
    const Eigen::MatrixXd g = oracle::random_gram(rng, m);
    const KernelSpec k = KernelSpec::table(g);
    const oracle::Embedding e(g);
    const auto a = oracle::random_operator(rng, k, ms);
    const auto b = oracle::random_operator(rng, k, ms);
    const auto h = oracle::random_mean(rng, k, ms);
    const Eigen::MatrixXd ea = e.of(a), eb = e.of(b);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(ea);
    worst = std::max(worst, std::abs(hs_inner(a, b) - ea.cwiseProduct(eb).sum()));
    worst = std::max(worst, std::abs(hs_norm(a) - ea.norm()));
    worst = std::max(worst, std::abs(op_norm(a) - svd.singularValues()(0)));
    worst = std::max(worst, (e.of(apply(a, h)) - ea * e.of(h)).cwiseAbs().maxCoeff());
    const auto pts = oracle::random_states(rng, 50, ms);
    const double gamma = 0.05 + 0.05 * trial;
    const Eigen::MatrixXd want = oracle::cme_embedded(e, pts, 1, gamma);
    for (auto policy : {AnchorPolicy::merge_duplicates, AnchorPolicy::keep_all}) {
      worst = std::max(worst, (e.of(fit_cme(k, pts, 1, gamma, policy).expansion) - want).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-8, fmt("max abs deviation %.3g (tol 1e-8)", worst)};
}

// 2. SLLN ratio of medians.
Verdict slln() {
  std::string why;
  shape(config("convergence"), pow2(7, 13), 30, why);
  const json& curve = report("convergence").aggregate.at("curve");
  const double ratio = median_at(curve, 8192) / median_at(curve, 128);
  return {why.empty() && ratio <= 0.25, fmt("median(8192)/median(128) = %.4f (need <= 0.25)", ratio) + why};
}

// 3. Rate: slope refit from the reported medians.
Verdict rate() {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : report("convergence").aggregate.at("curve")) {
    pts.emplace_back(p.at("n").get<double>(), p.at("median").get<double>());
  }
  const RateFit f = rate_fit(pts);
  const bool ok = pts.size() == 7 && f.slope >= -0.65 && f.slope <= -0.35;
  return {ok, fmt("slope %.4f (need in [-0.65, -0.35]), R^2 %.3f", f.slope, f.r2)};
}

// 4. CLT: KS distance recomputed from the per-replicate statistics.
Verdict clt() {
  std::string why;
  shape(config("clt"), {4096}, 500, why);
  std::vector<double> z;
  for (const auto& r : report("clt").replicates) z.push_back(r.at("statistic").get<double>());
  const double ks = ks_distance_normal(z);
  return {why.empty() && z.size() == 500 && ks < 0.08, fmt("KS %.4f over %.0f replicates (need < 0.08)", ks, static_cast<double>(z.size())) + why};
}

// 5. Concentration: clipped bound dominates exceedance frequency.
Verdict concentration() {
  std::string why;
  shape(config("bound"), {2000}, 200, why);
  const json& eps = report("bound").aggregate.at("epsilons");
  std::vector<double> seen;
  int violations = 0;
  std::ostringstream os;
  for (const auto& e : eps) {
    const double b = std::min(1.0, e.at("raw").get<double>());
    const double f = e.at("frequency").get<double>();
    seen.push_back(e.at("epsilon").get<double>());
    if (b < f) ++violations;
    os << " eps=" << e.at("epsilon").get<double>() << ":bound=" << b << ",freq=" << f;
  }
  if (seen != std::vector<double>{0.05, 0.1, 0.2}) why += " [epsilon set differs]";
  return {why.empty() && violations == 0, std::to_string(violations) + " violations;" + os.str() + why};
}

// 6. LIL: every rescaled error below the limit.
Verdict lil() {
  std::string why;
  shape(config("lil"), pow2(8, 14), 30, why);
  const ExperimentReport& r = report("lil");
  const auto env = MixingEnvelope::markov(markov_model(config("lil"), 0));
  const double m = mixing_sum(env, config("lil").eta, 1000000, env.tail());
  const double limit = lil_norm_bound(1.0, m) + 0.25;
  double worst = 0.0;
  std::size_t count = 0;
  for (const auto& rep : r.replicates) {
    for (const auto& v : rep.at("rescaled")) {
      worst = std::max(worst, v.get<double>());
      ++count;
    }
  }
  const bool ok = why.empty() && count == 7 * 30 && worst < limit;
  return {ok, fmt("max rescaled %.4f vs limit %.4f (M = %.4f)", worst, limit, m) + why};
}

// 7. PCA perturbation in 100/100 trials.
Verdict pca() {
  std::size_t pass = 0, total = 0;
  double min_slack = INFINITY;
  for (const auto& t : report("pca").replicates) {
    ++total;
    const double s = std::min(t.at("eigenvalue_slack").get<double>(), t.at("projector_slack").get<double>());
    min_slack = std::min(min_slack, s);
    if (s >= -1e-9) ++pass;
  }
  return {total == 100 && pass == 100,
          fmt("%.0f/%.0f trials, min slack %.3g (need >= -1e-9)", static_cast<double>(pass),
              static_cast<double>(total), min_slack)};
}

// 8. Gamma decay, all three checks on every replicate.
Verdict gamma_decay() {
  std::string why;
  shape(config("gamma"), {500}, config("gamma").replicates, why);
  bool decreasing = true;
  double ratio = 0.0, slope = -INFINITY;
  for (const auto& rep : report("gamma").replicates) {
    decreasing = decreasing && rep.at("strictly_decreasing").get<bool>();
    ratio = std::max(ratio, rep.at("ratio").get<double>());
    slope = std::max(slope, rep.at("slope").get<double>());
  }
  const bool ok = why.empty() && decreasing && ratio < 1e-4 && slope < 0.0;
  return {ok, std::string("strictly decreasing: ") + (decreasing ? "yes" : "no") +
                  fmt(", max lambda20/lambda1 %.3g (need < 1e-4), max slope %.4f (need < 0)", ratio, slope) + why};
}

// 9a. Sum-rule bound holds in every trial.
Verdict cme_bound() {
  std::size_t held = 0, total = 0;
  for (const auto& rep : report("cme").replicates) {
    for (const auto& t : rep.at("trials")) {
      ++total;
      if (t.at("measured").get<double>() <= t.at("bound").get<double>() + 1e-9) ++held;
    }
  }
  return {total >= 30 && held == total,
          fmt("%.0f/%.0f trials with measured <= e_s + e_r + 1e-9", static_cast<double>(held), static_cast<double>(total))};
}

// 9b. Median error halves from n=128 to n=8192.
Verdict cme_halving() {
  const json& curve = report("cme").aggregate.at("curve");
  const double ratio = median_at(curve, 8192) / median_at(curve, 128);
  return {ratio <= 0.5, fmt("median(8192)/median(128) = %.4f (need <= 0.5)", ratio)};
}

// 10. Koopman eigenvalue moduli for both chains.
Verdict koopman() {
  const double a = report("koopman").aggregate.at("max_modulus_error").get<double>();
  const double b = report("koopman_random").aggregate.at("max_modulus_error").get<double>();
  std::string why;
  shape(config("koopman"), {5000}, config("koopman").replicates, why);
  return {why.empty() && a <= 0.05 && b <= 0.05,
          fmt("2-state max error %.4f, random 3-state max error %.4f (need <= 0.05)", a, b) + why};
}

// 11. Two full-suite runs give byte-identical CSVs.
Verdict determinism() {
  const std::vector<std::string> suite = {"convergence", "clt", "lil", "pca", "cme",
                                          "koopman", "koopman_random", "gamma", "bound"};
  const fs::path root = fs::temp_directory_path() / "kacov_acceptance_determinism";
  fs::remove_all(root);
  std::size_t files = 0, diffs = 0;
  for (const auto& name : suite) {
    const ExperimentConfig cfg = config(name);
    write_report(run(cfg), root / "a" / name);
    write_report(run(cfg), root / "b" / name);
    for (const auto& entry : fs::directory_iterator(root / "a" / name)) {
      if (entry.path().extension() != ".csv") continue;
      ++files;
      const auto read = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), {});
      };
      if (read(entry.path()) != read(root / "b" / name / entry.path().filename())) ++diffs;
    }
  }
  fs::remove_all(root);
  return {files > 0 && diffs == 0,
          fmt("%.0f CSV files compared, %.0f differ", static_cast<double>(files), static_cast<double>(diffs))};
}

struct Criterion {
  std::string id;
  std::function<Verdict()> check;
  double budget_seconds;  // 0: no runtime requirement
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"1", oracle_equivalence, 5},   {"2", slln, 60},        {"3", rate, 120},
      {"4", clt, 180},                {"5", concentration, 0}, {"6", lil, 0},
      {"7", pca, 0},                  {"8", gamma_decay, 0},         {"9a", cme_bound, 0},
      {"9b", cme_halving, 0},         {"10", koopman, 0},      {"11", determinism, 0},
  };
  std::vector<std::string> wanted(argv + 1, argv + argc);
  bool ok = true;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
      v.pass = false;
      v.detail += fmt(" [runtime %.1fs over %.0fs budget]", secs, c.budget_seconds);
    }
    std::cout << (v.pass ? "PASS " : "FAIL ") << c.id << "  " << v.detail << fmt("  (%.2fs)", secs) << "\n";
    ok = ok && v.pass;
  }
  return ok ? 0 : 1;
}
