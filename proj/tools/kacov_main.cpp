// kacov: run a named experiment, emit plot data, or dump a simulated trajectory.
//
// Exit codes: 0 all certificates hold, 2 some certificate failed, 1 error.

#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "kacov/config.hpp"
#include "kacov/error.hpp"
#include "kacov/experiment.hpp"
#include "kacov/plots.hpp"
#include "kacov/simulate.hpp"

namespace {

struct RunArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

kacov::ExperimentConfig load(const RunArgs& a) {
  kacov::ExperimentConfig cfg = kacov::load_config(a.config);
  if (a.seed) cfg.base_seed = *a.seed;
  if (a.out) cfg.output = *a.out;
  return cfg;
}

int run_experiment(const std::string& name, const RunArgs& a) {
  const kacov::ExperimentConfig cfg = load(a);
  if (kacov::to_string(cfg.experiment) != name) {
    throw kacov::Error(kacov::ErrorCode::config_parse,
                       a.config + ": config is for '" + std::string(kacov::to_string(cfg.experiment)) +
                           "', not '" + name + "'");
  }
  const kacov::ExperimentReport rep = kacov::run(cfg);
  kacov::write_report(rep, cfg.output);
  for (const auto& c : rep.certificates) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << c.value
              << " threshold=" << c.threshold << " slack=" << c.slack << "\n";
  }
  std::cout << "wrote " << (cfg.output / "report.json").string() << "\n";
  return rep.passed() ? 0 : 2;
}

int run_simulate(const RunArgs& a) {
  const kacov::ExperimentConfig cfg = load(a);
  const std::size_t n = cfg.n_grid.back();
  kacov::Trajectory traj;
  if (const auto* ar = std::get_if<kacov::AR1Model>(&cfg.model)) {
    traj = kacov::simulate_ar1(*ar, n, cfg.eta, cfg.base_seed);
  } else if (const auto* nm = std::get_if<kacov::NoisyMapModel>(&cfg.model)) {
    traj = kacov::simulate_noisy_map(*nm, n, cfg.eta, cfg.base_seed);
  } else {
    traj = kacov::simulate_markov(kacov::markov_model(cfg, cfg.base_seed), n, cfg.eta, cfg.base_seed);
  }
  std::filesystem::create_directories(cfg.output);
  const auto path = cfg.output / "trajectory.csv";
  std::ofstream os(path, std::ios::binary);
  if (!os) throw kacov::Error(kacov::ErrorCode::io, "cannot write " + path.string());
  kacov::write_trajectory_csv(os, traj);
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kernel autocovariance operator experiments"};
  app.require_subcommand(1);

  RunArgs args;
  const auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "TOML experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "override the base seed");
    sub->add_option("--out", args.out, "override the output directory");
  };

  std::string selected;
  for (const char* name : {"convergence", "clt", "lil", "pca", "cme", "koopman", "gamma", "bound"}) {
    CLI::App* sub = app.add_subcommand(name, std::string("run the ") + name + " experiment");
    add_run_options(sub);
    sub->callback([&selected, name] { selected = name; });
  }
  CLI::App* sim = app.add_subcommand("simulate", "write the base-seed trajectory for a config");
  add_run_options(sim);
  sim->callback([&selected] { selected = "simulate"; });

  std::string report;
  std::string plot_out = ".";
  CLI::App* plot = app.add_subcommand("plot", "write gnuplot data and scripts from a report");
  plot->add_option("--report", report, "report.json path")->required();
  plot->add_option("--out", plot_out, "directory for .dat/.gp files");
  plot->callback([&selected] { selected = "plot"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (selected == "simulate") return run_simulate(args);
    if (selected == "plot") {
      for (const auto& p : kacov::emit_plots(report, plot_out)) std::cout << "wrote " << p.string() << "\n";
      return 0;
    }
    return run_experiment(selected, args);
  } catch (const std::exception& e) {
    std::cerr << "kacov: " << e.what() << "\n";
    return 1;
  }
}
