// Command-line front end: scenario solves, robustness sweeps and plot-data
// extraction for the CR3BP low-thrust transfer solver.

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pddp/archive.hpp"
#include "pddp/config.hpp"
#include "pddp/robustness.hpp"
#include "pddp/scenarios.hpp"
#include "pddp/solver.hpp"

namespace fs = std::filesystem;
using namespace pddp;

namespace {

constexpr int kExitConverged = 0;
constexpr int kExitNotConverged = 1;
constexpr int kExitConfigError = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct RunSetup {
  TransferScenario scenario;
  SolverConfig solver;
  IntegratorConfig integ;
};

RunSetup resolve_setup(const std::string& scenario_name, const std::string& config_path, int stages_override,
                       int workers, int max_iters_override) {
  RunSetup setup;
  bool have_scenario = false;

  if (!scenario_name.empty()) {
    auto sc = find_scenario(scenario_name);
    if (!sc) throw ConfigError("unknown scenario `" + scenario_name + "`");
    setup.scenario = *sc;
    have_scenario = true;
  }
  // Table defaults, then scenario-specific penalties, then config overrides.
  setup.solver.scale_d = default_costate_scaling();
  if (have_scenario) {
    setup.solver.beta = setup.scenario.beta;
    setup.solver.rho2 = setup.scenario.rho2;
  }
  if (!config_path.empty()) {
    FlatConfig cfg = FlatConfig::parse(read_file(config_path));
    if (!have_scenario || cfg.has("scenario.name") || cfg.has("scenario.base") || cfg.has("scenario.x0")) {
      if (have_scenario) {
        // --scenario plus config: the config may refine the named scenario.
        cfg.set("scenario.base", setup.scenario.name);
      }
      setup.scenario = scenario_from_config(cfg);
      setup.solver.beta = setup.scenario.beta;
      setup.solver.rho2 = setup.scenario.rho2;
      have_scenario = true;
    }
    apply_solver_overrides(cfg, setup.solver);
    apply_integrator_overrides(cfg, setup.integ);
    cfg.ensure_all_consumed();
  }
  if (!have_scenario) throw ConfigError("no scenario given: use --scenario or --config");
  if (stages_override > 0) setup.scenario.n_stages = stages_override;
  if (workers > 0) setup.solver.workers = workers;
  if (max_iters_override > 0) setup.solver.max_iters = max_iters_override;
  setup.scenario.validate();
  return setup;
}

std::vector<VectorXd> seeded_costates(const TransferScenario& sc, std::uint64_t seed) {
  SampleRng rng(seed);
  std::vector<VectorXd> lams(sc.n_stages);
  for (auto& l : lams) {
    l = VectorXd(7);
    for (int i = 0; i < 7; ++i) l[i] = rng.next(sc.init_lo, sc.init_hi);
  }
  return lams;
}

int cmd_solve(const std::string& scenario_name, const std::string& config_path, const std::string& out_dir,
              long seed, int stages, int workers, int max_iters, const std::string& init_costates,
              const std::string& dump_config, int samples, bool quiet) {
  RunSetup setup = resolve_setup(scenario_name, config_path, stages, workers, max_iters);

  if (!dump_config.empty()) {
    FlatConfig cfg = scenario_to_config(setup.scenario);
    std::ofstream out(dump_config);
    out << cfg.serialize();
    if (!quiet) std::cout << "wrote scenario config to " << dump_config << "\n";
  }

  TransferProblem problem = make_transfer_problem(setup.scenario, setup.integ, setup.solver.rho1_init);
  std::vector<VectorXd> lams = init_costates.empty() ? seeded_costates(setup.scenario, seed)
                                                     : read_costates(init_costates);
  if (static_cast<int>(lams.size()) != setup.scenario.n_stages)
    throw ConfigError("initial costates carry " + std::to_string(lams.size()) + " stages, scenario needs " +
                      std::to_string(setup.scenario.n_stages));

  IterateSink sink;
  if (!quiet) {
    sink = [](const IterateRecord& r) {
      if (r.iter % 25 == 0)
        std::printf("iter %4d  J=%.9f  c=%.3e  ER0=%+.3e  chi=%+8.3f  %s  sigma=%.2e rho1=%.3g\n", r.iter,
                    r.j_aug, r.c, r.er0, r.chi, r.accepted ? "accept" : "reject", r.sigma, r.rho1);
    };
  }

  const auto t0 = std::chrono::steady_clock::now();
  SolutionBundle bundle = solve(problem, setup.solver, lams, sink);
  const double wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ResultArchive archive = build_archive(problem, setup.scenario, bundle, samples);
  archive.wall_time_s = wall_s;
  archive.seed = init_costates.empty() ? seed : -1;
  if (!out_dir.empty()) write_archive(archive, out_dir);

  if (!quiet) {
    std::printf("%s: %s after %d iterations (%d accepted, %.1f s)\n", setup.scenario.name.c_str(),
                bundle.converged ? "converged" : "did not converge", bundle.iterations,
                bundle.accepted_iterations, wall_s);
    std::printf("  final mass %.4f kg (fuel %.4f kg), %d switches, min Moon distance %.2f km\n",
                archive.final_mass_kg, archive.fuel_used_kg, archive.switch_count,
                archive.min_moon_distance_km);
    std::printf("  ||Psi||^2 = %.3e, s = %.3e, rho1 = %.3g, reason: %s\n", bundle.reference.c,
                bundle.reference.s_max, bundle.rho1, bundle.reason.c_str());
    if (!out_dir.empty()) std::printf("  archive written to %s\n", out_dir.c_str());
  }
  return bundle.converged ? kExitConverged : kExitNotConverged;
}

int cmd_sweep(const std::string& scenario_name, const std::string& out_dir, int n_samples,
              std::vector<double> interval, long seed, int stages, int workers, int max_iters,
              const std::string& solver_choice, bool quiet) {
  auto sc = find_scenario(scenario_name);
  if (!sc) throw ConfigError("unknown scenario `" + scenario_name + "`");
  if (sc->r2_min_km > 0.0) throw ConfigError("sweep compares unconstrained transfers only");

  SweepOptions opt;
  opt.n_samples = n_samples;
  if (!interval.empty()) {
    if (interval.size() != 2 || !(interval[0] < interval[1]))
      throw ConfigError("--interval wants LO HI with LO < HI");
    opt.interval_lo = interval[0];
    opt.interval_hi = interval[1];
  }
  opt.seed = static_cast<std::uint64_t>(seed);
  if (stages > 0) opt.stages = stages;
  opt.workers = workers > 0 ? workers : 1;
  if (max_iters > 0) opt.pddp_max_iters = max_iters;
  opt.run_pddp = solver_choice == "pddp" || solver_choice == "both";
  opt.run_shooting = solver_choice == "shooting" || solver_choice == "both";
  if (!opt.run_pddp && !opt.run_shooting) throw ConfigError("--solver must be pddp, shooting or both");

  SweepReport report = run_robustness_sweep(*sc, opt);

  if (!quiet) {
    std::printf("sweep %s: %d samples on [%g, %g]^7, seed %ld\n", sc->name.c_str(), report.n_samples,
                opt.interval_lo, opt.interval_hi, seed);
    if (report.ran_pddp)
      std::printf("  pddp (%d stages):  %d converged / %d\n", opt.stages, report.pddp_converged,
                  report.n_samples);
    if (report.ran_shooting)
      std::printf("  single shooting:   %d converged / %d\n", report.shooting_converged, report.n_samples);
  }

  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    FlatConfig summary;
    summary.set("schema", "pddp-sweep-v1");
    summary.set("scenario", sc->name);
    summary.set("samples", report.n_samples);
    summary.set("interval_lo", opt.interval_lo);
    summary.set("interval_hi", opt.interval_hi);
    summary.set("seed", static_cast<int>(seed));
    summary.set("pddp_stages", opt.stages);
    summary.set("pddp_converged", report.ran_pddp ? report.pddp_converged : -1);
    summary.set("shooting_converged", report.ran_shooting ? report.shooting_converged : -1);
    std::ofstream out(fs::path(out_dir) / "sweep.txt");
    out << summary.serialize();

    std::ofstream csv(fs::path(out_dir) / "sweep_samples.csv");
    csv << "# pddp-sweep-samples-v1\nindex,pddp_converged,shooting_converged,pddp_iters,shooting_iters\n";
    for (const auto& s : report.samples)
      csv << s.index << ',' << (s.pddp_converged ? 1 : 0) << ',' << (s.shooting_converged ? 1 : 0) << ','
          << s.pddp_iterations << ',' << s.shooting_iterations << "\n";
  }
  return kExitConverged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Costate-space differential dynamic programming for low-thrust CR3BP transfers"};
  app.require_subcommand(1);

  // solve
  std::string scenario, config_path, out_dir, init_costates, dump_config;
  long seed = 1;
  int stages = 0, workers = 2, max_iters = 0, samples = 2000;
  bool quiet = false;
  auto* solve_cmd = app.add_subcommand("solve", "Solve a transfer scenario");
  solve_cmd->add_option("--scenario", scenario, "Builtin scenario name");
  solve_cmd->add_option("--config", config_path, "Flat key=value config file");
  solve_cmd->add_option("--out", out_dir, "Archive output directory");
  solve_cmd->add_option("--seed", seed, "Costate initialization seed");
  solve_cmd->add_option("--stages", stages, "Override the stage count");
  solve_cmd->add_option("--workers", workers, "STM worker threads");
  solve_cmd->add_option("--max-iters", max_iters, "Override the iteration cap");
  solve_cmd->add_option("--init-costates", init_costates, "Warm-start stage costates file");
  solve_cmd->add_option("--dump-config", dump_config, "Write the resolved scenario as a config file");
  solve_cmd->add_option("--samples", samples, "Trajectory samples in the archive");
  solve_cmd->add_flag("--quiet", quiet, "Suppress progress output");

  // sweep
  std::string sweep_scenario = "dro-1rev", solver_choice = "both", sweep_out;
  int sweep_samples = 50, sweep_stages = 5, sweep_workers = 2, sweep_max_iters = 0;
  long sweep_seed = 1;
  std::vector<double> interval;
  bool sweep_quiet = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Convergence robustness comparison on random costates");
  sweep_cmd->add_option("--scenario", sweep_scenario, "Builtin scenario name");
  sweep_cmd->add_option("--samples", sweep_samples, "Number of random samples");
  sweep_cmd->add_option("--interval", interval, "Sampling interval LO HI")->expected(2);
  sweep_cmd->add_option("--seed", sweep_seed, "Sample stream seed");
  sweep_cmd->add_option("--stages", sweep_stages, "PDDP stage count");
  sweep_cmd->add_option("--workers", sweep_workers, "Sample worker threads");
  sweep_cmd->add_option("--max-iters", sweep_max_iters, "PDDP iteration cap per sample");
  sweep_cmd->add_option("--solver", solver_choice, "pddp, shooting or both");
  sweep_cmd->add_option("--out", sweep_out, "Report output directory");
  sweep_cmd->add_flag("--quiet", sweep_quiet, "Suppress progress output");

  // emit-plot-data
  std::string archive_dir, plot_out;
  auto* plot_cmd = app.add_subcommand("emit-plot-data", "Extract plot-ready tables from an archive");
  plot_cmd->add_option("--archive", archive_dir, "Archive directory")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory (default: archive dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (*solve_cmd)
      return cmd_solve(scenario, config_path, out_dir, seed, stages, workers, max_iters, init_costates,
                       dump_config, samples, quiet);
    if (*sweep_cmd)
      return cmd_sweep(sweep_scenario, sweep_out, sweep_samples, interval, sweep_seed, sweep_stages,
                       sweep_workers, sweep_max_iters, solver_choice, sweep_quiet);
    if (*plot_cmd) {
      emit_plot_data(archive_dir, plot_out.empty() ? archive_dir : plot_out);
      return kExitConverged;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const ArchiveError& e) {
    std::cerr << "archive error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNotConverged;
  }
  return kExitConfigError;
}
