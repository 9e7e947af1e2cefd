#pragma once

#include <atomic>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "pddp/scenarios.hpp"
#include "pddp/shooting.hpp"
#include "pddp/solver.hpp"

namespace pddp {

/// Deterministic uniform sampler (splitmix64 core) so sweep counts reproduce
/// across platforms and standard libraries.
class SampleRng {
 public:
  explicit SampleRng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double next(double lo, double hi) {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    z = z ^ (z >> 31);
    return lo + (hi - lo) * (static_cast<double>(z >> 11) * 0x1.0p-53);
  }
  Vector7d vector7(double lo, double hi) {
    Vector7d v;
    for (int i = 0; i < 7; ++i) v[i] = next(lo, hi);
    return v;
  }

 private:
  std::uint64_t state_;
};

struct SweepSample {
  int index = 0;
  Vector7d lam0;
  bool pddp_converged = false;
  bool shooting_converged = false;
  int pddp_iterations = 0;
  int shooting_iterations = 0;
};

struct SweepReport {
  int n_samples = 0;
  bool ran_pddp = false;
  bool ran_shooting = false;
  int pddp_converged = 0;
  int shooting_converged = 0;
  std::vector<SweepSample> samples;
};

struct SweepOptions {
  int n_samples = 50;
  double interval_lo = -1000.0;
  double interval_hi = 1000.0;
  std::uint64_t seed = 1;
  int stages = 5;            // PDDP stage count for the comparison
  bool run_pddp = true;
  bool run_shooting = true;
  int pddp_max_iters = 250;
  int shooting_max_iters = 200;
  double shooting_tol = 1e-7;
  int workers = 1;
  IntegratorConfig integ;
  double rho1 = 1.0;         // fixed smoothing, no continuation
};

/// Convergence comparison on identical costate samples: each 7-vector seeds
/// the shooting solver directly and every PDDP stage. The smoothing parameter
/// stays fixed, so PDDP convergence drops the bang-bang condition.
inline SweepReport run_robustness_sweep(const TransferScenario& scenario, const SweepOptions& opt) {
  SweepReport report;
  report.n_samples = opt.n_samples;
  report.ran_pddp = opt.run_pddp;
  report.ran_shooting = opt.run_shooting;
  report.samples.resize(opt.n_samples);

  // Draw all samples up front; worker scheduling cannot affect them.
  {
    SampleRng rng(opt.seed);
    for (int i = 0; i < opt.n_samples; ++i) {
      report.samples[i].index = i;
      report.samples[i].lam0 = rng.vector7(opt.interval_lo, opt.interval_hi);
    }
  }

  TransferScenario sc = scenario;
  sc.n_stages = opt.stages;

  std::atomic<int> next{0};
  auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= opt.n_samples) break;
      SweepSample& sample = report.samples[i];

      if (opt.run_pddp) {
        TransferProblem prob = make_transfer_problem(sc, opt.integ, opt.rho1);
        SolverConfig cfg;
        cfg.scale_d = default_costate_scaling();
        cfg.beta = sc.beta;
        cfg.max_iters = opt.pddp_max_iters;
        cfg.rho1_init = opt.rho1;
        cfg.rho1_bangbang = opt.rho1;  // continuation disabled
        cfg.workers = 1;               // parallelism lives at the sample level
        std::vector<VectorXd> lams(sc.n_stages, VectorXd(sample.lam0));
        SolutionBundle b = solve(prob, cfg, lams);
        sample.pddp_converged = b.converged;
        sample.pddp_iterations = b.iterations;
      }

      if (opt.run_shooting) {
        Cr3bpSystem sys = earth_moon_system();
        TransferDynamics dyn(sys, NondimEngine::from(default_engine(sc.t_max_N), sys),
                             SmoothingParams{opt.rho1});
        ShootingProblem prob(std::move(dyn), sc.x0_orbital, sc.xf_orbital, sys.days_to_nd(sc.tof_days),
                             opt.integ);
        ShootingOutcome out = solve_shooting(sample.lam0, prob, opt.shooting_tol, opt.shooting_max_iters);
        sample.shooting_converged = out.converged;
        sample.shooting_iterations = out.iterations;
      }
    }
  };

  const int workers = std::max(1, std::min(opt.workers, opt.n_samples));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& s : report.samples) {
    report.pddp_converged += s.pddp_converged ? 1 : 0;
    report.shooting_converged += s.shooting_converged ? 1 : 0;
  }
  return report;
}

}  // namespace pddp
