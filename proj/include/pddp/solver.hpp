#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "pddp/problem.hpp"
#include "pddp/sweep.hpp"

namespace pddp {

/// Outer-loop parameters. Defaults follow the standard tuning table; beta and
/// rho2 are scenario-dependent.
struct SolverConfig {
  // Trust region
  double eps1 = 0.1;        // acceptance interval half-width
  double kappa = 0.25;      // radius step
  double delta0 = 100.0;
  double delta_min = 1e-7;
  double delta_max = 1e3;
  VectorXd scale_d;         // diagonal of D; empty = identity

  // Augmented Lagrangian
  double sigma0 = 1e2;
  double sigma_max = 1e10;
  double k_sigma = 1.1;
  double delta_sigma = 1e-5;
  double beta = 0.0;        // path-constraint penalty weight (fixed)

  // Bang-bang smoothing continuation
  double rho1_init = 1.0;
  double k_rho = 0.1;
  double rho1_bangbang = 1e-2;

  // Path-constraint softplus sharpness (consumed at problem construction)
  double rho2 = 1e-3;

  // Convergence tests
  double eps_opt = 1e-7;
  double eps_feas = 1e-7;
  double eps_spc = 1e-4;

  int max_iters = 2000;
  // Consecutive rejections at the minimum radius before declaring a stall.
  int stall_limit = 60;
  int workers = 1;

  void validate() const {
    if (!(eps1 > 0.0 && eps1 < 1.0)) throw std::invalid_argument("SolverConfig: eps1 in (0,1)");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("SolverConfig: kappa in (0,1)");
    if (!(delta_min > 0.0 && delta_min <= delta0 && delta0 <= delta_max))
      throw std::invalid_argument("SolverConfig: need delta_min <= delta0 <= delta_max");
    if (!(k_sigma > 1.0)) throw std::invalid_argument("SolverConfig: k_sigma > 1");
    if (!(k_rho > 0.0 && k_rho < 1.0)) throw std::invalid_argument("SolverConfig: k_rho in (0,1)");
    if (!(sigma0 > 0.0 && sigma_max >= sigma0)) throw std::invalid_argument("SolverConfig: sigma bounds");
    if (!(rho1_init > 0.0 && rho1_bangbang > 0.0)) throw std::invalid_argument("SolverConfig: rho1 > 0");
    if (!(eps_opt > 0.0 && eps_feas > 0.0 && eps_spc > 0.0))
      throw std::invalid_argument("SolverConfig: tolerances > 0");
    if (!(beta >= 0.0)) throw std::invalid_argument("SolverConfig: beta >= 0");
    if (max_iters < 1) throw std::invalid_argument("SolverConfig: max_iters >= 1");
  }
};

/// Diagnostics of one backward sweep / acceptance decision.
struct IterateRecord {
  int iter = 0;
  double j_aug = 0.0;       // augmented Lagrangian of the governing reference
  double c = 0.0;           // ||Psi||^2
  double s_max = 0.0;       // max accumulated path violation
  double er0 = 0.0;
  double chi = 0.0;
  bool accepted = false;
  double delta = 0.0;       // values after the update
  double sigma = 0.0;
  double rho1 = 0.0;
};

using IterateSink = std::function<void(const IterateRecord&)>;

struct ConvergenceVerdict {
  bool optimality = false;
  bool feasibility = false;
  bool path_feasibility = false;
  bool bang_bang = false;
  bool second_order = false;
  bool converged() const { return optimality && feasibility && path_feasibility && bang_bang && second_order; }

  std::string failing() const {
    std::string out;
    auto add = [&out](bool ok, const char* name) {
      if (!ok) {
        if (!out.empty()) out += ", ";
        out += name;
      }
    };
    add(optimality, "optimality");
    add(feasibility, "feasibility");
    add(path_feasibility, "path feasibility");
    add(bang_bang, "bang-bang smoothing");
    add(second_order, "second-order");
    return out.empty() ? "none" : out;
  }
};

/// Reference iterate: stage states/costates plus cached terminal data.
struct SolverReference {
  std::vector<VectorXd> x;    // stage states, size N
  std::vector<VectorXd> lam;  // stage costates, size N
  VectorXd x_final;
  TerminalExpansion te;
  double stage_cost_sum = 0.0;
  double c = 0.0;      // ||Psi||^2
  double s_max = 0.0;  // max component of s(t_f)
  double j_aug = 0.0;
};

struct SolutionBundle {
  bool converged = false;
  std::string reason;  // convergence or failure explanation
  int iterations = 0;
  int accepted_iterations = 0;
  SolverReference reference;
  VectorXd nu;
  double sigma = 0.0;
  double rho1 = 0.0;
  double delta = 0.0;
  double er0_last = 0.0;
  std::vector<IterateRecord> history;
};

namespace detail {

inline double augmented_cost(const SolverReference& ref, int nc, const VectorXd& nu, double sigma, double beta) {
  double j = ref.stage_cost_sum + ref.te.phi;
  if (nu.size() > 0) j += nu.dot(ref.te.psi) + sigma * ref.te.psi.squaredNorm();
  if (nc > 0) j += beta * ref.x_final.tail(nc).squaredNorm();
  return j;
}

inline void finalize_reference(const StagedProblem& problem, SolverReference& ref, const VectorXd& nu,
                               double sigma, double beta) {
  ref.te = problem.terminal(ref.x_final);
  ref.c = ref.te.psi.squaredNorm();
  const int nc = problem.path_dim();
  ref.s_max = nc > 0 ? ref.x_final.tail(nc).maxCoeff() : 0.0;
  ref.j_aug = augmented_cost(ref, nc, nu, sigma, beta);
}

inline SolverReference propagate_reference(const StagedProblem& problem, const std::vector<VectorXd>& lams,
                                           const VectorXd& nu, double sigma, double beta) {
  const int n = problem.num_stages();
  SolverReference ref;
  ref.x.resize(n);
  ref.lam = lams;
  VectorXd x = problem.initial_state();
  for (int k = 0; k < n; ++k) {
    ref.x[k] = x;
    ref.stage_cost_sum += problem.stage_cost(k, x, lams[k]).value;
    x = problem.propagate_segment(k, x, lams[k]);
  }
  ref.x_final = x;
  finalize_reference(problem, ref, nu, sigma, beta);
  return ref;
}

}  // namespace detail

/// Re-propagates the trajectory applying the costate update law
/// dlam_k = A_k + B_k dx_k + C_k dnu at every stage.
inline SolverReference forward_sweep(const StagedProblem& problem, const SolverReference& ref,
                                     const std::vector<StageGains>& gains, const VectorXd& dnu,
                                     const VectorXd& nu_new, double sigma, double beta) {
  const int n = problem.num_stages();
  SolverReference out;
  out.x.resize(n);
  out.lam.resize(n);
  VectorXd x = problem.initial_state();
  for (int k = 0; k < n; ++k) {
    out.x[k] = x;
    VectorXd lam = ref.lam[k] + gains[k].a_ff + gains[k].b_fb * (x - ref.x[k]);
    if (dnu.size() > 0) lam += gains[k].c_fb * dnu;
    out.lam[k] = lam;
    out.stage_cost_sum += problem.stage_cost(k, x, lam).value;
    x = problem.propagate_segment(k, x, lam);
  }
  out.x_final = x;
  detail::finalize_reference(problem, out, nu_new, sigma, beta);
  return out;
}

/// chi = (J_new - J_ref) / ER0, with the degenerate-prediction convention that
/// a vanishing ER0 accepts only a non-increasing cost.
inline double acceptance_ratio(double j_new, double j_ref, double er0) {
  if (std::abs(er0) < 1e-14) return j_new <= j_ref ? 1.0 : std::numeric_limits<double>::infinity();
  return (j_new - j_ref) / er0;
}

inline double update_trust_region(double delta, double chi, const SolverConfig& cfg) {
  if (std::abs(chi - 1.0) <= cfg.eps1) return std::min((1.0 + cfg.kappa) * delta, cfg.delta_max);
  return std::max((1.0 - cfg.kappa) * delta, cfg.delta_min);
}

struct MultiplierUpdate {
  VectorXd dnu;
  double er0 = 0.0;
};

/// Dual ascent step: solves TRQP(-J_nu, -J_nunu, delta) with identity scaling
/// and folds the predicted change into the expected reduction. While the dual
/// Hessian carries proper negative curvature the full Newton ascent is
/// admitted (its magnitude tracks the classical 2 sigma Psi multiplier step);
/// otherwise the step stays inside the shared costate radius.
inline MultiplierUpdate update_multipliers(const SweepSensitivities& sens1, double delta) {
  MultiplierUpdate out;
  const int nnu = static_cast<int>(sens1.j_nu.size());
  if (nnu == 0) {
    out.dnu = VectorXd();
    out.er0 = sens1.er;
    return out;
  }

  double radius = delta;
  const MatrixXd neg_hess = -0.5 * (sens1.j_nunu + sens1.j_nunu.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(neg_hess);
  const double min_eig = eig.eigenvalues().minCoeff();
  const double max_eig = eig.eigenvalues().maxCoeff();
  if (min_eig > 1e-12 * std::max(1.0, max_eig)) {
    const VectorXd newton = eig.eigenvectors() *
                            (eig.eigenvalues().cwiseInverse().asDiagonal() *
                             (eig.eigenvectors().transpose() * sens1.j_nu));
    radius = std::max(delta, newton.norm() * (1.0 + 1e-12));
  }

  TrustRegionConfig tr;
  tr.delta = radius;
  tr.delta_min = std::min(radius, 1e-7);
  tr.delta_max = std::max(radius, 1e3);
  tr.scale_d = VectorXd::Ones(nnu);
  TrqpResult trqp = solve_trqp(-sens1.j_nu, -sens1.j_nunu, tr);
  out.dnu = trqp.step;
  out.er0 = sens1.er + sens1.j_nu.dot(out.dnu) + 0.5 * out.dnu.dot(sens1.j_nunu * out.dnu);
  return out;
}


/// Terminal-constraint penalty: raised when an accepted iterate failed to
/// reduce the violation and the iterate is still infeasible. "Failed to
/// reduce" is an absolute stagnation test away from feasibility and a
/// contraction test near it, so the penalty cannot ratchet on iterates whose
/// violation is already below the absolute threshold.
inline double update_penalty(double sigma, double c_new, double c_ref, const SolverConfig& cfg) {
  const bool reduced = c_new <= std::min(c_ref - cfg.delta_sigma, 0.25 * c_ref);
  if (!reduced && c_new >= cfg.eps_feas) return std::min(cfg.k_sigma * sigma, cfg.sigma_max);
  return sigma;
}

inline bool smoothing_finished(double rho1, const SolverConfig& cfg) {
  return rho1 <= cfg.rho1_bangbang * (1.0 + 1e-9);
}

/// Sharpens the throttle smoothing once the current smooth problem is
/// feasible and optimal, until the bang-bang threshold is reached.
inline double update_smoothing(double rho1, double c_new, double er0, const SolverConfig& cfg) {
  if (c_new <= cfg.eps_feas && std::abs(er0) <= cfg.eps_opt && !smoothing_finished(rho1, cfg))
    return cfg.k_rho * rho1;
  return rho1;
}

struct ConvergenceState {
  double er0 = 0.0;
  double c = 0.0;
  double s_max = 0.0;
  double rho1 = 0.0;
  VectorXd stage_min_eigs;  // scaled J_lamlam minimum eigenvalues, all stages
  MatrixXd j_nunu;
};

inline ConvergenceVerdict check_convergence(const ConvergenceState& st, const SolverConfig& cfg) {
  ConvergenceVerdict v;
  v.optimality = std::abs(st.er0) < cfg.eps_opt;
  v.feasibility = st.c < cfg.eps_feas;
  v.path_feasibility = st.s_max < cfg.eps_spc;
  v.bang_bang = smoothing_finished(st.rho1, cfg);
  v.second_order = true;
  if (st.stage_min_eigs.size() > 0) {
    const double tol = 1e-9 * std::max(1.0, st.stage_min_eigs.cwiseAbs().maxCoeff());
    v.second_order = st.stage_min_eigs.minCoeff() >= -tol;
  }
  if (v.second_order && st.j_nunu.size() > 0) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (st.j_nunu + st.j_nunu.transpose()));
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    v.second_order = eig.eigenvalues().maxCoeff() <= 1e-9 * scale;
  }
  return v;
}

/// PDDP outer loop: backward sweep, multiplier step, convergence test, forward
/// sweep, acceptance, penalty/smoothing continuation. Rejected iterates only
/// shrink the trust region and reuse the stored STMs.
inline SolutionBundle solve(StagedProblem& problem, const SolverConfig& cfg,
                            const std::vector<VectorXd>& initial_costates, const IterateSink& sink = {}) {
  cfg.validate();
  const int n_stages = problem.num_stages();
  const int n_lam = problem.costate_dim();
  const int n_psi = problem.constraint_dim();
  const int n_c = problem.path_dim();
  if (static_cast<int>(initial_costates.size()) != n_stages || n_stages < 1)
    throw std::invalid_argument("solve: need one initial costate per stage");
  for (const auto& l : initial_costates)
    if (l.size() != n_lam) throw std::invalid_argument("solve: costate dimension mismatch");

  SolutionBundle bundle;
  double rho1 = cfg.rho1_init;
  double sigma = cfg.sigma0;
  double delta = cfg.delta0;
  VectorXd nu = VectorXd::Zero(n_psi);
  problem.set_smoothing(rho1);
  problem.set_workers(cfg.workers);

  TrustRegionConfig tr;
  tr.delta_min = cfg.delta_min;
  tr.delta_max = cfg.delta_max;
  tr.scale_d = cfg.scale_d.size() == n_lam ? cfg.scale_d : VectorXd::Ones(n_lam);

  SolverReference ref;
  try {
    ref = detail::propagate_reference(problem, initial_costates, nu, sigma, cfg.beta);
  } catch (const std::exception& e) {
    bundle.reason = std::string("initial propagation failed: ") + e.what();
    return bundle;
  }

  std::vector<StmPair> stms;
  bool stms_dirty = true;
  int floor_rejections = 0;

  for (int iter = 1; iter <= cfg.max_iters; ++iter) {
    bundle.iterations = iter;
    if (stms_dirty) {
      try {
        stms = problem.stage_stms(ref.x, ref.lam);
      } catch (const std::exception& e) {
        bundle.reason = std::string("STM propagation failed: ") + e.what();
        bundle.reference = ref;
        return bundle;
      }
      stms_dirty = false;
    }

    std::vector<StageCostExpansion> stage_costs(n_stages);
    for (int k = 0; k < n_stages; ++k) stage_costs[k] = problem.stage_cost(k, ref.x[k], ref.lam[k]);

    tr.delta = delta;
    SweepSensitivities terminal =
        init_terminal_sensitivities(ref.te, ref.x_final, n_c, n_lam, nu, sigma, cfg.beta);
    BackwardSweepResult sweep;
    try {
      sweep = backward_sweep(stms, stage_costs, terminal, tr);
    } catch (const std::exception& e) {
      bundle.reason = std::string("backward sweep failed: ") + e.what();
      bundle.reference = ref;
      return bundle;
    }

    MultiplierUpdate mult = update_multipliers(sweep.sens_stage1, delta);
    bundle.er0_last = mult.er0;

    ConvergenceState cs{mult.er0, ref.c, ref.s_max, rho1, sweep.stage_min_eigs, sweep.sens_stage1.j_nunu};
    ConvergenceVerdict verdict = check_convergence(cs, cfg);
    if (verdict.converged()) {
      bundle.converged = true;
      bundle.reason = "converged";
      break;
    }

    bool failed = false;
    SolverReference trial;
    try {
      trial = forward_sweep(problem, ref, sweep.gains, mult.dnu, nu + mult.dnu, sigma, cfg.beta);
    } catch (const std::exception&) {
      failed = true;
    }

    const double chi =
        failed ? std::numeric_limits<double>::infinity() : acceptance_ratio(trial.j_aug, ref.j_aug, mult.er0);
    const bool accepted = !failed && std::abs(chi - 1.0) <= cfg.eps1;

    if (accepted) {
      ++bundle.accepted_iterations;
      const double c_prev = ref.c;
      ref = std::move(trial);
      nu += mult.dnu;
      delta = std::min((1.0 + cfg.kappa) * delta, cfg.delta_max);
      sigma = update_penalty(sigma, ref.c, c_prev, cfg);
      const double rho1_new = update_smoothing(rho1, ref.c, mult.er0, cfg);
      if (rho1_new != rho1) {
        rho1 = rho1_new;
        problem.set_smoothing(rho1);
        try {
          ref = detail::propagate_reference(problem, ref.lam, nu, sigma, cfg.beta);
        } catch (const std::exception& e) {
          bundle.reason = std::string("smoothing continuation re-propagation failed: ") + e.what();
          bundle.reference = ref;
          return bundle;
        }
      } else {
        ref.j_aug = detail::augmented_cost(ref, n_c, nu, sigma, cfg.beta);
      }
      stms_dirty = true;
    } else {
      const bool at_floor = delta <= cfg.delta_min * (1.0 + 1e-12);
      delta = std::max((1.0 - cfg.kappa) * delta, cfg.delta_min);
      floor_rejections = at_floor ? floor_rejections + 1 : 0;
    }
    if (accepted) floor_rejections = 0;

    IterateRecord rec{iter, ref.j_aug, ref.c, ref.s_max, mult.er0, chi, accepted, delta, sigma, rho1};
    if (sink) sink(rec);
    bundle.history.push_back(rec);

    if (cfg.stall_limit > 0 && floor_rejections >= cfg.stall_limit) {
      bundle.reason = "stalled: trust-region floor reached without an acceptable iterate";
      break;
    }
  }

  if (!bundle.converged && bundle.reason.empty()) bundle.reason = "maximum iterations reached";
  bundle.reference = ref;
  bundle.nu = nu;
  bundle.sigma = sigma;
  bundle.rho1 = rho1;
  bundle.delta = delta;
  return bundle;
}

}  // namespace pddp
