#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "pddp/dynamics.hpp"
#include "pddp/propagation.hpp"

namespace pddp {

/// Classical indirect single shooting: Newton on the initial costate of the
/// canonical system, targeting the terminal orbital state. The baseline the
/// staged solver is compared against.
struct ShootingProblem {
  TransferDynamics dynamics;  // must carry no path constraints
  Vector6d x0_orbital;
  Vector6d xf_orbital;
  double tof_nd = 0.0;
  IntegratorConfig integ;
  bool fix_lambda_m = false;  // append lambda_m(t_f) = 0 to the residual

  ShootingProblem(TransferDynamics dyn, const Vector6d& x0, const Vector6d& xf, double tof,
                  IntegratorConfig cfg = {})
      : dynamics(std::move(dyn)), x0_orbital(x0), xf_orbital(xf), tof_nd(tof), integ(cfg) {
    if (dynamics.nc() != 0) throw std::invalid_argument("ShootingProblem: path constraints unsupported");
    if (!(tof_nd >= 0.0)) throw std::invalid_argument("ShootingProblem: tof must be nonnegative");
  }

  int residual_dim() const { return fix_lambda_m ? 7 : 6; }

  VectorXd initial_canonical(const Vector7d& lam0) const {
    VectorXd y(14);
    y.head<6>() = x0_orbital;
    y(6) = 1.0;
    y.tail<7>() = lam0;
    return y;
  }
};

/// Terminal orbital mismatch under the smoothed primer-vector control law.
inline VectorXd shooting_residual(const Vector7d& lam0, const ShootingProblem& prob) {
  VectorXd yf = propagate(prob.dynamics, prob.initial_canonical(lam0), 0.0, prob.tof_nd, prob.integ);
  VectorXd r(prob.residual_dim());
  r.head<6>() = yf.head<6>() - prob.xf_orbital;
  if (prob.fix_lambda_m) r(6) = yf(13);
  return r;
}

/// Residual Jacobian d r / d lam0 extracted from the first-order STM.
inline MatrixXd shooting_residual_jacobian(const Vector7d& lam0, const ShootingProblem& prob,
                                           VectorXd* residual_out = nullptr) {
  StmPair stm;
  VectorXd yf = propagate_with_stm(prob.dynamics, prob.initial_canonical(lam0), 0.0, prob.tof_nd, prob.integ,
                                   stm, /*order=*/1);
  MatrixXd jac(prob.residual_dim(), 7);
  jac.topRows<6>() = stm.phi1.block(0, 7, 6, 7);
  if (prob.fix_lambda_m) jac.row(6) = stm.phi1.block(13, 7, 1, 7);
  if (residual_out) {
    residual_out->resize(prob.residual_dim());
    residual_out->head<6>() = yf.head<6>() - prob.xf_orbital;
    if (prob.fix_lambda_m) (*residual_out)(6) = yf(13);
  }
  return jac;
}

struct ShootingOutcome {
  bool converged = false;
  Vector7d lam0 = Vector7d::Zero();
  double residual_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::string reason;
};

/// Damped Newton with minimum-norm steps (the system is underdetermined:
/// 6 equations, 7 unknowns when the mass-costate transversality is left free).
/// Converged iff ||residual|| < tol.
inline ShootingOutcome solve_shooting(const Vector7d& lam0_guess, const ShootingProblem& prob,
                                      double tol = 1e-7, int max_iters = 200) {
  ShootingOutcome out;
  out.lam0 = lam0_guess;

  double rnorm;
  VectorXd r;
  try {
    r = shooting_residual(out.lam0, prob);
  } catch (const std::exception& e) {
    out.reason = std::string("propagation failed: ") + e.what();
    return out;
  }
  rnorm = r.norm();

  for (int it = 0; it < max_iters; ++it) {
    if (rnorm < tol) {
      out.converged = true;
      out.residual_norm = rnorm;
      out.iterations = it;
      out.reason = "converged";
      return out;
    }
    MatrixXd jac;
    try {
      jac = shooting_residual_jacobian(out.lam0, prob);
    } catch (const std::exception& e) {
      out.reason = std::string("propagation failed: ") + e.what();
      out.residual_norm = rnorm;
      out.iterations = it;
      return out;
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(jac);
    VectorXd step = -cod.solve(r);
    if (!step.allFinite()) {
      out.reason = "singular Jacobian";
      out.residual_norm = rnorm;
      out.iterations = it;
      return out;
    }

    // Backtrack by halving until the residual norm decreases.
    double alpha = 1.0;
    bool improved = false;
    for (int cut = 0; cut < 20; ++cut, alpha *= 0.5) {
      Vector7d cand = out.lam0 + alpha * step;
      VectorXd rc;
      try {
        rc = shooting_residual(cand, prob);
      } catch (const std::exception&) {
        continue;
      }
      if (rc.norm() < rnorm) {
        out.lam0 = cand;
        r = rc;
        rnorm = rc.norm();
        improved = true;
        break;
      }
    }
    if (!improved) {
      out.reason = "stalled: no descent within 20 halvings";
      out.residual_norm = rnorm;
      out.iterations = it + 1;
      return out;
    }
  }
  out.converged = rnorm < tol;
  out.residual_norm = rnorm;
  out.iterations = max_iters;
  out.reason = out.converged ? "converged" : "maximum iterations reached";
  return out;
}

}  // namespace pddp
