#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pddp/scenarios.hpp"
#include "pddp/shooting.hpp"
#include "pddp/transfer.hpp"
#include "support/oracles.hpp"

using namespace pddp;

namespace {

ShootingProblem dro_problem(double tof_days = 17.5, double rho1 = 1.0) {
  Cr3bpSystem sys = earth_moon_system();
  TransferScenario sc = *find_scenario("dro-1rev");
  TransferDynamics dyn(sys, NondimEngine::from(default_engine(sc.t_max_N), sys), SmoothingParams{rho1});
  return ShootingProblem(std::move(dyn), sc.x0_orbital, sc.xf_orbital, sys.days_to_nd(tof_days));
}

}  // namespace

TEST_CASE("zero costate guess produces the ballistic mismatch") {
  ShootingProblem prob = dro_problem();
  VectorXd r = shooting_residual(Vector7d::Zero(), prob);

  // Ballistic reference through the natural dynamics only.
  Cr3bpSystem sys = earth_moon_system();
  auto rhs = [&sys](double, const VectorXd& y, VectorXd& dy) {
    dy = natural_dynamics(y.head<6>(), sys);
  };
  VectorXd y = prob.x0_orbital;
  integrate(rhs, y, 0.0, prob.tof_nd, prob.integ);
  VectorXd ballistic_mismatch = y.head<6>() - prob.xf_orbital;
  CHECK((r - ballistic_mismatch).norm() < 1e-10);
}

TEST_CASE("zero time of flight zeroes the costate sensitivity block") {
  ShootingProblem prob = dro_problem(0.0);
  VectorXd r;
  MatrixXd jac = shooting_residual_jacobian(Vector7d::Zero(), prob, &r);
  CHECK(jac.isZero(0.0));
  CHECK((r.head<6>() - (prob.x0_orbital - prob.xf_orbital)).norm() == 0.0);
}

TEST_CASE("residual Jacobian matches flow-perturbation finite differences") {
  ShootingProblem prob = dro_problem(6.0);
  Vector7d lam0;
  lam0 << 0.12, -0.31, 0.05, -0.62, 0.44, -0.1, 0.2;

  MatrixXd jac = shooting_residual_jacobian(lam0, prob);
  auto f = [&](const VectorXd& l) {
    Vector7d ll = l;
    return VectorXd(shooting_residual(ll, prob));
  };
  MatrixXd jac_fd = oracles::fd_jacobian(f, lam0, 1e-7);
  CHECK((jac - jac_fd).cwiseAbs().maxCoeff() / jac_fd.cwiseAbs().maxCoeff() < 1e-5);

  // Scaling the costates changes the residual smoothly; the Jacobian tracks it.
  MatrixXd jac2 = shooting_residual_jacobian(2.0 * lam0, prob);
  MatrixXd jac2_fd = oracles::fd_jacobian(f, 2.0 * lam0, 1e-7);
  CHECK((jac2 - jac2_fd).cwiseAbs().maxCoeff() / jac2_fd.cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("damped Newton: minimum-norm steps, descent, convergence") {
  // Target manufactured by propagating a known costate: the problem then has
  // an exact solution and the solver must recover it from a perturbed guess.
  Cr3bpSystem sys = earth_moon_system();
  TransferScenario sc = *find_scenario("dro-1rev");
  const double tof = sys.days_to_nd(8.0);
  TransferDynamics dyn(sys, NondimEngine::from(default_engine(sc.t_max_N), sys), SmoothingParams{1.0});

  Vector7d lam_true;
  lam_true << 0.08, -0.12, 0.0, -0.25, 0.31, 0.0, 0.15;
  VectorXd y0(14);
  y0.head<6>() = sc.x0_orbital;
  y0(6) = 1.0;
  y0.tail<7>() = lam_true;
  IntegratorConfig integ;
  VectorXd yf = propagate(dyn, y0, 0.0, tof, integ);
  ShootingProblem prob(dyn, sc.x0_orbital, yf.head<6>(), tof);

  Vector7d guess = lam_true + 0.03 * (Vector7d() << 1, -1, 0.5, -0.5, 1, 0.3, -0.8).finished();
  ShootingOutcome best = solve_shooting(guess, prob, 1e-7, 200);
  REQUIRE(best.converged);
  CHECK(best.residual_norm < 1e-7);
  CHECK(best.iterations >= 1);

  // Restarting from the solution converges in zero iterations.
  ShootingOutcome zero = solve_shooting(best.lam0, prob, 1e-7, 200);
  CHECK(zero.converged);
  CHECK(zero.iterations == 0);

  // The converged costate drives the staged transfer problem to the same
  // terminal state (cross-check of the two propagation paths).
  TransferScenario manufactured = sc;
  manufactured.n_stages = 1;
  manufactured.tof_days = sys.nd_to_days(tof);
  manufactured.xf_orbital = yf.head<6>();
  TransferProblem tp = make_transfer_problem(manufactured, integ, /*rho1=*/1.0);
  VectorXd x_final = tp.propagate_segment(0, tp.initial_state(), best.lam0);
  CHECK((x_final.head<6>() - manufactured.xf_orbital).norm() < 1e-7);

  // Newton step property at a well-conditioned non-solution point:
  // J step = -r in the least-squares (minimum-norm) sense.
  Vector7d probe = guess;
  VectorXd r;
  MatrixXd jac = shooting_residual_jacobian(probe, prob, &r);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(jac);
  VectorXd step = -cod.solve(r);
  CHECK((jac * step + r).norm() < 1e-9 * jac.norm() * std::max(1.0, step.norm()));
  // Minimum-norm: the step lies in the row space of the Jacobian.
  Eigen::JacobiSVD<MatrixXd> svd(jac, Eigen::ComputeFullV);
  VectorXd null_dir = svd.matrixV().col(6);  // 1-D null space of the 6x7 Jacobian
  CHECK(std::abs(null_dir.dot(step)) < 1e-9 * std::max(1.0, step.norm()));
}

TEST_CASE("optional mass-costate transversality flag") {
  ShootingProblem prob = dro_problem(3.0);
  prob.fix_lambda_m = true;
  CHECK(prob.residual_dim() == 7);
  Vector7d lam0;
  lam0 << 0.1, 0.0, 0.0, -0.2, 0.3, 0.0, 0.4;
  VectorXd r = shooting_residual(lam0, prob);
  CHECK(r.size() == 7);
  MatrixXd jac = shooting_residual_jacobian(lam0, prob);
  CHECK(jac.rows() == 7);
}
