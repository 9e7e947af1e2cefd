#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pddp/problem.hpp"
#include "pddp/tensor.hpp"

namespace pddp {

/// Gradients and Hessian blocks of the augmented cost-to-go at one stage,
/// with respect to state (x), costate (lam) and Lagrange multipliers (nu),
/// plus the accumulated expected reduction.
struct SweepSensitivities {
  VectorXd j_x, j_lam, j_nu;
  MatrixXd j_xx, j_lamlam, j_nunu;
  MatrixXd j_xlam;   // n_x x n_lam
  MatrixXd j_xnu;    // n_x x n_nu
  MatrixXd j_lamnu;  // n_lam x n_nu
  double er = 0.0;

  static SweepSensitivities zero(int nx, int nlam, int nnu) {
    SweepSensitivities s;
    s.j_x = VectorXd::Zero(nx);
    s.j_lam = VectorXd::Zero(nlam);
    s.j_nu = VectorXd::Zero(nnu);
    s.j_xx = MatrixXd::Zero(nx, nx);
    s.j_lamlam = MatrixXd::Zero(nlam, nlam);
    s.j_nunu = MatrixXd::Zero(nnu, nnu);
    s.j_xlam = MatrixXd::Zero(nx, nlam);
    s.j_xnu = MatrixXd::Zero(nx, nnu);
    s.j_lamnu = MatrixXd::Zero(nlam, nnu);
    return s;
  }
};

/// Costate update law at one stage: dlam = a_ff + b_fb * dx + c_fb * dnu.
struct StageGains {
  VectorXd a_ff;
  MatrixXd b_fb;
  MatrixXd c_fb;
  double gamma = 0.0;
};

struct TrustRegionConfig {
  double delta = 100.0;
  double delta_min = 1e-7;
  double delta_max = 1e3;
  VectorXd scale_d;  // positive diagonal of the scaling matrix D

  void validate() const {
    if (!(delta_min > 0.0 && delta_min <= delta && delta <= delta_max))
      throw std::invalid_argument("TrustRegionConfig: need 0 < delta_min <= delta <= delta_max");
    if (scale_d.size() == 0 || (scale_d.array() <= 0.0).any())
      throw std::invalid_argument("TrustRegionConfig: D diagonal must be positive");
  }
};

/// Solution of min g'w + w'Hw/2 s.t. ||D w|| <= delta, plus the scaled
/// eigenfactorization for reusing the shifted inverse.
struct TrqpResult {
  VectorXd step;
  double gamma = 0.0;
  // Eigendecomposition of D^-1 sym(H) D^-1 = V diag(omega) V^T.
  MatrixXd eigvecs;
  VectorXd eigvals;
  VectorXd scale_d;

  /// Applies (H + gamma D D^T)^-1 via the factorization, pseudo-inverting
  /// shifted eigenvalues below 1e-12 of the largest magnitude.
  MatrixXd apply_shifted_inverse(const MatrixXd& rhs) const {
    const int n = static_cast<int>(eigvals.size());
    VectorXd gam = eigvals.array() + gamma;
    const double thresh = 1e-12 * std::max(1e-300, gam.cwiseAbs().maxCoeff());
    VectorXd inv(n);
    for (int i = 0; i < n; ++i) inv[i] = (std::abs(gam[i]) <= thresh) ? 0.0 : 1.0 / gam[i];
    const MatrixXd dinv_rhs = scale_d.cwiseInverse().asDiagonal() * rhs;
    return scale_d.cwiseInverse().asDiagonal() *
           (eigvecs * (inv.asDiagonal() * (eigvecs.transpose() * dinv_rhs)));
  }

  double min_scaled_eigenvalue() const { return eigvals.minCoeff(); }
};

/// Trust-region quadratic subproblem via eigendecomposition of the scaled
/// Hessian and a safeguarded Newton iteration on the secular equation
/// psi(gamma) = ||D dlam(gamma)||^2 - delta^2.
inline TrqpResult solve_trqp(const VectorXd& grad, const MatrixXd& hess, const TrustRegionConfig& tr) {
  tr.validate();
  const int n = static_cast<int>(grad.size());
  if (hess.rows() != n || hess.cols() != n || tr.scale_d.size() != n)
    throw std::invalid_argument("solve_trqp: dimension mismatch");

  TrqpResult res;
  res.scale_d = tr.scale_d;
  if (n == 0) {
    res.step = VectorXd();
    return res;
  }

  const VectorXd dinv = tr.scale_d.cwiseInverse();
  const MatrixXd hsym = 0.5 * (hess + hess.transpose());
  const MatrixXd scaled = dinv.asDiagonal() * hsym * dinv.asDiagonal();
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(scaled);
  if (eig.info() != Eigen::Success) throw std::runtime_error("solve_trqp: eigendecomposition failed");
  res.eigvals = eig.eigenvalues();
  res.eigvecs = eig.eigenvectors();

  const VectorXd q = res.eigvecs.transpose() * (dinv.asDiagonal() * grad);
  const double delta = tr.delta;
  const double omega_min = res.eigvals.minCoeff();
  const double omega_scale = std::max(1.0, res.eigvals.cwiseAbs().maxCoeff());

  auto step_norm2 = [&](double gamma) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = res.eigvals[i] + gamma;
      if (d != 0.0) s += (q[i] * q[i]) / (d * d);
    }
    return s;
  };
  auto scaled_step = [&](double gamma) {
    VectorXd w(n);
    const double thresh = 1e-12 * std::max(1e-300, (res.eigvals.array() + gamma).abs().maxCoeff());
    for (int i = 0; i < n; ++i) {
      const double d = res.eigvals[i] + gamma;
      w[i] = (std::abs(d) <= thresh) ? 0.0 : -q[i] / d;
    }
    return w;
  };

  const double gamma_lb = std::max(0.0, -omega_min);
  const double eig_tol = 1e-12 * omega_scale;

  // Does the step at the lower bound already fit inside the region?
  bool lb_finite = true;
  for (int i = 0; i < n; ++i)
    if (std::abs(res.eigvals[i] + gamma_lb) <= eig_tol && std::abs(q[i]) > 1e-13 * std::max(1.0, q.norm()))
      lb_finite = false;

  double gamma = gamma_lb;
  VectorXd w;
  if (lb_finite && step_norm2(gamma_lb) <= delta * delta) {
    w = scaled_step(gamma_lb);
    if (gamma_lb > 0.0 && w.norm() < delta) {
      // Hard case: pad with the eigenvector of the most negative eigenvalue
      // until the boundary is reached.
      int k = 0;
      res.eigvals.minCoeff(&k);
      const double tau = std::sqrt(std::max(0.0, delta * delta - w.squaredNorm()));
      w[k] += tau;
    }
    gamma = gamma_lb;
  } else {
    // Boundary solution: find gamma > gamma_lb with ||w(gamma)|| = delta.
    double lo = gamma_lb;
    double hi = std::max(gamma_lb * 2.0, gamma_lb + q.norm() / delta + omega_scale);
    while (step_norm2(hi) > delta * delta) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw std::runtime_error("solve_trqp: secular bracketing failed");
    }
    gamma = 0.5 * (lo + hi);
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      const double nrm2 = step_norm2(gamma);
      const double psi = nrm2 - delta * delta;
      if (std::abs(std::sqrt(nrm2) - delta) <= 1e-12 * delta) {
        converged = true;
        break;
      }
      if (psi > 0.0)
        lo = gamma;
      else
        hi = gamma;
      double dpsi = 0.0;
      for (int i = 0; i < n; ++i) {
        const double d = res.eigvals[i] + gamma;
        dpsi += -2.0 * q[i] * q[i] / (d * d * d);
      }
      double next = gamma - psi / dpsi;
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      gamma = next;
      if (hi - lo <= 1e-15 * std::max(1.0, hi)) {
        converged = true;
        break;
      }
    }
    if (!converged && std::abs(std::sqrt(step_norm2(gamma)) - delta) > 1e-8 * delta)
      throw std::runtime_error("solve_trqp: secular Newton did not converge");
    w = scaled_step(gamma);
  }

  res.gamma = gamma;
  res.step = dinv.asDiagonal() * (res.eigvecs * w);
  return res;
}

/// Sensitivities at the terminal point N+1. The augmented Lagrangian terminal
/// value is phi + nu'Psi + sigma ||Psi||^2 + beta ||s||^2, with s the trailing
/// n_c entries of the state.
inline SweepSensitivities init_terminal_sensitivities(const TerminalExpansion& te, const VectorXd& x_final,
                                                      int n_c, int n_lam, const VectorXd& nu, double sigma,
                                                      double beta) {
  const int nx = static_cast<int>(x_final.size());
  const int nnu = static_cast<int>(te.psi.size());
  if (nu.size() != nnu) throw std::invalid_argument("init_terminal_sensitivities: nu size mismatch");

  SweepSensitivities s = SweepSensitivities::zero(nx, n_lam, nnu);
  s.er = 0.0;
  s.j_x = te.phi_x;
  s.j_xx = te.phi_xx;
  if (nnu > 0) {
    s.j_x += te.psi_x.transpose() * nu + 2.0 * sigma * te.psi_x.transpose() * te.psi;
    s.j_xx += 2.0 * sigma * te.psi_x.transpose() * te.psi_x;
    if (!te.psi_xx.empty()) {
      for (int j = 0; j < nnu; ++j) {
        s.j_xx += (nu[j] + 2.0 * sigma * te.psi[j]) * MatrixXd(te.psi_xx.slice(j));
      }
    }
    s.j_nu = te.psi;
    s.j_xnu = te.psi_x.transpose();
  }
  if (n_c > 0) {
    s.j_x.tail(n_c) += 2.0 * beta * x_final.tail(n_c);
    s.j_xx.bottomRightCorner(n_c, n_c) += 2.0 * beta * MatrixXd::Identity(n_c, n_c);
  }
  s.j_xx = 0.5 * (s.j_xx + s.j_xx.transpose()).eval();
  return s;
}

/// Maps the optimized sensitivities at stage k+1 through the segment STM and
/// adds the stage-cost partials, yielding the unminimized expansion at stage k.
inline SweepSensitivities stage_expansion(const SweepSensitivities& next, const StmPair& stm,
                                          const StageCostExpansion& lc) {
  const int nx = static_cast<int>(next.j_x.size());
  const int nlam = static_cast<int>(next.j_lam.size());
  const int nnu = static_cast<int>(next.j_nu.size());
  const int ny = nx + nlam;
  if (stm.phi1.rows() != ny || stm.phi1.cols() != ny)
    throw std::invalid_argument("stage_expansion: STM dimension mismatch");

  SweepSensitivities s = SweepSensitivities::zero(nx, nlam, nnu);
  s.er = next.er;

  // Only the state rows of the transition enter: the upstream cost-to-go does
  // not depend on the discarded incoming costate.
  const auto phi_top = stm.phi1.topRows(nx);  // nx x ny

  VectorXd grad_ext = phi_top.transpose() * next.j_x;  // ny
  s.j_x = grad_ext.head(nx);
  s.j_lam = grad_ext.tail(nlam);

  MatrixXd hess_ext = phi_top.transpose() * next.j_xx * phi_top;  // ny x ny
  if (!stm.phi2.empty()) {
    for (int p = 0; p < nx; ++p) {
      if (next.j_x[p] != 0.0) hess_ext += next.j_x[p] * MatrixXd(stm.phi2.slice(p));
    }
  }
  s.j_xx = hess_ext.topLeftCorner(nx, nx);
  s.j_xlam = hess_ext.topRightCorner(nx, nlam);
  s.j_lamlam = hess_ext.bottomRightCorner(nlam, nlam);

  if (nnu > 0) {
    s.j_nu = next.j_nu;
    s.j_nunu = next.j_nunu;
    MatrixXd ynu = phi_top.transpose() * next.j_xnu;  // ny x nnu
    s.j_xnu = ynu.topRows(nx);
    s.j_lamnu = ynu.bottomRows(nlam);
  }

  if (lc.lx.size()) s.j_x += lc.lx;
  if (lc.llam.size()) s.j_lam += lc.llam;
  if (lc.lxx.size()) s.j_xx += lc.lxx;
  if (lc.llamlam.size()) s.j_lamlam += lc.llamlam;
  if (lc.lxlam.size()) s.j_xlam += lc.lxlam;

  s.j_xx = 0.5 * (s.j_xx + s.j_xx.transpose()).eval();
  s.j_lamlam = 0.5 * (s.j_lamlam + s.j_lamlam.transpose()).eval();
  return s;
}

/// Feedforward/feedback gains from the TRQP factorization:
/// A = -Htilde^-1 J_lam (the TRQP step), B = -Htilde^-1 J_lamx, C = -Htilde^-1 J_lamnu.
inline StageGains stage_gains(const SweepSensitivities& sens, const TrqpResult& trqp) {
  StageGains g;
  g.gamma = trqp.gamma;
  g.a_ff = trqp.step;
  g.b_fb = -trqp.apply_shifted_inverse(sens.j_xlam.transpose());
  if (sens.j_nu.size() > 0)
    g.c_fb = -trqp.apply_shifted_inverse(sens.j_lamnu);
  else
    g.c_fb = MatrixXd::Zero(sens.j_lam.size(), 0);
  return g;
}

/// Optimized sensitivities after substituting the costate update law, plus the
/// accumulated expected reduction.
inline SweepSensitivities apply_stage_update(const SweepSensitivities& sens, const StageGains& g) {
  SweepSensitivities s = sens;
  const VectorXd& a = g.a_ff;
  const MatrixXd& b = g.b_fb;
  const MatrixXd& c = g.c_fb;
  const MatrixXd& hll = sens.j_lamlam;
  const MatrixXd jlx = sens.j_xlam.transpose();  // n_lam x n_x

  s.er = sens.er + sens.j_lam.dot(a) + 0.5 * a.dot(hll * a);
  s.j_x = sens.j_x + b.transpose() * sens.j_lam + b.transpose() * (hll * a) + jlx.transpose() * a;
  s.j_xx = sens.j_xx + b.transpose() * hll * b + b.transpose() * jlx + jlx.transpose() * b;
  if (sens.j_nu.size() > 0) {
    s.j_nu = sens.j_nu + c.transpose() * sens.j_lam + c.transpose() * (hll * a) + sens.j_lamnu.transpose() * a;
    s.j_nunu = sens.j_nunu + c.transpose() * hll * c + c.transpose() * sens.j_lamnu +
               sens.j_lamnu.transpose() * c;
    s.j_xnu = sens.j_xnu + b.transpose() * hll * c + b.transpose() * sens.j_lamnu + jlx.transpose() * c;
  }
  s.j_xx = 0.5 * (s.j_xx + s.j_xx.transpose()).eval();
  s.j_nunu = 0.5 * (s.j_nunu + s.j_nunu.transpose()).eval();
  return s;
}

struct BackwardSweepResult {
  std::vector<StageGains> gains;   // index k = 0..N-1
  SweepSensitivities sens_stage1;  // optimized sensitivities at the first stage
  double er1 = 0.0;
  VectorXd stage_min_eigs;         // min eigenvalue of each scaled stage Hessian
};

/// Runs the recursive minimization from the terminal stage down to stage 1.
/// `stage_costs[k]` holds the stage-cost partials on the reference.
inline BackwardSweepResult backward_sweep(const std::vector<StmPair>& stms,
                                          const std::vector<StageCostExpansion>& stage_costs,
                                          const SweepSensitivities& terminal, const TrustRegionConfig& tr) {
  const int n_stages = static_cast<int>(stms.size());
  if (static_cast<int>(stage_costs.size()) != n_stages)
    throw std::invalid_argument("backward_sweep: stage cost count mismatch");

  BackwardSweepResult out;
  out.gains.resize(n_stages);
  out.stage_min_eigs = VectorXd::Zero(n_stages);

  SweepSensitivities next = terminal;
  for (int k = n_stages - 1; k >= 0; --k) {
    SweepSensitivities sens = stage_expansion(next, stms[k], stage_costs[k]);
    TrqpResult trqp = solve_trqp(sens.j_lam, sens.j_lamlam, tr);
    out.stage_min_eigs[k] = trqp.min_scaled_eigenvalue();
    out.gains[k] = stage_gains(sens, trqp);
    next = apply_stage_update(sens, out.gains[k]);
  }
  out.sens_stage1 = next;
  out.er1 = next.er;
  return out;
}

}  // namespace pddp
