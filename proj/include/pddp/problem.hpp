#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "pddp/propagation.hpp"
#include "pddp/tensor.hpp"

namespace pddp {

/// Terminal cost phi and terminal equality constraints Psi with their partials,
/// evaluated at the final augmented state.
struct TerminalExpansion {
  double phi = 0.0;
  VectorXd phi_x;    // n_x
  MatrixXd phi_xx;   // n_x x n_x
  VectorXd psi;      // n_psi
  MatrixXd psi_x;    // n_psi x n_x
  Tensor3 psi_xx;    // n_psi slices of n_x x n_x (empty means zero)
};

/// Stage cost value and partials; empty vectors/matrices mean identically zero.
struct StageCostExpansion {
  double value = 0.0;
  VectorXd lx;       // n_x
  VectorXd llam;     // n_lam
  MatrixXd lxx;      // n_x x n_x
  MatrixXd llamlam;  // n_lam x n_lam
  MatrixXd lxlam;    // n_x x n_lam
};

/// A stage-discretized optimal control problem whose per-stage decision
/// variables are the costates. The solver only sees this surface; the
/// CR3BP transfer and the test toys both implement it.
class StagedProblem {
 public:
  virtual ~StagedProblem() = default;

  virtual int state_dim() const = 0;       // n_x (includes path-violation slots)
  virtual int costate_dim() const = 0;     // n_lam
  virtual int constraint_dim() const = 0;  // n_psi
  virtual int path_dim() const = 0;        // n_c (trailing entries of the state)
  virtual int num_stages() const = 0;      // N

  virtual VectorXd initial_state() const = 0;

  /// Propagates segment k (0-based) from stage state x and stage costate lam;
  /// returns the state at stage k+1. Throws on propagation failure.
  virtual VectorXd propagate_segment(int k, const VectorXd& x, const VectorXd& lam) const = 0;

  /// Same, but also fills the first/second-order STM over [x; lam].
  virtual VectorXd propagate_segment_with_stm(int k, const VectorXd& x, const VectorXd& lam,
                                              StmPair& stm) const = 0;

  virtual TerminalExpansion terminal(const VectorXd& x_final) const = 0;

  virtual StageCostExpansion stage_cost(int /*k*/, const VectorXd& /*x*/, const VectorXd& /*lam*/) const {
    return StageCostExpansion{};
  }

  /// STMs of every segment on a reference; the default runs sequentially,
  /// implementations may fan the segments out across workers.
  virtual std::vector<StmPair> stage_stms(const std::vector<VectorXd>& x,
                                          const std::vector<VectorXd>& lam) const {
    std::vector<StmPair> out(num_stages());
    for (int k = 0; k < num_stages(); ++k) propagate_segment_with_stm(k, x[k], lam[k], out[k]);
    return out;
  }

  /// Throttle-smoothing hook; problems without a smoothed control ignore it.
  virtual void set_smoothing(double /*rho1*/) {}

  /// Worker-count hint for parallel STM evaluation.
  virtual void set_workers(int /*workers*/) {}
};

}  // namespace pddp
