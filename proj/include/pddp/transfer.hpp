#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "pddp/dynamics.hpp"
#include "pddp/problem.hpp"
#include "pddp/propagation.hpp"

namespace pddp {

/// One sampled point of a transfer trajectory with control diagnostics.
struct TrajectoryPoint {
  double t_nd = 0.0;
  VectorXd y;          // full augmented canonical vector
  double throttle = 0.0;
  double switching = 0.0;
  double alpha_norm = 0.0;  // 0 when inside the primer guard
  double r2_nd = 0.0;       // distance to the Moon
};

/// Minimum-fuel CR3BP transfer between fixed orbital boundary states over a
/// fixed time of flight, discretized into evenly spaced stages.
class TransferProblem : public StagedProblem {
 public:
  TransferProblem(TransferDynamics dynamics, const Vector6d& x0_orbital, const Vector6d& xf_orbital,
                  double tof_nd, int n_stages, IntegratorConfig integ = {})
      : dyn_(std::move(dynamics)),
        x0_(x0_orbital),
        xf_(xf_orbital),
        tof_(tof_nd),
        n_stages_(n_stages),
        integ_(integ) {
    if (n_stages_ < 1) throw std::invalid_argument("TransferProblem: need at least one stage");
    if (!(tof_ > 0.0)) throw std::invalid_argument("TransferProblem: time of flight must be positive");
  }

  const TransferDynamics& dynamics() const { return dyn_; }
  const IntegratorConfig& integrator_config() const { return integ_; }
  double tof_nd() const { return tof_; }
  double stage_dt() const { return tof_ / n_stages_; }
  const Vector6d& target_orbital() const { return xf_; }

  int state_dim() const override { return dyn_.nx(); }
  int costate_dim() const override { return 7; }
  int constraint_dim() const override { return 6; }
  int path_dim() const override { return dyn_.nc(); }
  int num_stages() const override { return n_stages_; }

  VectorXd initial_state() const override {
    VectorXd x = VectorXd::Zero(dyn_.nx());
    x.head<6>() = x0_;
    x(6) = dyn_.engine().m0;
    return x;
  }

  VectorXd propagate_segment(int k, const VectorXd& x, const VectorXd& lam) const override {
    VectorXd y = assemble(x, lam);
    const double t0 = k * stage_dt();
    VectorXd yf = propagate(dyn_, y, t0, t0 + stage_dt(), integ_);
    return yf.head(dyn_.nx());
  }

  VectorXd propagate_segment_with_stm(int k, const VectorXd& x, const VectorXd& lam,
                                      StmPair& stm) const override {
    VectorXd y = assemble(x, lam);
    const double t0 = k * stage_dt();
    VectorXd yf = propagate_with_stm(dyn_, y, t0, t0 + stage_dt(), integ_, stm, 2);
    return yf.head(dyn_.nx());
  }

  std::vector<StmPair> stage_stms(const std::vector<VectorXd>& x,
                                  const std::vector<VectorXd>& lam) const override {
    std::vector<Segment> segments(n_stages_);
    for (int k = 0; k < n_stages_; ++k) {
      segments[k].t_start = k * stage_dt();
      segments[k].t_end = segments[k].t_start + stage_dt();
      segments[k].y_start = assemble(x[k], lam[k]);
    }
    return compute_segment_stms(dyn_, segments, integ_, workers_, 2);
  }

  /// phi = -m(t_f); Psi matches the six orbital components to the target.
  TerminalExpansion terminal(const VectorXd& x_final) const override {
    const int nx = dyn_.nx();
    TerminalExpansion te;
    te.phi = -x_final(6);
    te.phi_x = VectorXd::Zero(nx);
    te.phi_x(6) = -1.0;  // gradient of -m in the mass slot
    te.phi_xx = MatrixXd::Zero(nx, nx);
    te.psi = x_final.head<6>() - xf_;
    te.psi_x = MatrixXd::Zero(6, nx);
    te.psi_x.leftCols<6>().setIdentity();
    return te;
  }

  void set_smoothing(double rho1) override { dyn_.set_rho1(rho1); }
  void set_workers(int workers) override { workers_ = std::max(1, workers); }

  /// Dense trajectory under the given stage costates: n_samples+1 points on a
  /// uniform grid, with throttle/switching diagnostics per point. Also records
  /// the parabola-refined minimum Moon distance over all integration steps.
  std::vector<TrajectoryPoint> sample_trajectory(const std::vector<VectorXd>& lams, int n_samples,
                                                 double* min_r2_nd = nullptr) const {
    if (static_cast<int>(lams.size()) != n_stages_)
      throw std::invalid_argument("sample_trajectory: costate count mismatch");
    std::vector<TrajectoryPoint> points;
    points.reserve(n_samples + 1);

    // Three most recent step records for parabolic refinement of min r2.
    struct StepRec {
      double t = 0.0, r2 = 0.0;
    };
    std::vector<StepRec> recs;

    VectorXd x = initial_state();
    const double dt = stage_dt();
    for (int k = 0; k < n_stages_; ++k) {
      VectorXd y = assemble(x, lams[k]);
      const double t0 = k * dt, t1 = t0 + dt;
      std::vector<double> times;
      for (int i = 0; i <= n_samples; ++i) {
        const double t = tof_ * i / n_samples;
        if (t >= t0 - 1e-14 && (t < t1 || (k == n_stages_ - 1 && t <= t1 + 1e-14))) times.push_back(std::min(t, t1));
      }
      auto on_sample = [&](double t, const VectorXd& yy) { points.push_back(make_point(t, yy)); };
      auto on_step = [&](double t, const VectorXd& yy) {
        recs.push_back({t, (yy.head<3>() - dyn_.system().moon_position()).norm()});
      };
      integrate([this](double, const VectorXd& yy, VectorXd& dy) { dyn_.rhs(yy, dy); }, y, t0, t1, integ_,
                &times, on_sample, min_r2_nd ? std::function<void(double, const VectorXd&)>(on_step) : nullptr);
      x = y.head(dyn_.nx());
    }

    if (min_r2_nd) {
      double best = std::numeric_limits<double>::max();
      int best_i = -1;
      for (int i = 0; i < static_cast<int>(recs.size()); ++i)
        if (recs[i].r2 < best) {
          best = recs[i].r2;
          best_i = i;
        }
      // Quadratic refinement through the neighbors of the discrete minimum.
      if (best_i > 0 && best_i + 1 < static_cast<int>(recs.size())) {
        const auto &a = recs[best_i - 1], &b = recs[best_i], &c = recs[best_i + 1];
        const double x1 = a.t - b.t, x2 = c.t - b.t;
        const double d1 = (a.r2 - b.r2) / x1, d2 = (c.r2 - b.r2) / x2;
        const double curv = (d2 - d1) / (x2 - x1) * 2.0;
        if (curv > 0.0) {
          const double slope = d1 - 0.5 * curv * x1;
          const double tmin = -slope / curv;
          if (tmin > x1 && tmin < x2) best = std::min(best, b.r2 + slope * tmin + 0.5 * curv * tmin * tmin);
        }
      }
      *min_r2_nd = best;
    }
    return points;
  }

  /// Sign changes of the switching function on a dense sample grid.
  static int count_switches(const std::vector<TrajectoryPoint>& points) {
    int n = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
      if (points[i - 1].switching * points[i].switching < 0.0) ++n;
    return n;
  }

  VectorXd assemble(const VectorXd& x, const VectorXd& lam) const {
    VectorXd y(dyn_.ny());
    y.head(dyn_.nx()) = x;
    y.tail(7) = lam;
    return y;
  }

 private:
  TrajectoryPoint make_point(double t, const VectorXd& y) const {
    TrajectoryPoint p;
    p.t_nd = t;
    p.y = y;
    CanonicalState cs = CanonicalState::from_vector(dyn_.canonical_part(y));
    p.switching = switching_function(cs, dyn_.engine());
    p.throttle = smoothed_throttle(p.switching, dyn_.rho1());
    p.alpha_norm = cs.lam_v.norm() >= kPrimerGuard ? 1.0 : 0.0;
    p.r2_nd = (cs.r - dyn_.system().moon_position()).norm();
    return p;
  }

  TransferDynamics dyn_;
  Vector6d x0_, xf_;
  double tof_;
  int n_stages_;
  IntegratorConfig integ_;
  int workers_ = 1;
};

}  // namespace pddp
