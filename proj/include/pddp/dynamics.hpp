#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "pddp/cr3bp.hpp"
#include "pddp/tensor.hpp"

namespace pddp {

using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::Vector3d;
using Eigen::VectorXd;
using Vector7d = Eigen::Matrix<double, 7, 1>;
using Vector14d = Eigen::Matrix<double, 14, 1>;

inline constexpr double kPrimerGuard = 1e-12;

/// State + costate of the canonical (PMP) system, 14 entries in 3-D Cartesian.
struct CanonicalState {
  Vector3d r = Vector3d::Zero();
  Vector3d v = Vector3d::Zero();
  double m = 1.0;
  Vector3d lam_r = Vector3d::Zero();
  Vector3d lam_v = Vector3d::Zero();
  double lam_m = 0.0;

  Vector14d to_vector() const {
    Vector14d y;
    y << r, v, m, lam_r, lam_v, lam_m;
    return y;
  }
  static CanonicalState from_vector(const Eigen::Ref<const VectorXd>& y) {
    CanonicalState s;
    s.r = y.segment<3>(0);
    s.v = y.segment<3>(3);
    s.m = y(6);
    s.lam_r = y.segment<3>(7);
    s.lam_v = y.segment<3>(10);
    s.lam_m = y(13);
    return s;
  }
};

/// Canonical state plus the accumulated path-constraint violation s (n_c entries).
struct AugmentedState {
  CanonicalState canonical;
  VectorXd s;  // starts at zero, non-decreasing along forward propagation
};

/// p = lam_v for Cartesian dynamics (B = [0; I]).
inline Vector3d primer_vector(const CanonicalState& y) { return y.lam_v; }

/// S = ||p|| c / m + lam_m - 1 with c the nondimensional exhaust velocity.
inline double switching_function(const CanonicalState& y, const NondimEngine& engine) {
  return y.lam_v.norm() * engine.c / y.m + y.lam_m - 1.0;
}

/// u = (1 + tanh(S/rho1)) / 2, strictly increasing, limits 0 and 1.
inline double smoothed_throttle(double s_val, double rho1) { return 0.5 * (1.0 + std::tanh(s_val / rho1)); }

inline double smoothed_throttle_deriv(double s_val, double rho1) {
  const double th = std::tanh(s_val / rho1);
  return (1.0 - th * th) / (2.0 * rho1);
}

/// Softplus approximation of max(0, g): rho2 * log(1 + exp(g/rho2)), evaluated
/// in overflow-safe branches across the whole range of g/rho2.
inline double softplus_violation(double g_val, double rho2) {
  const double z = g_val / rho2;
  if (z > 30.0) return g_val + rho2 * std::log1p(std::exp(-z));
  if (z < -30.0) return rho2 * std::exp(z);
  return rho2 * std::log1p(std::exp(z));
}

/// d/dg of softplus_violation: the logistic sigmoid of g/rho2.
inline double softplus_sigmoid(double g_val, double rho2) {
  const double z = g_val / rho2;
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct SmoothingParams {
  double rho1 = 1.0;

  void validate() const {
    if (!(rho1 > 0.0)) throw std::invalid_argument("SmoothingParams: rho1 must be positive");
  }
};

/// A scalar state-path constraint g(x, lambda) <= 0, twice continuously
/// differentiable. Evaluated on the 14-entry canonical vector.
class PathConstraint {
 public:
  virtual ~PathConstraint() = default;
  virtual std::string name() const = 0;
  virtual double value(const Vector14d& y) const = 0;
  virtual void gradient(const Vector14d& y, Vector14d& out) const = 0;
};

/// Minimum Moon distance: g = r2_min - r2, r2 = ||r - r_moon||.
class MoonRadiusConstraint : public PathConstraint {
 public:
  MoonRadiusConstraint(double r2_min_km, const Cr3bpSystem& sys)
      : r2_min_km_(r2_min_km), r2_min_nd_(sys.km_to_nd(r2_min_km)), moon_(sys.moon_position()) {
    if (!(r2_min_km > 0.0)) throw std::invalid_argument("MoonRadiusConstraint: radius must be positive");
  }

  std::string name() const override { return "moon_radius_min"; }
  double r2_min_km() const { return r2_min_km_; }
  double r2_min_nd() const { return r2_min_nd_; }

  double value(const Vector14d& y) const override { return r2_min_nd_ - (y.head<3>() - moon_).norm(); }

  void gradient(const Vector14d& y, Vector14d& out) const override {
    out.setZero();
    const Vector3d d = y.head<3>() - moon_;
    out.head<3>() = -d / d.norm();
  }

  /// Second derivative of g with respect to position (velocity/mass/costate
  /// blocks are identically zero). Singular only at the Moon's center.
  Matrix3d position_hessian(const Vector3d& r) const {
    const Vector3d d = r - moon_;
    const double rn = d.norm();
    const Vector3d dh = d / rn;
    return -(Matrix3d::Identity() - dh * dh.transpose()) / rn;
  }

 private:
  double r2_min_km_;
  double r2_min_nd_;
  Vector3d moon_;
};

struct PathConstraintSet {
  std::vector<std::shared_ptr<const PathConstraint>> constraints;
  double rho2 = 1e-3;

  int size() const { return static_cast<int>(constraints.size()); }
  void validate() const {
    if (!(rho2 > 0.0)) throw std::invalid_argument("PathConstraintSet: rho2 must be positive");
  }
};

/// Continuous-time right-hand sides of the augmented canonical system
/// y = [r, v, m, s, lam_r, lam_v, lam_m], together with the analytic Jacobian
/// and a differenced Hessian. All evaluations are pure; the only mutable state
/// is a counter of primer-singularity guard activations.
class TransferDynamics {
 public:
  TransferDynamics(const Cr3bpSystem& sys, const NondimEngine& engine, SmoothingParams smoothing,
                   PathConstraintSet constraints = {})
      : sys_(sys),
        engine_(engine),
        smoothing_(smoothing),
        constraints_(std::move(constraints)),
        guard_hits_(std::make_shared<std::atomic<long>>(0)) {
    sys_.validate();
    smoothing_.validate();
    constraints_.validate();
  }

  int nc() const { return constraints_.size(); }
  int nx() const { return 7 + nc(); }          // augmented state dimension
  int nlam() const { return 7; }
  int ny() const { return 14 + nc(); }         // full propagated dimension

  int idx_m() const { return 6; }
  int idx_s() const { return 7; }
  int idx_lr() const { return 7 + nc(); }
  int idx_lv() const { return 10 + nc(); }
  int idx_lm() const { return 13 + nc(); }

  const Cr3bpSystem& system() const { return sys_; }
  const NondimEngine& engine() const { return engine_; }
  const PathConstraintSet& path_constraints() const { return constraints_; }
  double rho1() const { return smoothing_.rho1; }
  void set_rho1(double rho1) {
    smoothing_.rho1 = rho1;
    smoothing_.validate();
  }

  long primer_guard_hits() const { return guard_hits_->load(); }

  Vector14d canonical_part(const VectorXd& y) const {
    Vector14d c;
    c.head<7>() = y.head<7>();
    c.tail<7>() = y.segment<7>(idx_lr());
    return c;
  }

  /// F(y): stacked state, path-violation and costate rates.
  void rhs(const VectorXd& y, VectorXd& dy) const {
    const int n = ny();
    if (y.size() != n) throw std::invalid_argument("TransferDynamics::rhs: bad state size");
    dy.resize(n);

    const Vector3d r = y.segment<3>(0);
    const Vector3d v = y.segment<3>(3);
    const double m = y(idx_m());
    const Vector3d lam_r = y.segment<3>(idx_lr());
    const Vector3d lam_v = y.segment<3>(idx_lv());
    const double lam_m = y(idx_lm());
    if (!(m > 0.0)) throw IntegrationError("TransferDynamics::rhs: nonpositive mass");

    const Vector3d d1 = r - sys_.earth_position();
    const Vector3d d2 = r - sys_.moon_position();
    const double r1 = d1.norm();
    const double r2 = d2.norm();
    if (r1 < kSingularityGuard || r2 < kSingularityGuard)
      throw SingularityError("TransferDynamics::rhs: primary singularity");

    const double pn = lam_v.norm();
    const double s_val = pn * engine_.c / m + lam_m - 1.0;
    const double u = smoothed_throttle(s_val, smoothing_.rho1);

    // State rates.
    dy.segment<3>(0) = v;
    Vector3d a = -(1.0 - sys_.mu) / (r1 * r1 * r1) * d1 - sys_.mu / (r2 * r2 * r2) * d2;
    a.x() += r.x() + 2.0 * v.y();
    a.y() += r.y() - 2.0 * v.x();
    if (pn >= kPrimerGuard) {
      a -= (engine_.t_max * u / (m * pn)) * lam_v;  // thrust along -lam_v/||lam_v||
    } else {
      guard_hits_->fetch_add(1, std::memory_order_relaxed);
    }
    dy.segment<3>(3) = a;
    dy(idx_m()) = -engine_.mdot_max * u;

    // Path-violation rates.
    if (nc() > 0) {
      const Vector14d yc = canonical_part(y);
      for (int j = 0; j < nc(); ++j)
        dy(idx_s() + j) = softplus_violation(constraints_.constraints[j]->value(yc), constraints_.rho2);
    }

    // Costate rates.
    const Matrix3d g = gravity_gradient(r, sys_);
    dy.segment<3>(idx_lr()) = -g * lam_v;
    dy.segment<3>(idx_lv()) = Vector3d(-lam_r.x() + 2.0 * lam_v.y(), -lam_r.y() - 2.0 * lam_v.x(), -lam_r.z());
    dy(idx_lm()) = -engine_.t_max * u * pn / (m * m);
  }

  /// Analytic Jacobian dF/dy.
  void jacobian(const VectorXd& y, MatrixXd& jac) const {
    const int n = ny();
    if (y.size() != n) throw std::invalid_argument("TransferDynamics::jacobian: bad state size");
    jac.setZero(n, n);

    const Vector3d r = y.segment<3>(0);
    const double m = y(idx_m());
    const Vector3d lam_v = y.segment<3>(idx_lv());
    const double lam_m = y(idx_lm());

    const double pn = lam_v.norm();
    const double s_val = pn * engine_.c / m + lam_m - 1.0;
    const double u = smoothed_throttle(s_val, smoothing_.rho1);
    const double du = smoothed_throttle_deriv(s_val, smoothing_.rho1);
    const double tm = engine_.t_max;
    const double c = engine_.c;

    const int lr = idx_lr(), lv = idx_lv(), lm = idx_lm(), im = idx_m();

    // dr/dt = v
    jac.block<3, 3>(0, 3).setIdentity();

    // dv/dt rows
    const Matrix3d g = gravity_gradient(r, sys_);
    jac.block<3, 3>(3, 0) = g;
    jac(3, 4) = 2.0;
    jac(4, 3) = -2.0;
    if (pn >= kPrimerGuard) {
      const Vector3d lhat = lam_v / pn;
      const Matrix3d proj = Matrix3d::Identity() - lhat * lhat.transpose();
      // d(thrust)/d lam_v
      jac.block<3, 3>(3, lv) = -(tm / m) * (du * (c / m) * (lhat * lhat.transpose()) + (u / pn) * proj);
      // d(thrust)/dm
      jac.block<3, 1>(3, im) = (tm / (m * m)) * (du * pn * c / m + u) * lhat;
      // d(thrust)/d lam_m
      jac.block<3, 1>(3, lm) = -(tm / m) * du * lhat;
    }

    // dm/dt row
    jac(im, im) = tm * du * pn / (m * m);
    if (pn >= kPrimerGuard) jac.block<1, 3>(im, lv) = -(tm / m) * du * (lam_v / pn).transpose();
    jac(im, lm) = -(tm / c) * du;

    // ds/dt rows
    if (nc() > 0) {
      const Vector14d yc = canonical_part(y);
      Vector14d grad;
      for (int j = 0; j < nc(); ++j) {
        const auto& pc = *constraints_.constraints[j];
        const double sig = softplus_sigmoid(pc.value(yc), constraints_.rho2);
        pc.gradient(yc, grad);
        jac.block(idx_s() + j, 0, 1, 7) = sig * grad.head<7>().transpose();
        jac.block(idx_s() + j, lr, 1, 7) = sig * grad.tail<7>().transpose();
      }
    }

    // d(lam_r)/dt rows: -G(r) * lam_v
    double tg[3][3][3];
    gravity_gradient_derivative(r, sys_, tg);
    for (int i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k) {
        double acc = 0.0;
        for (int j = 0; j < 3; ++j) acc += tg[i][j][k] * lam_v[j];
        jac(lr + i, k) = -acc;
      }
    jac.block<3, 3>(lr, lv) = -g;

    // d(lam_v)/dt rows
    jac.block<3, 3>(lv, lr) = -Matrix3d::Identity();
    jac(lv + 0, lv + 1) = 2.0;
    jac(lv + 1, lv + 0) = -2.0;

    // d(lam_m)/dt row
    jac(lm, im) = tm * pn * (du * pn * c / (m * m) + 2.0 * u / m) / (m * m);
    if (pn >= kPrimerGuard)
      jac.block<1, 3>(lm, lv) = -(tm / (m * m)) * (u + pn * du * c / m) * (lam_v / pn).transpose();
    jac(lm, lm) = -(tm * pn / (m * m)) * du;
  }

  /// Hessian d2F/dy2 by central differencing of the analytic Jacobian with
  /// step cbrt(eps) * max(1, |y_i|) per component.
  void hessian(const VectorXd& y, Tensor3& hess) const {
    const int n = ny();
    if (hess.dim0() != n) hess = Tensor3(n, n, n);
    const double base = std::cbrt(std::numeric_limits<double>::epsilon());
    VectorXd yp = y;
    MatrixXd jp(n, n), jm(n, n);
    for (int k = 0; k < n; ++k) {
      const double h = base * std::max(1.0, std::abs(y[k]));
      yp[k] = y[k] + h;
      jacobian(yp, jp);
      yp[k] = y[k] - h;
      jacobian(yp, jm);
      yp[k] = y[k];
      jp -= jm;
      jp *= 1.0 / (2.0 * h);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) hess(i, j, k) = jp(i, j);
    }
  }

 private:
  Cr3bpSystem sys_;
  NondimEngine engine_;
  SmoothingParams smoothing_;
  PathConstraintSet constraints_;
  std::shared_ptr<std::atomic<long>> guard_hits_;  // shared across copies (worker threads)
};

/// Costate rates of the canonical (unconstrained) system; convenience wrapper
/// over TransferDynamics for a single state.
inline Vector7d costate_dynamics(const CanonicalState& state, const NondimEngine& engine, const Cr3bpSystem& sys,
                                 const SmoothingParams& sm) {
  TransferDynamics dyn(sys, engine, sm);
  VectorXd y = state.to_vector(), dy;
  dyn.rhs(y, dy);
  return dy.tail<7>();
}

/// Full canonical rates [f; h] for a single state.
inline Vector14d canonical_rhs(const CanonicalState& state, const NondimEngine& engine, const Cr3bpSystem& sys,
                               const SmoothingParams& sm) {
  TransferDynamics dyn(sys, engine, sm);
  VectorXd y = state.to_vector(), dy;
  dyn.rhs(y, dy);
  return dy;
}

}  // namespace pddp
