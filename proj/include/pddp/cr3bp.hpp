#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "pddp/integrator.hpp"

namespace pddp {

using Eigen::Matrix3d;
using Eigen::Vector3d;
using Vector6d = Eigen::Matrix<double, 6, 1>;

inline constexpr double kStandardGravityKmS2 = 9.80665e-3;  // km/s^2
inline constexpr double kSecondsPerDay = 86400.0;
inline constexpr double kSingularityGuard = 1e-12;  // nondim distance to a primary

/// Earth-Moon style CR3BP normalization. Earth (mass 1-mu) sits at (-mu,0,0),
/// Moon (mass mu) at (1-mu,0,0) in the synodic frame.
struct Cr3bpSystem {
  double mu;            // mass parameter
  double l_star_km;     // characteristic length
  double t_star_s;      // characteristic time
  double m_star_kg;     // characteristic spacecraft mass (initial mass)

  void validate() const {
    if (!(mu > 0.0 && mu < 0.5)) throw std::invalid_argument("Cr3bpSystem: mu must lie in (0, 0.5)");
    if (!(l_star_km > 0.0 && t_star_s > 0.0 && m_star_kg > 0.0))
      throw std::invalid_argument("Cr3bpSystem: characteristic quantities must be positive");
  }

  Vector3d earth_position() const { return Vector3d(-mu, 0.0, 0.0); }
  Vector3d moon_position() const { return Vector3d(1.0 - mu, 0.0, 0.0); }

  double vel_unit_km_s() const { return l_star_km / t_star_s; }
  double accel_unit_km_s2() const { return l_star_km / (t_star_s * t_star_s); }

  double km_to_nd(double km) const { return km / l_star_km; }
  double nd_to_km(double nd) const { return nd * l_star_km; }
  double days_to_nd(double days) const { return days * kSecondsPerDay / t_star_s; }
  double nd_to_days(double nd) const { return nd * t_star_s / kSecondsPerDay; }
};

/// Constant specific impulse engine, dimensional quantities.
struct EngineModel {
  double t_max_N;   // maximum thrust
  double isp_s;     // specific impulse
  double g0_km_s2 = kStandardGravityKmS2;
  double m0_kg;     // initial spacecraft mass

  void validate() const {
    if (!(t_max_N > 0.0 && isp_s > 0.0 && m0_kg > 0.0 && g0_km_s2 > 0.0))
      throw std::invalid_argument("EngineModel: thrust, Isp, g0 and mass must be positive");
  }

  double mdot_max_kg_s() const { return (t_max_N * 1e-3) / (isp_s * g0_km_s2); }  // N -> kg km/s^2
  double exhaust_velocity_km_s() const { return isp_s * g0_km_s2; }
};

/// Engine converted into the CR3BP nondimensional unit system (mass scaled by
/// the system's m_star so m(t0) = 1).
struct NondimEngine {
  double t_max;     // thrust in (m_star * l_star / t_star^2) units
  double c;         // exhaust velocity in (l_star / t_star) units
  double mdot_max;  // = t_max / c
  double m0;        // initial spacecraft mass in m_star units

  static NondimEngine from(const EngineModel& e, const Cr3bpSystem& sys) {
    e.validate();
    sys.validate();
    NondimEngine nd;
    const double thrust_km = e.t_max_N * 1e-3;  // kg km/s^2
    nd.t_max = thrust_km * (sys.t_star_s * sys.t_star_s) / (sys.m_star_kg * sys.l_star_km);
    nd.c = e.exhaust_velocity_km_s() / sys.vel_unit_km_s();
    nd.mdot_max = nd.t_max / nd.c;
    nd.m0 = e.m0_kg / sys.m_star_kg;
    return nd;
  }
};

/// Natural CR3BP dynamics in the rotating frame: returns [v; a] where a holds
/// both-primary gravity plus centrifugal and Coriolis terms.
inline Vector6d natural_dynamics(const Vector6d& state, const Cr3bpSystem& sys) {
  const Vector3d r = state.head<3>();
  const Vector3d v = state.tail<3>();
  const Vector3d d1 = r - sys.earth_position();
  const Vector3d d2 = r - sys.moon_position();
  const double r1 = d1.norm();
  const double r2 = d2.norm();
  if (r1 < kSingularityGuard || r2 < kSingularityGuard)
    throw SingularityError("natural_dynamics: state at a primary singularity");

  const double c1 = (1.0 - sys.mu) / (r1 * r1 * r1);
  const double c2 = sys.mu / (r2 * r2 * r2);
  Vector3d a = -c1 * d1 - c2 * d2;
  a.x() += r.x() + 2.0 * v.y();
  a.y() += r.y() - 2.0 * v.x();

  Vector6d out;
  out.head<3>() = v;
  out.tail<3>() = a;
  return out;
}

/// Gradient of the position-only acceleration (gravity + centrifugal), i.e.
/// the Hessian of the effective potential. Symmetric 3x3.
inline Matrix3d gravity_gradient(const Vector3d& r, const Cr3bpSystem& sys) {
  const Vector3d d1 = r - sys.earth_position();
  const Vector3d d2 = r - sys.moon_position();
  const double r1 = d1.norm();
  const double r2 = d2.norm();
  if (r1 < kSingularityGuard || r2 < kSingularityGuard)
    throw SingularityError("gravity_gradient: state at a primary singularity");

  auto body_term = [](const Vector3d& d, double rnorm, double gm) {
    const double r3 = rnorm * rnorm * rnorm;
    const double r5 = r3 * rnorm * rnorm;
    return Matrix3d((3.0 * gm / r5) * (d * d.transpose()) - (gm / r3) * Matrix3d::Identity());
  };
  Matrix3d g = body_term(d1, r1, 1.0 - sys.mu) + body_term(d2, r2, sys.mu);
  g(0, 0) += 1.0;
  g(1, 1) += 1.0;
  return g;
}

/// Third derivative of the effective potential: T(i,j,k) = d G(i,j) / d r_k,
/// needed for the analytic costate-row Jacobian. Fully symmetric.
inline void gravity_gradient_derivative(const Vector3d& r, const Cr3bpSystem& sys, double t[3][3][3]) {
  const Vector3d p[2] = {sys.earth_position(), sys.moon_position()};
  const double gm[2] = {1.0 - sys.mu, sys.mu};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) t[i][j][k] = 0.0;
  for (int b = 0; b < 2; ++b) {
    const Vector3d d = r - p[b];
    const double rn = d.norm();
    if (rn < kSingularityGuard) throw SingularityError("gravity_gradient_derivative: singularity");
    const double r5 = std::pow(rn, 5);
    const double r7 = r5 * rn * rn;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        for (int k = 0; k < 3; ++k) {
          double v = -15.0 * gm[b] * d[i] * d[j] * d[k] / r7;
          if (i == j) v += 3.0 * gm[b] * d[k] / r5;
          if (i == k) v += 3.0 * gm[b] * d[j] / r5;
          if (j == k) v += 3.0 * gm[b] * d[i] / r5;
          t[i][j][k] += v;
        }
  }
}

/// Jacobi constant C = 2*Omega - v^2 of a ballistic state.
inline double jacobi_constant(const Vector6d& state, const Cr3bpSystem& sys) {
  const Vector3d r = state.head<3>();
  const Vector3d v = state.tail<3>();
  const double r1 = (r - sys.earth_position()).norm();
  const double r2 = (r - sys.moon_position()).norm();
  const double omega = 0.5 * (r.x() * r.x() + r.y() * r.y()) + (1.0 - sys.mu) / r1 + sys.mu / r2;
  return 2.0 * omega - v.squaredNorm();
}

}  // namespace pddp
