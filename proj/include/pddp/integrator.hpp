#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pddp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct IntegratorConfig {
  double rel_tol = 1e-12;
  double abs_tol = 1e-12;
  long max_steps = 2000000;
  bool dense_output = false;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 1e-3) || !(abs_tol > 0.0 && abs_tol <= 1e-3))
      throw std::invalid_argument("IntegratorConfig: tolerances must lie in (0, 1e-3]");
    if (max_steps <= 0) throw std::invalid_argument("IntegratorConfig: max_steps must be positive");
  }
};

class IntegrationError : public std::runtime_error {
 public:
  explicit IntegrationError(const std::string& what) : std::runtime_error(what) {}
};

class SingularityError : public IntegrationError {
 public:
  explicit SingularityError(const std::string& what) : IntegrationError(what) {}
};

namespace rkf78 {

// Fehlberg 7(8) coefficients (13 stages). The 8th-order weights are used to
// advance the solution; the embedded difference gives the error estimate.
inline const double kC[13] = {0.0,     2.0 / 27, 1.0 / 9, 1.0 / 6, 5.0 / 12, 1.0 / 2, 5.0 / 6,
                              1.0 / 6, 2.0 / 3,  1.0 / 3, 1.0,     0.0,      1.0};

inline const double kA[13][12] = {
    {},
    {2.0 / 27},
    {1.0 / 36, 1.0 / 12},
    {1.0 / 24, 0.0, 1.0 / 8},
    {5.0 / 12, 0.0, -25.0 / 16, 25.0 / 16},
    {1.0 / 20, 0.0, 0.0, 1.0 / 4, 1.0 / 5},
    {-25.0 / 108, 0.0, 0.0, 125.0 / 108, -65.0 / 27, 125.0 / 54},
    {31.0 / 300, 0.0, 0.0, 0.0, 61.0 / 225, -2.0 / 9, 13.0 / 900},
    {2.0, 0.0, 0.0, -53.0 / 6, 704.0 / 45, -107.0 / 9, 67.0 / 90, 3.0},
    {-91.0 / 108, 0.0, 0.0, 23.0 / 108, -976.0 / 135, 311.0 / 54, -19.0 / 60, 17.0 / 6, -1.0 / 12},
    {2383.0 / 4100, 0.0, 0.0, -341.0 / 164, 4496.0 / 1025, -301.0 / 82, 2133.0 / 4100, 45.0 / 82, 45.0 / 164,
     18.0 / 41},
    {3.0 / 205, 0.0, 0.0, 0.0, 0.0, -6.0 / 41, -3.0 / 205, -3.0 / 41, 3.0 / 41, 6.0 / 41, 0.0},
    {-1777.0 / 4100, 0.0, 0.0, -341.0 / 164, 4496.0 / 1025, -289.0 / 82, 2193.0 / 4100, 51.0 / 82, 33.0 / 164,
     12.0 / 41, 0.0, 1.0}};

inline const double kB8[13] = {0.0,       0.0, 0.0, 0.0,       0.0,       34.0 / 105, 9.0 / 35,
                               9.0 / 35,  9.0 / 280, 9.0 / 280, 0.0,      41.0 / 840, 41.0 / 840};

}  // namespace rkf78

/// Adaptive RKF7(8) integration of dy/dt = rhs(t, y) from t0 to t1 (t1 >= t0).
/// `rhs` has signature void(double t, const VectorXd& y, VectorXd& dydt).
/// If `sample_times` is non-null, steps are clipped so the solution is evaluated
/// exactly at each requested time (must be ascending, within [t0, t1]) and
/// reported through `on_sample`.
template <typename Rhs>
void integrate(Rhs&& rhs, VectorXd& y, double t0, double t1, const IntegratorConfig& cfg,
               const std::vector<double>* sample_times = nullptr,
               const std::function<void(double, const VectorXd&)>& on_sample = nullptr,
               const std::function<void(double, const VectorXd&)>& on_step = nullptr) {
  cfg.validate();
  if (t1 < t0) throw std::invalid_argument("integrate: t1 must be >= t0");
  if (t1 == t0) {
    if (sample_times && on_sample)
      for (double ts : *sample_times) on_sample(ts, y);
    return;
  }

  const long n = y.size();
  std::vector<VectorXd> k(13, VectorXd(n));
  VectorXd ytmp(n), ynew(n), err(n);

  double t = t0;
  rhs(t, y, k[0]);

  // Initial step from the scale of y and f (Hairer-style heuristic).
  double h;
  {
    double d0 = 0.0, d1 = 0.0;
    for (long i = 0; i < n; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(k[0][i]) / sc);
    }
    h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * (d0 / d1);
    h = std::min(h, t1 - t0);
  }

  std::size_t next_sample = 0;
  auto emit_samples_at = [&](double tc, const VectorXd& yc) {
    if (!sample_times || !on_sample) return;
    while (next_sample < sample_times->size() && (*sample_times)[next_sample] <= tc + 1e-15 * std::max(1.0, std::abs(tc))) {
      on_sample((*sample_times)[next_sample], yc);
      ++next_sample;
    }
  };
  emit_samples_at(t, y);
  if (on_step) on_step(t, y);

  double err_prev = 1.0;
  long steps = 0;
  bool f0_fresh = true;

  while (t < t1) {
    if (++steps > cfg.max_steps) throw IntegrationError("integrate: step count exceeded");

    // Clip to the interval end and to the next sample time.
    double t_stop = t1;
    if (sample_times && next_sample < sample_times->size()) t_stop = std::min(t_stop, (*sample_times)[next_sample]);
    if (t + h > t_stop) h = t_stop - t;
    if (h <= 0.0) h = std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(t));

    if (!f0_fresh) {
      rhs(t, y, k[0]);
      f0_fresh = true;
    }
    for (int s = 1; s < 13; ++s) {
      ytmp = y;
      for (int j = 0; j < s; ++j)
        if (rkf78::kA[s][j] != 0.0) ytmp.noalias() += (h * rkf78::kA[s][j]) * k[j];
      rhs(t + rkf78::kC[s] * h, ytmp, k[s]);
    }

    ynew = y;
    for (int s = 0; s < 13; ++s)
      if (rkf78::kB8[s] != 0.0) ynew.noalias() += (h * rkf78::kB8[s]) * k[s];
    err = (h * 41.0 / 840.0) * (k[0] + k[10] - k[11] - k[12]);

    double err_norm = 0.0;
    for (long i = 0; i < n; ++i) {
      const double sc = cfg.abs_tol + cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
      const double e = err[i] / sc;
      err_norm += e * e;
    }
    err_norm = std::sqrt(err_norm / static_cast<double>(n));
    if (!std::isfinite(err_norm)) err_norm = 1e10;

    if (err_norm <= 1.0) {
      t += h;
      y.swap(ynew);
      emit_samples_at(t, y);
      if (on_step) on_step(t, y);
      // PI controller (order-8 error estimate).
      double fac = 0.9 * std::pow(std::max(err_norm, 1e-16), -0.7 / 8.0) * std::pow(err_prev, 0.4 / 8.0);
      fac = std::clamp(fac, 0.2, 5.0);
      h *= fac;
      err_prev = std::max(err_norm, 1e-16);
      f0_fresh = false;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err_norm, -1.0 / 8.0));
    }
  }
}

}  // namespace pddp
