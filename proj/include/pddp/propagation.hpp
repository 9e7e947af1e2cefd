#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pddp/integrator.hpp"
#include "pddp/tensor.hpp"

namespace pddp {

/// First- and second-order state transition matrices of a flow segment.
/// phi1(t0,t0) = I, phi2(t0,t0) = 0; phi2 is symmetric in its trailing indices
/// up to integration tolerance.
struct StmPair {
  MatrixXd phi1;
  Tensor3 phi2;

  static StmPair identity(int n, bool second_order = true) {
    StmPair s;
    s.phi1 = MatrixXd::Identity(n, n);
    if (second_order) s.phi2 = Tensor3(n, n, n);
    return s;
  }
};

/// One inter-stage arc of the discretized trajectory.
struct Segment {
  double t_start = 0.0;
  double t_end = 0.0;
  VectorXd y_start;  // full augmented canonical vector at t_start
};

namespace detail {

/// Extended-vector RHS for trajectory + variational equations. Layout:
/// [y (n); phi1 row-major (n^2); phi2 lexicographic [i][j][k] (n^3, order 2 only)].
template <typename Model>
class VariationalRhs {
 public:
  VariationalRhs(const Model& model, int order) : model_(model), n_(model.ny()), order_(order) {
    jac_.resize(n_, n_);
    if (order_ >= 2) hess_ = Tensor3(n_, n_, n_);
  }

  long extended_size() const {
    return n_ + static_cast<long>(n_) * n_ + (order_ >= 2 ? static_cast<long>(n_) * n_ * n_ : 0);
  }

  void operator()(double /*t*/, const VectorXd& z, VectorXd& dz) {
    dz.resize(z.size());
    const long n = n_, n2 = static_cast<long>(n) * n;
    VectorXd y = z.head(n);
    VectorXd dy;
    model_.rhs(y, dy);
    dz.head(n) = dy;

    model_.jacobian(y, jac_);
    using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const RowMat> phi1(z.data() + n, n, n);
    Eigen::Map<RowMat> dphi1(dz.data() + n, n, n);
    dphi1.noalias() = jac_ * phi1;

    if (order_ >= 2) {
      model_.hessian(y, hess_);
      Eigen::Map<const RowMat> phi2(z.data() + n + n2, n, n2);
      Eigen::Map<RowMat> dphi2(dz.data() + n + n2, n, n2);
      // dPhi2 = F_y .1 Phi2 + Phi1^T . F_yy . Phi1
      dphi2.noalias() = jac_ * phi2;
      for (int i = 0; i < n; ++i) {
        Eigen::Map<RowMat> slice(dz.data() + n + n2 + static_cast<long>(i) * n2, n, n);
        slice.noalias() += phi1.transpose() * hess_.slice(i) * phi1;
      }
    }
  }

 private:
  const Model& model_;
  int n_;
  int order_;
  MatrixXd jac_;
  Tensor3 hess_;
};

}  // namespace detail

/// Propagates the augmented canonical vector from t0 to t1.
template <typename Model>
VectorXd propagate(const Model& model, const VectorXd& y0, double t0, double t1, const IntegratorConfig& cfg,
                   const std::vector<double>* sample_times = nullptr,
                   const std::function<void(double, const VectorXd&)>& on_sample = nullptr) {
  VectorXd y = y0;
  auto rhs = [&model](double, const VectorXd& yy, VectorXd& dy) { model.rhs(yy, dy); };
  integrate(rhs, y, t0, t1, cfg, sample_times, on_sample);
  return y;
}

/// Propagates the state together with first- (and optionally second-) order
/// STMs by integrating the variational equations alongside the trajectory.
template <typename Model>
VectorXd propagate_with_stm(const Model& model, const VectorXd& y0, double t0, double t1,
                            const IntegratorConfig& cfg, StmPair& stm, int order = 2) {
  const int n = model.ny();
  if (y0.size() != n) throw std::invalid_argument("propagate_with_stm: bad state size");
  detail::VariationalRhs<Model> rhs(model, order);

  VectorXd z = VectorXd::Zero(rhs.extended_size());
  z.head(n) = y0;
  for (int i = 0; i < n; ++i) z(n + static_cast<long>(i) * n + i) = 1.0;

  integrate(rhs, z, t0, t1, cfg);

  stm.phi1.resize(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) stm.phi1(i, j) = z(n + static_cast<long>(i) * n + j);
  if (order >= 2) {
    stm.phi2 = Tensor3(n, n, n);
    stm.phi2.raw() = z.tail(static_cast<long>(n) * n * n);
  } else {
    stm.phi2 = Tensor3();
  }
  return z.head(n);
}

/// Computes the STMs of every segment independently, fanning out across
/// `workers` threads. Results are bitwise independent of the worker count.
/// Any segment failure aborts with the failing segment's index.
template <typename Model>
std::vector<StmPair> compute_segment_stms(const Model& model, const std::vector<Segment>& segments,
                                          const IntegratorConfig& cfg, int workers = 1, int order = 2) {
  const int n_seg = static_cast<int>(segments.size());
  std::vector<StmPair> out(n_seg);
  if (n_seg == 0) return out;
  workers = std::max(1, std::min(workers, n_seg));

  std::atomic<int> next{0};
  std::atomic<int> failed{-1};
  std::vector<std::string> errors(n_seg);

  auto worker = [&]() {
    // Per-thread model copy: evaluation is pure but keeps private scratch.
    Model local(model);
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= n_seg || failed.load() >= 0) break;
      try {
        StmPair stm;
        propagate_with_stm(local, segments[k].y_start, segments[k].t_start, segments[k].t_end, cfg, stm, order);
        out[k] = std::move(stm);
      } catch (const std::exception& e) {
        errors[k] = e.what();
        int expected = -1;
        failed.compare_exchange_strong(expected, k);
        break;
      }
    }
  };

  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  const int bad = failed.load();
  if (bad >= 0)
    throw IntegrationError("compute_segment_stms: segment " + std::to_string(bad) + " failed: " + errors[bad]);
  return out;
}

}  // namespace pddp
