#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pddp/dynamics.hpp"
#include "pddp/propagation.hpp"
#include "pddp/scenarios.hpp"
#include "support/oracles.hpp"

using namespace pddp;

namespace {

/// Linear model dy = A y with analytic Jacobian/Hessian, for STM sanity tests.
struct LinearModel {
  MatrixXd a;
  int ny() const { return static_cast<int>(a.rows()); }
  void rhs(const VectorXd& y, VectorXd& dy) const { dy = a * y; }
  void jacobian(const VectorXd&, MatrixXd& jac) const { jac = a; }
  void hessian(const VectorXd&, Tensor3& h) const {
    if (h.dim0() != ny()) h = Tensor3(ny(), ny(), ny());
    h.setZero();
  }
};

TransferDynamics transfer_model(double rho1 = 0.9) {
  Cr3bpSystem sys = earth_moon_system();
  return TransferDynamics(sys, NondimEngine::from(default_engine(0.25), sys), SmoothingParams{rho1});
}

VectorXd sample_canonical() {
  CanonicalState cs;
  cs.r = Vector3d(1.05, 0.08, 0.02);
  cs.v = Vector3d(0.05, -0.35, 0.01);
  cs.m = 0.97;
  cs.lam_r = Vector3d(0.21, -0.34, 0.05);
  cs.lam_v = Vector3d(-0.62, 0.41, -0.08);
  cs.lam_m = 0.12;
  return cs.to_vector();
}

}  // namespace

TEST_CASE("propagate: zero elapsed time and DRO periodicity") {
  TransferDynamics dyn = transfer_model();
  IntegratorConfig cfg;
  VectorXd y0 = sample_canonical();
  CHECK((propagate(dyn, y0, 0.3, 0.3, cfg) - y0).norm() == 0.0);
}

TEST_CASE("STM initial conditions are exact at zero elapsed time") {
  TransferDynamics dyn = transfer_model();
  IntegratorConfig cfg;
  StmPair stm;
  VectorXd yf = propagate_with_stm(dyn, sample_canonical(), 0.1, 0.1, cfg, stm);
  CHECK(stm.phi1.isIdentity(0.0));
  CHECK(stm.phi2.raw().isZero(0.0));
  CHECK((yf - sample_canonical()).norm() == 0.0);
}

TEST_CASE("linear system: phi1 equals the matrix exponential, phi2 stays zero") {
  oracles::UniformRng rng(8);
  LinearModel model;
  model.a.resize(5, 5);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) model.a(i, j) = rng.next(-0.6, 0.6);

  IntegratorConfig cfg;
  StmPair stm;
  VectorXd y0 = rng.vector(5, -1.0, 1.0);
  VectorXd yf = propagate_with_stm(model, y0, 0.0, 1.7, cfg, stm);

  MatrixXd phi_ref = oracles::expm(1.7 * model.a);
  CHECK((stm.phi1 - phi_ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((yf - phi_ref * y0).norm() < 1e-10);
  CHECK(stm.phi2.raw().cwiseAbs().maxCoeff() < 1e-11);
}

TEST_CASE("transfer STM against flow-map finite differences") {
  TransferDynamics dyn = transfer_model();
  IntegratorConfig cfg;
  const double t1 = 0.4;
  VectorXd y0 = sample_canonical();

  StmPair stm;
  propagate_with_stm(dyn, y0, 0.0, t1, cfg, stm);

  auto flow = [&](const VectorXd& y) { return propagate(dyn, y, 0.0, t1, cfg); };

  // First order: perturb each component by 1e-7.
  MatrixXd phi_fd = oracles::fd_jacobian(flow, y0, 1e-7);
  CHECK((stm.phi1 - phi_fd).cwiseAbs().maxCoeff() / phi_fd.cwiseAbs().maxCoeff() < 1e-5);

  // Second order on dominant entries via second differences of the flow.
  const double h = 3e-4;
  double worst = 0.0;
  const double scale = stm.phi2.raw().cwiseAbs().maxCoeff();
  for (int j : {0, 4, 10}) {
    for (int k : {0, 4, 10}) {
      VectorXd ypp = y0, ypm = y0, ymp = y0, ymm = y0;
      ypp[j] += h;
      ypp[k] += h;
      ypm[j] += h;
      ypm[k] -= h;
      ymp[j] -= h;
      ymp[k] += h;
      ymm[j] -= h;
      ymm[k] -= h;
      VectorXd second = (flow(ypp) - flow(ypm) - flow(ymp) + flow(ymm)) / (4.0 * h * h);
      for (int i = 0; i < 14; ++i) {
        const double ref = second[i];
        if (std::abs(ref) < 0.05 * scale) continue;  // dominant entries only
        worst = std::max(worst, std::abs(stm.phi2(i, j, k) - ref) / std::abs(ref));
      }
    }
  }
  CHECK(worst < 1e-3);
}

TEST_CASE("STM composition across subintervals") {
  TransferDynamics dyn = transfer_model();
  IntegratorConfig cfg;
  VectorXd y0 = sample_canonical();

  StmPair full, first, second;
  propagate_with_stm(dyn, y0, 0.0, 0.5, cfg, full, 1);
  VectorXd ymid = propagate_with_stm(dyn, y0, 0.0, 0.25, cfg, first, 1);
  propagate_with_stm(dyn, ymid, 0.25, 0.5, cfg, second, 1);

  CHECK((full.phi1 - second.phi1 * first.phi1).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("segment STMs: parallel equals sequential, failures carry the index") {
  TransferDynamics dyn = transfer_model();
  IntegratorConfig cfg;

  std::vector<Segment> segments;
  VectorXd y = sample_canonical();
  const double dt = 0.18;
  for (int k = 0; k < 10; ++k) {
    Segment s;
    s.t_start = k * dt;
    s.t_end = (k + 1) * dt;
    s.y_start = y;
    segments.push_back(s);
    y = propagate(dyn, y, s.t_start, s.t_end, cfg);
  }

  auto seq = compute_segment_stms(dyn, segments, cfg, 1);
  auto par = compute_segment_stms(dyn, segments, cfg, 4);
  REQUIRE(seq.size() == par.size());
  for (std::size_t k = 0; k < seq.size(); ++k) {
    CHECK((seq[k].phi1 - par[k].phi1).cwiseAbs().maxCoeff() <= 1e-13);
    CHECK((seq[k].phi2.raw() - par[k].phi2.raw()).cwiseAbs().maxCoeff() <= 1e-13);
  }

  // Single segment behaves exactly like propagate_with_stm.
  StmPair direct;
  propagate_with_stm(dyn, segments[3].y_start, segments[3].t_start, segments[3].t_end, cfg, direct);
  CHECK((seq[3].phi1 - direct.phi1).cwiseAbs().maxCoeff() == 0.0);

  // A segment starting at a primary singularity reports its index.
  std::vector<Segment> bad = segments;
  bad[7].y_start.head<3>() = earth_moon_system().moon_position();
  try {
    compute_segment_stms(dyn, bad, cfg, 2);
    CHECK(false);
  } catch (const IntegrationError& e) {
    CHECK(std::string(e.what()).find("segment 7") != std::string::npos);
  }
}
