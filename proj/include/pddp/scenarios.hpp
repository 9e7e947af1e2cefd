#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pddp/dynamics.hpp"
#include "pddp/transfer.hpp"

namespace pddp {

/// Earth-Moon system constants shared by the bundled transfers.
inline Cr3bpSystem earth_moon_system(double m_star_kg = 2000.0) {
  Cr3bpSystem sys;
  sys.mu = 0.012150585609624;
  sys.l_star_km = 385692.5;
  sys.t_star_s = 377084.1526670386;
  sys.m_star_kg = m_star_kg;
  return sys;
}

inline EngineModel default_engine(double t_max_N) {
  EngineModel e;
  e.t_max_N = t_max_N;
  e.isp_s = 1950.0;
  e.m0_kg = 2000.0;
  return e;
}

/// A concrete transfer definition: boundary orbital states, flight time,
/// engine sizing, stage count and constraint/penalty settings.
struct TransferScenario {
  std::string name;
  std::string description;
  Vector6d x0_orbital;
  Vector6d xf_orbital;
  double tof_days = 0.0;
  double t_max_N = 0.0;
  int n_stages = 1;
  double r2_min_km = 0.0;  // 0 disables the Moon-distance path constraint
  double beta = 0.0;
  double rho2 = 1e-3;
  double init_lo = -1.0;  // costate initialization interval
  double init_hi = 1.0;
  // Orbit periods (days), used for documentation and state validation only.
  double period_x0_days = 0.0;
  double period_xf_days = 0.0;

  void validate() const {
    if (!(tof_days > 0.0)) throw std::invalid_argument("TransferScenario: tof must be positive");
    if (n_stages < 1) throw std::invalid_argument("TransferScenario: need at least one stage");
    if (!(rho2 > 0.0)) throw std::invalid_argument("TransferScenario: rho2 must be positive");
    if (!(init_hi > init_lo)) throw std::invalid_argument("TransferScenario: bad costate interval");
    if (r2_min_km < 0.0 || beta < 0.0) throw std::invalid_argument("TransferScenario: negative penalty data");
  }
};

inline std::shared_ptr<const PathConstraint> moon_radius_constraint(double r2_min_km, const Cr3bpSystem& sys) {
  return std::make_shared<MoonRadiusConstraint>(r2_min_km, sys);
}

/// The bundled Earth-Moon transfers: DRO-to-DRO at four flight times,
/// Halo-to-Halo with optional Moon-distance floors, and NRHO to a 2:1
/// retrograde resonant orbit.
inline std::vector<TransferScenario> builtin_scenarios() {
  const Vector6d dro_x0 = (Vector6d() << 1.171359, 0.0, 0.0, 0.0, -0.490885570748594, 0.0).finished();
  const Vector6d dro_xf = (Vector6d() << 1.301844, 0.0, 0.0, 0.0, -0.643017351154134, 0.0).finished();
  const Vector6d halo_x0 =
      (Vector6d() << 1.1600, 0.0, -0.124717974690841, 0.0, -0.208674361935424, 0.0).finished();
  const Vector6d halo_xf =
      (Vector6d() << 0.8500, 0.0, 0.175465930494154, 0.0, 0.262898463480571, 0.0).finished();
  const Vector6d nrho_x0 =
      (Vector6d() << 1.018826173554960, 0.0, -0.179798255733684, 0.0, -0.096189359252899, 0.0).finished();
  const Vector6d res_xf =
      (Vector6d() << -1.028090187860835, 0.0, 0.0, 0.0, 1.454886591762114, 0.0).finished();

  std::vector<TransferScenario> out;
  auto dro = [&](const std::string& name, const std::string& desc, double tmax, double tof, int stages) {
    TransferScenario s;
    s.name = name;
    s.description = desc;
    s.x0_orbital = dro_x0;
    s.xf_orbital = dro_xf;
    s.t_max_N = tmax;
    s.tof_days = tof;
    s.n_stages = stages;
    s.period_x0_days = 13.4;
    s.period_xf_days = 21.6;
    return s;
  };
  out.push_back(dro("dro-1rev", "DRO to DRO, single revolution", 0.25, 17.5, 10));
  out.push_back(dro("dro-2rev", "DRO to DRO, two revolutions", 0.15, 35.0, 10));
  out.push_back(dro("dro-5rev", "DRO to DRO, five revolutions", 0.05, 87.5, 10));
  out.push_back(dro("dro-10rev", "DRO to DRO, ten revolutions", 0.02, 175.0, 15));

  auto halo = [&](const std::string& name, double r2min_km, double beta) {
    TransferScenario s;
    s.name = name;
    s.description = r2min_km > 0.0 ? "L2 Halo to L1 Halo, Moon-distance floor" : "L2 Halo to L1 Halo";
    s.x0_orbital = halo_x0;
    s.xf_orbital = halo_xf;
    s.t_max_N = 1.5;
    s.tof_days = 12.66;
    s.n_stages = 3;
    s.r2_min_km = r2min_km;
    s.beta = beta;
    s.rho2 = 1e-3;
    s.period_x0_days = 14.21;
    s.period_xf_days = 11.11;
    return s;
  };
  out.push_back(halo("halo", 0.0, 1e7));
  out.push_back(halo("halo-r20000", 20000.0, 1e7));
  out.push_back(halo("halo-r25000", 25000.0, 1e7));
  out.push_back(halo("halo-r30000", 30000.0, 5e7));

  TransferScenario nrho;
  nrho.name = "nrho";
  nrho.description = "9:2 NRHO to 2:1 retrograde resonant orbit";
  nrho.x0_orbital = nrho_x0;
  nrho.xf_orbital = res_xf;
  nrho.t_max_N = 3.0;
  nrho.tof_days = 50.85;
  nrho.n_stages = 20;
  nrho.period_x0_days = 6.39;
  nrho.period_xf_days = 25.96;
  out.push_back(nrho);
  return out;
}

inline std::optional<TransferScenario> find_scenario(const std::string& name) {
  for (auto& s : builtin_scenarios())
    if (s.name == name) return s;
  return std::nullopt;
}

/// Builds the nondimensional transfer problem for a scenario.
inline TransferProblem make_transfer_problem(const TransferScenario& sc, const IntegratorConfig& integ = {},
                                             double rho1 = 1.0) {
  sc.validate();
  Cr3bpSystem sys = earth_moon_system();
  EngineModel engine = default_engine(sc.t_max_N);
  PathConstraintSet constraints;
  constraints.rho2 = sc.rho2;
  if (sc.r2_min_km > 0.0) constraints.constraints.push_back(moon_radius_constraint(sc.r2_min_km, sys));
  TransferDynamics dyn(sys, NondimEngine::from(engine, sys), SmoothingParams{rho1}, constraints);
  return TransferProblem(std::move(dyn), sc.x0_orbital, sc.xf_orbital, sys.days_to_nd(sc.tof_days),
                         sc.n_stages, integ);
}

/// Costate trust-region scaling used by the bundled transfers:
/// diag([I3, 100 I3, 0.01]).
inline VectorXd default_costate_scaling() {
  VectorXd d(7);
  d << 1.0, 1.0, 1.0, 100.0, 100.0, 100.0, 0.01;
  return d;
}

}  // namespace pddp
