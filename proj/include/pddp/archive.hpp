#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pddp/config.hpp"
#include "pddp/solver.hpp"
#include "pddp/transfer.hpp"

namespace pddp {

inline constexpr const char* kSummarySchema = "pddp-summary-v1";
inline constexpr const char* kTrajectorySchema = "pddp-trajectory-v1";
inline constexpr const char* kControlSchema = "pddp-control-v1";
inline constexpr const char* kIteratesSchema = "pddp-iterates-v1";
inline constexpr const char* kCostatesSchema = "pddp-costates-v1";

class ArchiveError : public std::runtime_error {
 public:
  explicit ArchiveError(const std::string& what) : std::runtime_error(what) {}
};

/// Everything a solve run persists: summary record, trajectory/control/iterate
/// tables and the stage costates (reusable as a warm start).
struct ResultArchive {
  // Summary record.
  std::string scenario_name;
  bool converged = false;
  std::string reason;
  int iterations = 0;
  int accepted_iterations = 0;
  int stages = 0;
  double final_mass_kg = 0.0;
  double fuel_used_kg = 0.0;
  int switch_count = 0;
  double min_moon_distance_km = 0.0;
  double c_final = 0.0;
  double s_final = 0.0;
  double rho1_final = 0.0;
  double sigma_final = 0.0;
  double wall_time_s = 0.0;
  long seed = -1;

  std::vector<TrajectoryPoint> trajectory;
  std::vector<IterateRecord> iterates;
  std::vector<VectorXd> stage_costates;
  Cr3bpSystem system;
  double mass_unit_kg = 1.0;  // kg per nondimensional mass unit
  int n_c = 0;
};

namespace detail {

inline std::string csv_escape(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string tok;
  std::istringstream in(line);
  while (std::getline(in, tok, ',')) out.push_back(tok);
  return out;
}

inline void expect_schema(std::istream& in, const std::string& want, const std::string& file) {
  std::string first;
  if (!std::getline(in, first) || first.rfind("# " + want, 0) != 0)
    throw ArchiveError(file + ": missing schema line `# " + want + "`");
}

}  // namespace detail

/// Builds the archive payload from a finished solve.
inline ResultArchive build_archive(const TransferProblem& problem, const TransferScenario& scenario,
                                   const SolutionBundle& bundle, int n_samples = 2000) {
  ResultArchive a;
  a.scenario_name = scenario.name;
  a.converged = bundle.converged;
  a.reason = bundle.reason;
  a.iterations = bundle.iterations;
  a.accepted_iterations = bundle.accepted_iterations;
  a.stages = problem.num_stages();
  a.system = problem.dynamics().system();
  a.mass_unit_kg = a.system.m_star_kg;
  a.n_c = problem.path_dim();
  a.rho1_final = bundle.rho1;
  a.sigma_final = bundle.sigma;
  a.c_final = bundle.reference.c;
  a.s_final = bundle.reference.s_max;
  a.stage_costates = bundle.reference.lam;
  a.iterates = bundle.history;

  double min_r2_nd = 0.0;
  a.trajectory = problem.sample_trajectory(bundle.reference.lam, n_samples, &min_r2_nd);
  a.min_moon_distance_km = a.system.nd_to_km(min_r2_nd);
  a.switch_count = TransferProblem::count_switches(a.trajectory);
  a.final_mass_kg = bundle.reference.x_final(6) * a.mass_unit_kg;
  a.fuel_used_kg = problem.dynamics().engine().m0 * a.mass_unit_kg - a.final_mass_kg;
  return a;
}

inline void write_archive(const ResultArchive& a, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  {
    FlatConfig summary;
    summary.set("schema", kSummarySchema);
    summary.set("scenario", a.scenario_name);
    summary.set("converged", a.converged ? "true" : "false");
    summary.set("reason", a.reason);
    summary.set("iterations", a.iterations);
    summary.set("accepted_iterations", a.accepted_iterations);
    summary.set("stages", a.stages);
    summary.set("final_mass_kg", a.final_mass_kg);
    summary.set("fuel_used_kg", a.fuel_used_kg);
    summary.set("switch_count", a.switch_count);
    summary.set("min_moon_distance_km", a.min_moon_distance_km);
    summary.set("c_final", a.c_final);
    summary.set("s_final", a.s_final);
    summary.set("rho1_final", a.rho1_final);
    summary.set("sigma_final", a.sigma_final);
    summary.set("wall_time_s", a.wall_time_s);
    summary.set("seed", static_cast<int>(a.seed));
    std::ofstream out(dir / "summary.txt");
    out << summary.serialize();
  }

  const double vel = a.system.vel_unit_km_s();
  {
    std::ofstream out(dir / "trajectory.csv");
    out << "# " << kTrajectorySchema << "\n";
    out << "t_days,x_km,y_km,z_km,vx_km_s,vy_km_s,vz_km_s,mass_kg";
    for (int j = 0; j < a.n_c; ++j) out << ",s" << j;
    out << ",lam_rx,lam_ry,lam_rz,lam_vx,lam_vy,lam_vz,lam_m,u,switching,alpha_norm\n";
    out << std::setprecision(17);
    for (const auto& p : a.trajectory) {
      out << a.system.nd_to_days(p.t_nd);
      for (int i = 0; i < 3; ++i) out << ',' << a.system.nd_to_km(p.y(i));
      for (int i = 3; i < 6; ++i) out << ',' << p.y(i) * vel;
      out << ',' << p.y(6) * a.mass_unit_kg;
      for (int j = 0; j < a.n_c; ++j) out << ',' << p.y(7 + j);
      for (int i = 0; i < 7; ++i) out << ',' << p.y(7 + a.n_c + i);
      out << ',' << p.throttle << ',' << p.switching << ',' << p.alpha_norm << "\n";
    }
  }

  {
    std::ofstream out(dir / "control.csv");
    out << "# " << kControlSchema << "\n";
    out << "t_days,u,switching,alpha_x,alpha_y,alpha_z,theta1,theta2\n";
    out << std::setprecision(17);
    for (const auto& p : a.trajectory) {
      const Vector3d lam_v = p.y.segment<3>(10 + a.n_c);
      Vector3d alpha = Vector3d::Zero();
      if (lam_v.norm() >= kPrimerGuard) alpha = -lam_v.normalized();
      const double theta1 = std::atan2(alpha.y(), alpha.x());
      const double theta2 = std::asin(std::clamp(alpha.z(), -1.0, 1.0));
      out << a.system.nd_to_days(p.t_nd) << ',' << p.throttle << ',' << p.switching << ',' << alpha.x()
          << ',' << alpha.y() << ',' << alpha.z() << ',' << theta1 << ',' << theta2 << "\n";
    }
  }

  {
    std::ofstream out(dir / "iterates.csv");
    out << "# " << kIteratesSchema << "\n";
    out << "iter,j_aug,c,s_max,er0,chi,accepted,delta,sigma,rho1\n";
    out << std::setprecision(17);
    for (const auto& r : a.iterates)
      out << r.iter << ',' << r.j_aug << ',' << r.c << ',' << r.s_max << ',' << r.er0 << ',' << r.chi << ','
          << (r.accepted ? 1 : 0) << ',' << r.delta << ',' << r.sigma << ',' << r.rho1 << "\n";
  }

  {
    std::ofstream out(dir / "stage_costates.txt");
    out << "# " << kCostatesSchema << " stages=" << a.stage_costates.size() << " dim=7\n";
    out << std::setprecision(17);
    for (const auto& lam : a.stage_costates) {
      for (int i = 0; i < lam.size(); ++i) out << (i ? " " : "") << lam[i];
      out << "\n";
    }
  }
}

/// Stage costates in the archive/warm-start format.
inline std::vector<VectorXd> read_costates(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ArchiveError("cannot open costate file " + file.string());
  detail::expect_schema(in, kCostatesSchema, file.string());
  std::vector<VectorXd> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::vector<double> vals;
    double v;
    while (row >> v) vals.push_back(v);
    if (vals.size() != 7) throw ArchiveError("costate rows must have 7 entries");
    out.push_back(Eigen::Map<const VectorXd>(vals.data(), 7));
  }
  if (out.empty()) throw ArchiveError("costate file is empty");
  return out;
}

inline std::map<std::string, std::string> read_summary(const std::filesystem::path& dir) {
  std::ifstream in(dir / "summary.txt");
  if (!in) throw ArchiveError("cannot open " + (dir / "summary.txt").string());
  std::map<std::string, std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
      return s;
    };
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (out["schema"] != kSummarySchema) throw ArchiveError("summary.txt: wrong or missing schema");
  return out;
}

/// Emits plot-ready projections and histories from a stored archive.
inline void emit_plot_data(const std::filesystem::path& archive_dir, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::ifstream in(archive_dir / "trajectory.csv");
  if (!in) throw ArchiveError("cannot open " + (archive_dir / "trajectory.csv").string());
  detail::expect_schema(in, kTrajectorySchema, "trajectory.csv");

  std::string header;
  if (!std::getline(in, header)) throw ArchiveError("trajectory.csv: missing header");
  const auto cols = detail::split_csv_line(header);
  auto col = [&](const std::string& name) {
    for (std::size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<int>(i);
    throw ArchiveError("trajectory.csv: missing column " + name);
  };
  const int it = col("t_days"), ix = col("x_km"), iy = col("y_km"), iz = col("z_km");
  const int ivx = col("lam_vx"), ivy = col("lam_vy"), ivz = col("lam_vz");
  const int iu = col("u"), is = col("switching");

  fs::create_directories(out_dir);
  std::ofstream xy(out_dir / "xy.csv"), xz(out_dir / "xz.csv"), ang(out_dir / "control_angles.csv"),
      moon(out_dir / "moon_distance.csv");
  xy << "# pddp-plot-xy-v1\nx_km,y_km\n";
  xz << "# pddp-plot-xz-v1\nx_km,z_km\n";
  ang << "# pddp-plot-control-angles-v1\nt_days,u,switching,theta1,theta2\n";
  moon << "# pddp-plot-moon-distance-v1\nt_days,r2_km\n";
  xy << std::setprecision(17);
  xz << std::setprecision(17);
  ang << std::setprecision(17);
  moon << std::setprecision(17);

  const Cr3bpSystem sys = earth_moon_system();
  const double moon_x_km = sys.nd_to_km(sys.moon_position().x());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = detail::split_csv_line(line);
    auto num = [&](int i) { return std::stod(f.at(i)); };
    xy << num(ix) << ',' << num(iy) << "\n";
    xz << num(ix) << ',' << num(iz) << "\n";
    Vector3d lam_v(num(ivx), num(ivy), num(ivz));
    Vector3d alpha = Vector3d::Zero();
    if (lam_v.norm() >= kPrimerGuard) alpha = -lam_v.normalized();
    ang << num(it) << ',' << num(iu) << ',' << num(is) << ',' << std::atan2(alpha.y(), alpha.x()) << ','
        << std::asin(std::clamp(alpha.z(), -1.0, 1.0)) << "\n";
    const double r2 =
        std::sqrt(std::pow(num(ix) - moon_x_km, 2) + std::pow(num(iy), 2) + std::pow(num(iz), 2));
    moon << num(it) << ',' << r2 << "\n";
  }
}

}  // namespace pddp
