#pragma once

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pddp/scenarios.hpp"
#include "pddp/solver.hpp"

namespace pddp {

inline constexpr const char* kConfigSchema = "pddp-config-v1";

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat `key = value` text document. Keys mirror the scenario/solver field
/// names; unknown keys are errors so that typos fail fast.
class FlatConfig {
 public:
  static FlatConfig parse(const std::string& text) {
    FlatConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(lineno) + ": expected `key = value`");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
      if (cfg.values_.count(key)) throw ConfigError("config: duplicate key `" + key + "`");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("config: missing key `" + key + "`");
    touched_.insert(key);
    return it->second;
  }

  std::string get_string_or(const std::string& key, const std::string& fallback) {
    return has(key) ? get_string(key) : fallback;
  }

  double get_double(const std::string& key) { return to_double(key, get_string(key)); }
  double get_double_or(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
  }
  int get_int(const std::string& key) {
    const double v = get_double(key);
    if (v != static_cast<long long>(v)) throw ConfigError("config: key `" + key + "` is not an integer");
    return static_cast<int>(v);
  }
  int get_int_or(const std::string& key, int fallback) { return has(key) ? get_int(key) : fallback; }

  std::vector<double> get_vector(const std::string& key) {
    std::istringstream in(get_string(key));
    std::vector<double> out;
    std::string tok;
    while (in >> tok) out.push_back(to_double(key, tok));
    if (out.empty()) throw ConfigError("config: key `" + key + "` has no values");
    return out;
  }

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  void set(const std::string& key, double value) {
    std::ostringstream out;
    out.precision(17);
    out << value;
    values_[key] = out.str();
  }
  void set(const std::string& key, int value) { values_[key] = std::to_string(value); }
  void set(const std::string& key, const VectorXd& value) {
    std::ostringstream out;
    out.precision(17);
    for (int i = 0; i < value.size(); ++i) {
      if (i) out << ' ';
      out << value[i];
    }
    values_[key] = out.str();
  }

  /// Every key must have been consumed by a get_* call.
  void ensure_all_consumed() const {
    std::string unknown;
    for (const auto& [key, value] : values_)
      if (!touched_.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
    if (!unknown.empty()) throw ConfigError("config: unknown keys: " + unknown);
  }

  std::string serialize() const {
    std::ostringstream out;
    for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
    return out.str();
  }

 private:
  static std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }
  static double to_double(const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    double out = 0.0;
    try {
      out = std::stod(value, &pos);
    } catch (const std::exception&) {
      throw ConfigError("config: key `" + key + "`: cannot parse `" + value + "` as a number");
    }
    if (pos != value.size()) throw ConfigError("config: key `" + key + "`: trailing junk in `" + value + "`");
    return out;
  }

  std::map<std::string, std::string> values_;
  std::set<std::string> touched_;
};

inline FlatConfig scenario_to_config(const TransferScenario& sc) {
  FlatConfig cfg;
  cfg.set("schema", kConfigSchema);
  cfg.set("scenario.name", sc.name);
  cfg.set("scenario.description", sc.description);
  cfg.set("scenario.x0", VectorXd(sc.x0_orbital));
  cfg.set("scenario.xf", VectorXd(sc.xf_orbital));
  cfg.set("scenario.tof_days", sc.tof_days);
  cfg.set("scenario.t_max_n", sc.t_max_N);
  cfg.set("scenario.n_stages", sc.n_stages);
  cfg.set("scenario.r2_min_km", sc.r2_min_km);
  cfg.set("scenario.beta", sc.beta);
  cfg.set("scenario.rho2", sc.rho2);
  cfg.set("scenario.init_lo", sc.init_lo);
  cfg.set("scenario.init_hi", sc.init_hi);
  cfg.set("scenario.period_x0_days", sc.period_x0_days);
  cfg.set("scenario.period_xf_days", sc.period_xf_days);
  return cfg;
}

/// Reads a scenario plus optional solver/integrator overrides from a config.
/// Consumes keys; callers should run ensure_all_consumed afterwards.
inline TransferScenario scenario_from_config(FlatConfig& cfg) {
  const std::string schema = cfg.get_string_or("schema", kConfigSchema);
  if (schema != kConfigSchema) throw ConfigError("config: unsupported schema `" + schema + "`");

  TransferScenario sc;
  if (cfg.has("scenario.base")) {
    auto base = find_scenario(cfg.get_string("scenario.base"));
    if (!base) throw ConfigError("config: scenario.base names no builtin scenario");
    sc = *base;
  }
  if (cfg.has("scenario.name")) sc.name = cfg.get_string("scenario.name");
  if (cfg.has("scenario.description")) sc.description = cfg.get_string("scenario.description");
  auto read_vec6 = [&](const char* key, Vector6d& out) {
    if (!cfg.has(key)) return;
    const std::vector<double> v = cfg.get_vector(key);
    if (v.size() != 6) throw ConfigError(std::string("config: ") + key + " must have 6 entries");
    for (int i = 0; i < 6; ++i) out[i] = v[i];
  };
  read_vec6("scenario.x0", sc.x0_orbital);
  read_vec6("scenario.xf", sc.xf_orbital);
  sc.tof_days = cfg.get_double_or("scenario.tof_days", sc.tof_days);
  sc.t_max_N = cfg.get_double_or("scenario.t_max_n", sc.t_max_N);
  sc.n_stages = cfg.get_int_or("scenario.n_stages", sc.n_stages);
  sc.r2_min_km = cfg.get_double_or("scenario.r2_min_km", sc.r2_min_km);
  sc.beta = cfg.get_double_or("scenario.beta", sc.beta);
  sc.rho2 = cfg.get_double_or("scenario.rho2", sc.rho2);
  sc.init_lo = cfg.get_double_or("scenario.init_lo", sc.init_lo);
  sc.init_hi = cfg.get_double_or("scenario.init_hi", sc.init_hi);
  sc.period_x0_days = cfg.get_double_or("scenario.period_x0_days", sc.period_x0_days);
  sc.period_xf_days = cfg.get_double_or("scenario.period_xf_days", sc.period_xf_days);
  sc.validate();
  return sc;
}

inline void apply_solver_overrides(FlatConfig& cfg, SolverConfig& solver) {
  solver.eps1 = cfg.get_double_or("solver.eps1", solver.eps1);
  solver.kappa = cfg.get_double_or("solver.kappa", solver.kappa);
  solver.delta0 = cfg.get_double_or("solver.delta0", solver.delta0);
  solver.delta_min = cfg.get_double_or("solver.delta_min", solver.delta_min);
  solver.delta_max = cfg.get_double_or("solver.delta_max", solver.delta_max);
  if (cfg.has("solver.scale_d")) {
    const std::vector<double> d = cfg.get_vector("solver.scale_d");
    solver.scale_d = Eigen::Map<const VectorXd>(d.data(), d.size());
  }
  solver.sigma0 = cfg.get_double_or("solver.sigma0", solver.sigma0);
  solver.sigma_max = cfg.get_double_or("solver.sigma_max", solver.sigma_max);
  solver.k_sigma = cfg.get_double_or("solver.k_sigma", solver.k_sigma);
  solver.delta_sigma = cfg.get_double_or("solver.delta_sigma", solver.delta_sigma);
  solver.beta = cfg.get_double_or("solver.beta", solver.beta);
  solver.rho1_init = cfg.get_double_or("solver.rho1_init", solver.rho1_init);
  solver.k_rho = cfg.get_double_or("solver.k_rho", solver.k_rho);
  solver.rho1_bangbang = cfg.get_double_or("solver.rho1_bangbang", solver.rho1_bangbang);
  solver.rho2 = cfg.get_double_or("solver.rho2", solver.rho2);
  solver.eps_opt = cfg.get_double_or("solver.eps_opt", solver.eps_opt);
  solver.eps_feas = cfg.get_double_or("solver.eps_feas", solver.eps_feas);
  solver.eps_spc = cfg.get_double_or("solver.eps_spc", solver.eps_spc);
  solver.max_iters = cfg.get_int_or("solver.max_iters", solver.max_iters);
  solver.stall_limit = cfg.get_int_or("solver.stall_limit", solver.stall_limit);
  solver.workers = cfg.get_int_or("solver.workers", solver.workers);
}

inline void apply_integrator_overrides(FlatConfig& cfg, IntegratorConfig& integ) {
  integ.rel_tol = cfg.get_double_or("integ.rel_tol", integ.rel_tol);
  integ.abs_tol = cfg.get_double_or("integ.abs_tol", integ.abs_tol);
  integ.max_steps = cfg.get_int_or("integ.max_steps", static_cast<int>(integ.max_steps));
}

}  // namespace pddp
