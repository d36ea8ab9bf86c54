#ifndef DARKSQUEEZE_RUNCONFIG_HPP
#define DARKSQUEEZE_RUNCONFIG_HPP

// Flat key = value run configuration: parsing, validation, serialization.
// Frequency keys carry the _kHz suffix (meaning 2pi*kHz), times _us.
// Unknown keys are rejected by name.

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "darksqueeze/dynamics.hpp"
#include "darksqueeze/model.hpp"

namespace darksqueeze {

struct RunConfig {
  PhysicalParams params;
  // delta_a_kHz is the design knob: cavity_offset = delta_a + N g1^2/Delta1.
  // It is mutually exclusive with cavity_offset_kHz.
  std::optional<double> delta_a_knob;

  RampShape shape = RampShape::SineSquared;
  double tanh_steepness = 3.0;
  double t_total_us = 10.0;

  EvolveConfig evolve;

  Level level = Level::TwoMode;
  Branch branch = Branch::Atomic;
  bool open_system = false;
  bool keep_residual_stark = false;
  int cavity_dim = 40;
  int b_dim = 40;
  long long n_atoms_model = 1;

  std::string output = "run_output.csv";

  Schedule schedule() const {
    return {shape, t_total_us, params.omega2_rabi_max, tanh_steepness};
  }

  ModelLevel model_level() const {
    switch (level) {
      case Level::Full:
        return ModelLevel::full(cavity_dim, static_cast<int>(n_atoms_model), branch);
      case Level::Spin:
        return ModelLevel::spin(cavity_dim, static_cast<int>(n_atoms_model), branch);
      case Level::TwoMode:
        return ModelLevel::two_mode(cavity_dim, b_dim, branch);
      case Level::Transformed:
        return ModelLevel::transformed(cavity_dim, b_dim, branch);
    }
    throw InvalidInputError("unknown level");
  }
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline double parse_number(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double x = 0;
  try {
    x = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw InvalidInputError(key + " must be a number, got '" + v + "'");
  }
  if (pos != v.size()) throw InvalidInputError(key + " must be a number, got '" + v + "'");
  return x;
}

inline long long parse_integer(const std::string& key, const std::string& v) {
  const double x = parse_number(key, v);
  const long long n = static_cast<long long>(x);
  if (static_cast<double>(n) != x)
    throw InvalidInputError(key + " must be an integer, got '" + v + "'");
  return n;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw InvalidInputError(key + " must be true or false, got '" + v + "'");
}

inline std::string format_number(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);  // exact double round-trip
  return buf;
}

}  // namespace config_detail

/// Applies one key = value assignment; throws InvalidInputError naming the
/// key on anything unknown or malformed.
inline void apply_config_key(RunConfig& cfg, const std::string& key,
                             const std::string& value,
                             bool* saw_cavity_offset = nullptr,
                             bool* saw_delta_a = nullptr) {
  using namespace config_detail;
  auto num = [&] { return parse_number(key, value); };
  auto integer = [&] { return parse_integer(key, value); };
  auto boolean = [&] { return parse_bool(key, value); };

  if (key == "g1_kHz") cfg.params.g1 = num();
  else if (key == "g2_kHz") cfg.params.g2 = num();
  else if (key == "omega1_rabi_kHz") cfg.params.omega1_rabi = num();
  else if (key == "omega2_rabi_max_kHz") cfg.params.omega2_rabi_max = num();
  else if (key == "phi1_rad") cfg.params.phi1 = num();
  else if (key == "phi2_rad") cfg.params.phi2 = num();
  else if (key == "delta1_kHz") cfg.params.delta1 = num();
  else if (key == "delta2_kHz") cfg.params.delta2 = num();
  else if (key == "cavity_offset_kHz") {
    cfg.params.cavity_offset = num();
    if (saw_cavity_offset) *saw_cavity_offset = true;
  } else if (key == "delta_a_kHz") {
    cfg.delta_a_knob = num();
    if (saw_delta_a) *saw_delta_a = true;
  } else if (key == "two_photon_offset_kHz") cfg.params.two_photon_offset = num();
  else if (key == "n_atoms") cfg.params.n_atoms = integer();
  else if (key == "kappa_kHz") cfg.params.kappa = num();
  else if (key == "gamma_kHz") cfg.params.gamma = num();
  else if (key == "shape") {
    if (value == "linear") cfg.shape = RampShape::Linear;
    else if (value == "sine_squared") cfg.shape = RampShape::SineSquared;
    else if (value == "tanh") cfg.shape = RampShape::TanhRamp;
    else throw InvalidInputError("shape must be linear|sine_squared|tanh, got '" + value + "'");
  } else if (key == "tanh_steepness") cfg.tanh_steepness = num();
  else if (key == "t_total_us") cfg.t_total_us = num();
  else if (key == "n_steps") cfg.evolve.n_steps = static_cast<int>(integer());
  else if (key == "method") {
    if (value == "piecewise_exp") cfg.evolve.method = EvolveMethod::PiecewiseExponential;
    else if (value == "adaptive_rk") cfg.evolve.method = EvolveMethod::AdaptiveRK;
    else throw InvalidInputError("method must be piecewise_exp|adaptive_rk, got '" + value + "'");
  } else if (key == "rel_tol") cfg.evolve.rel_tol = num();
  else if (key == "abs_tol") cfg.evolve.abs_tol = num();
  else if (key == "record_every") cfg.evolve.record_every = static_cast<int>(integer());
  else if (key == "truncation_tol") cfg.evolve.truncation_tol = num();
  else if (key == "level") {
    if (value == "full") cfg.level = Level::Full;
    else if (value == "spin") cfg.level = Level::Spin;
    else if (value == "two_mode") cfg.level = Level::TwoMode;
    else if (value == "transformed") cfg.level = Level::Transformed;
    else throw InvalidInputError("level must be full|spin|two_mode|transformed, got '" + value + "'");
  } else if (key == "branch") {
    if (value == "atomic") cfg.branch = Branch::Atomic;
    else if (value == "field") cfg.branch = Branch::Field;
    else throw InvalidInputError("branch must be atomic|field, got '" + value + "'");
  } else if (key == "open_system") cfg.open_system = boolean();
  else if (key == "keep_residual_stark") cfg.keep_residual_stark = boolean();
  else if (key == "cavity_dim") cfg.cavity_dim = static_cast<int>(integer());
  else if (key == "b_dim") cfg.b_dim = static_cast<int>(integer());
  else if (key == "n_atoms_model") cfg.n_atoms_model = integer();
  else if (key == "output") cfg.output = value;
  else throw InvalidInputError("unknown config key '" + key + "'");
}

/// Resolves the delta_a knob into cavity_offset and checks hard invariants.
inline void finalize_config(RunConfig& cfg, bool saw_cavity_offset, bool saw_delta_a) {
  if (saw_cavity_offset && saw_delta_a)
    throw InvalidInputError("cavity_offset_kHz and delta_a_kHz are mutually exclusive");
  if (cfg.delta_a_knob) {
    if (cfg.params.delta1 == 0.0) throw InvalidInputError("delta1 must be nonzero");
    const double xi_g = cfg.params.g1 * cfg.params.g1 / cfg.params.delta1;
    cfg.params.cavity_offset =
        *cfg.delta_a_knob + static_cast<double>(cfg.params.n_atoms) * xi_g;
  }
  validate(cfg.params);
  cfg.evolve.validate();
  if (cfg.cavity_dim < 2) throw InvalidInputError("cavity_dim must be >= 2");
  if (cfg.b_dim < 2) throw InvalidInputError("b_dim must be >= 2");
  if (cfg.n_atoms_model < 1) throw InvalidInputError("n_atoms_model must be >= 1");
  if (!(cfg.t_total_us > 0)) throw InvalidInputError("t_total_us must be > 0");
  cfg.model_level();  // level-specific dimension checks
}

inline RunConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides = {}) {
  using namespace config_detail;
  RunConfig cfg;
  bool saw_cavity_offset = false, saw_delta_a = false;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError("config line " + std::to_string(line_no) +
                              " is not 'key = value'");
    apply_config_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)),
                     &saw_cavity_offset, &saw_delta_a);
  }
  for (const auto& ov : overrides) {
    const size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw InvalidInputError("override '" + ov + "' is not key=value");
    apply_config_key(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)),
                     &saw_cavity_offset, &saw_delta_a);
  }
  finalize_config(cfg, saw_cavity_offset, saw_delta_a);
  return cfg;
}

inline RunConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {}) {
  std::ifstream f(path);
  if (!f) throw InvalidInputError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), overrides);
}

/// Serializes in fixed key order with full precision; parsing the output
/// reproduces the configuration exactly.
inline std::string serialize_config(const RunConfig& cfg) {
  using config_detail::format_number;
  std::ostringstream out;
  auto put = [&](const char* k, const std::string& v) { out << k << " = " << v << "\n"; };
  put("g1_kHz", format_number(cfg.params.g1));
  put("g2_kHz", format_number(cfg.params.g2));
  put("omega1_rabi_kHz", format_number(cfg.params.omega1_rabi));
  put("omega2_rabi_max_kHz", format_number(cfg.params.omega2_rabi_max));
  put("phi1_rad", format_number(cfg.params.phi1));
  put("phi2_rad", format_number(cfg.params.phi2));
  put("delta1_kHz", format_number(cfg.params.delta1));
  put("delta2_kHz", format_number(cfg.params.delta2));
  if (cfg.delta_a_knob)
    put("delta_a_kHz", format_number(*cfg.delta_a_knob));
  else
    put("cavity_offset_kHz", format_number(cfg.params.cavity_offset));
  put("two_photon_offset_kHz", format_number(cfg.params.two_photon_offset));
  put("n_atoms", std::to_string(cfg.params.n_atoms));
  put("kappa_kHz", format_number(cfg.params.kappa));
  put("gamma_kHz", format_number(cfg.params.gamma));
  put("shape", cfg.shape == RampShape::Linear       ? "linear"
               : cfg.shape == RampShape::SineSquared ? "sine_squared"
                                                     : "tanh");
  put("tanh_steepness", format_number(cfg.tanh_steepness));
  put("t_total_us", format_number(cfg.t_total_us));
  put("n_steps", std::to_string(cfg.evolve.n_steps));
  put("method", cfg.evolve.method == EvolveMethod::PiecewiseExponential
                    ? "piecewise_exp"
                    : "adaptive_rk");
  put("rel_tol", format_number(cfg.evolve.rel_tol));
  put("abs_tol", format_number(cfg.evolve.abs_tol));
  put("record_every", std::to_string(cfg.evolve.record_every));
  put("truncation_tol", format_number(cfg.evolve.truncation_tol));
  put("level", cfg.level == Level::Full          ? "full"
               : cfg.level == Level::Spin        ? "spin"
               : cfg.level == Level::TwoMode     ? "two_mode"
                                                 : "transformed");
  put("branch", cfg.branch == Branch::Atomic ? "atomic" : "field");
  put("open_system", cfg.open_system ? "true" : "false");
  put("keep_residual_stark", cfg.keep_residual_stark ? "true" : "false");
  put("cavity_dim", std::to_string(cfg.cavity_dim));
  put("b_dim", std::to_string(cfg.b_dim));
  put("n_atoms_model", std::to_string(cfg.n_atoms_model));
  put("output", cfg.output);
  return out.str();
}

}  // namespace darksqueeze

#endif  // DARKSQUEEZE_RUNCONFIG_HPP
