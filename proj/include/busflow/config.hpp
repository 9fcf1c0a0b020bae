#pragma once

#include <cctype>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "busflow/presets.hpp"
#include "busflow/solver.hpp"

namespace busflow {

namespace detail {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string join17(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ',';
    out += fmt17(xs[i]);
  }
  return out;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& v, const std::string& path) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(path + ": not a number: '" + v + "'");
  return x;
}

inline long parse_long(const std::string& v, const std::string& path) {
  char* end = nullptr;
  long x = std::strtol(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0')
    throw ConfigError(path + ": not an integer: '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& v, const std::string& path) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(path + ": not a boolean: '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& v, const std::string& path) {
  std::vector<double> out;
  std::string item;
  std::stringstream ss(v);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_double(item, path));
  }
  return out;
}

/// Ordered key/value view of a config; the canonical text format serializes it.
struct ConfigKV {
  std::map<std::string, std::string> kv;  // "section.key" -> value

  const std::string* find(const std::string& path) const {
    auto it = kv.find(path);
    return it == kv.end() ? nullptr : &it->second;
  }
  std::string require(const std::string& path) const {
    const std::string* v = find(path);
    if (!v) throw ConfigError(path + ": missing required key");
    return *v;
  }
  std::string get_or(const std::string& path, const std::string& def) const {
    const std::string* v = find(path);
    return v ? *v : def;
  }
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string flux_kind_name(FluxKind k) {
  switch (k) {
    case FluxKind::Godunov:
      return "godunov";
    case FluxKind::Rusanov:
      return "rusanov";
    default:
      return "engquist_osher";
  }
}

inline std::string mode_name(CouplingMode m) {
  switch (m) {
    case CouplingMode::Nonlocal:
      return "nonlocal";
    case CouplingMode::Local:
      return "local";
    case CouplingMode::Frozen:
      return "frozen";
    default:
      return "splitting";
  }
}

/// Canonical text form of a fully resolved config. parse_config inverts it
/// exactly (17 significant digits round-trip doubles).
inline std::string emit_config(const RunConfig& cfg) {
  using detail::fmt17;
  using detail::join17;
  std::string o;
  o += "[model]\n";
  if (cfg.model.f.kind == CurveKind::Quadratic) {
    o += "flux = quadratic\n";
    o += "max_density = " + fmt17(cfg.model.f.max_density) + "\n";
    o += "flux_scale = " + fmt17(cfg.model.f.scale) + "\n";
  } else {
    o += "flux = tabulated\n";
    o += "flux_breaks = " + join17(cfg.model.f.xs) + "\n";
    o += "flux_values = " + join17(cfg.model.f.ys) + "\n";
  }
  switch (cfg.model.omega.kind) {
    case OmegaKind::LwrMin:
      o += "omega = lwr_min\n";
      o += "omega_v_bus = " + fmt17(cfg.model.omega.v_bus) + "\n";
      break;
    case OmegaKind::RationalThenLinear:
      o += "omega = rational_then_linear\n";
      o += "omega_alpha = " + fmt17(cfg.model.omega.alpha) + "\n";
      o += "omega_beta = " + fmt17(cfg.model.omega.beta) + "\n";
      o += "omega_rho_star = " + fmt17(cfg.model.omega.rho_star) + "\n";
      break;
    default:
      o += "omega = tabulated\n";
      o += "omega_breaks = " + join17(cfg.model.omega.xs) + "\n";
      o += "omega_values = " + join17(cfg.model.omega.ys) + "\n";
  }
  o += "q_coeff = " + fmt17(cfg.model.Q.coeff) + "\n";

  o += "\n[grid]\n";
  o += "x_min = " + fmt17(cfg.grid.x_min) + "\n";
  o += "x_max = " + fmt17(cfg.grid.x_max) + "\n";
  o += "cells = " + std::to_string(cfg.grid.cells) + "\n";

  o += "\n[initial]\n";
  o += "breaks = " + join17(cfg.initial.breaks) + "\n";
  o += "values = " + join17(cfg.initial.values) + "\n";
  o += "y0 = " + fmt17(cfg.y0) + "\n";

  o += "\n[coupling]\n";
  o += "mode = " + mode_name(cfg.mode) + "\n";
  if (!cfg.has_weight) {
    o += "weight = none\n";
  } else if (cfg.weight.k >= 1) {
    o += "weight = mu" + std::to_string(cfg.weight.k) + "\n";
  } else {
    o += "weight = explicit\n";
    o += "weight_edges = " + join17(cfg.weight.edges) + "\n";
    o += "weight_values = " + join17(cfg.weight.values) + "\n";
  }
  o += "bulk_flux = " + flux_kind_name(cfg.bulk_flux) + "\n";
  o += "interface_flux = " + flux_kind_name(cfg.interface_flux) + "\n";
  o += std::string("rusanov_mode = ") +
       (cfg.rusanov_mode == RusanovMode::Global ? "global" : "local") + "\n";
  o += "cfl = " + fmt17(cfg.cfl_target) + "\n";
  if (cfg.mode == CouplingMode::Splitting) o += "delta = " + fmt17(cfg.splitting_delta) + "\n";
  if (cfg.mode == CouplingMode::Frozen && !cfg.frozen_series_file.empty())
    o += "series_file = " + cfg.frozen_series_file + "\n";

  o += "\n[output]\n";
  o += "T = " + fmt17(cfg.T) + "\n";
  o += "snapshots = " + join17(cfg.snapshot_times) + "\n";
  o += std::string("store_states = ") + (cfg.store_states ? "true" : "false") + "\n";
  o += std::string("record_tv = ") + (cfg.record_tv ? "true" : "false") + "\n";
  o += std::string("record_mass = ") + (cfg.record_mass ? "true" : "false") + "\n";
  return o;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "preset",
      "model.flux", "model.max_density", "model.flux_scale", "model.flux_breaks",
      "model.flux_values", "model.omega", "model.omega_v_bus", "model.omega_alpha",
      "model.omega_beta", "model.omega_rho_star", "model.omega_breaks", "model.omega_values",
      "model.q_coeff",
      "grid.x_min", "grid.x_max", "grid.cells",
      "initial.breaks", "initial.values", "initial.y0",
      "coupling.mode", "coupling.weight", "coupling.weight_edges", "coupling.weight_values",
      "coupling.bulk_flux", "coupling.interface_flux", "coupling.rusanov_mode", "coupling.cfl",
      "coupling.delta", "coupling.series_file",
      "output.T", "output.snapshots", "output.store_states", "output.record_tv",
      "output.record_mass"};
  return keys;
}

inline ConfigKV kv_of_text(const std::string& text) {
  ConfigKV out;
  std::string section;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    std::string path = section.empty() ? key : section + "." + key;
    if (!known_keys().count(path)) throw ConfigError(path + ": unknown key");
    out.kv[path] = val;
  }
  return out;
}

inline ConfigKV kv_of_config(const RunConfig& cfg) { return kv_of_text(emit_config(cfg)); }

inline FluxKind parse_flux_kind(const std::string& v, const std::string& path) {
  if (v == "godunov") return FluxKind::Godunov;
  if (v == "rusanov") return FluxKind::Rusanov;
  if (v == "engquist_osher") return FluxKind::EngquistOsher;
  throw ConfigError(path + ": unknown flux kind '" + v + "'");
}

inline RunConfig config_of_kv(const ConfigKV& kv) {
  RunConfig cfg;
  try {
    // model
    std::string flux = kv.get_or("model.flux", "quadratic");
    if (flux == "quadratic") {
      cfg.model.f = FluxCurve::quadratic(parse_double(kv.get_or("model.max_density", "1"), "model.max_density"),
                                         parse_double(kv.get_or("model.flux_scale", "1"), "model.flux_scale"));
    } else if (flux == "tabulated") {
      cfg.model.f = FluxCurve::tabulated(parse_list(kv.require("model.flux_breaks"), "model.flux_breaks"),
                                         parse_list(kv.require("model.flux_values"), "model.flux_values"));
    } else {
      throw ConfigError("model.flux: unknown curve '" + flux + "'");
    }
    std::string om = kv.require("model.omega");
    if (om == "lwr_min") {
      cfg.model.omega = OmegaLaw::lwr_min(parse_double(kv.require("model.omega_v_bus"), "model.omega_v_bus"));
    } else if (om == "rational_then_linear") {
      cfg.model.omega = OmegaLaw::rational_then_linear(
          parse_double(kv.require("model.omega_alpha"), "model.omega_alpha"),
          parse_double(kv.require("model.omega_beta"), "model.omega_beta"),
          parse_double(kv.require("model.omega_rho_star"), "model.omega_rho_star"));
    } else if (om == "tabulated") {
      cfg.model.omega = OmegaLaw::tabulated(parse_list(kv.require("model.omega_breaks"), "model.omega_breaks"),
                                            parse_list(kv.require("model.omega_values"), "model.omega_values"));
    } else {
      throw ConfigError("model.omega: unknown speed law '" + om + "'");
    }
    cfg.model = FluxModel::make(cfg.model.f, cfg.model.omega,
                                ConstraintLaw(parse_double(kv.require("model.q_coeff"), "model.q_coeff")));

    // grid
    cfg.grid = Grid::make(parse_double(kv.require("grid.x_min"), "grid.x_min"),
                          parse_double(kv.require("grid.x_max"), "grid.x_max"),
                          static_cast<int>(parse_long(kv.require("grid.cells"), "grid.cells")));

    // initial data
    cfg.initial = PiecewiseConstantProfile::make(
        parse_list(kv.get_or("initial.breaks", ""), "initial.breaks"),
        parse_list(kv.require("initial.values"), "initial.values"));
    cfg.y0 = parse_double(kv.require("initial.y0"), "initial.y0");

    // coupling
    std::string mode = kv.require("coupling.mode");
    if (mode == "nonlocal") cfg.mode = CouplingMode::Nonlocal;
    else if (mode == "local") cfg.mode = CouplingMode::Local;
    else if (mode == "frozen") cfg.mode = CouplingMode::Frozen;
    else if (mode == "splitting") cfg.mode = CouplingMode::Splitting;
    else throw ConfigError("coupling.mode: unknown mode '" + mode + "'");

    std::string w = kv.get_or("coupling.weight", "none");
    if (w == "none") {
      cfg.has_weight = false;
    } else if (w.rfind("mu", 0) == 0) {
      cfg.weight = WeightProfile::mu_k(static_cast<int>(parse_long(w.substr(2), "coupling.weight")));
      cfg.has_weight = true;
    } else if (w == "explicit") {
      cfg.weight = WeightProfile::piecewise(
          parse_list(kv.require("coupling.weight_edges"), "coupling.weight_edges"),
          parse_list(kv.require("coupling.weight_values"), "coupling.weight_values"));
      cfg.has_weight = true;
    } else {
      throw ConfigError("coupling.weight: unknown weight '" + w + "'");
    }
    cfg.bulk_flux = parse_flux_kind(kv.get_or("coupling.bulk_flux", "rusanov"), "coupling.bulk_flux");
    cfg.interface_flux =
        parse_flux_kind(kv.get_or("coupling.interface_flux", "godunov"), "coupling.interface_flux");
    std::string rm = kv.get_or("coupling.rusanov_mode", "global");
    if (rm == "global") cfg.rusanov_mode = RusanovMode::Global;
    else if (rm == "local") cfg.rusanov_mode = RusanovMode::Local;
    else throw ConfigError("coupling.rusanov_mode: expected global or local, got '" + rm + "'");
    cfg.cfl_target = parse_double(kv.get_or("coupling.cfl", "0.5"), "coupling.cfl");
    if (cfg.mode == CouplingMode::Splitting)
      cfg.splitting_delta = parse_double(kv.require("coupling.delta"), "coupling.delta");
    if (const std::string* sf = kv.find("coupling.series_file")) cfg.frozen_series_file = *sf;

    // output
    cfg.T = parse_double(kv.require("output.T"), "output.T");
    cfg.snapshot_times = parse_list(kv.get_or("output.snapshots", ""), "output.snapshots");
    cfg.store_states = parse_bool(kv.get_or("output.store_states", "false"), "output.store_states");
    cfg.record_tv = parse_bool(kv.get_or("output.record_tv", "false"), "output.record_tv");
    cfg.record_mass = parse_bool(kv.get_or("output.record_mass", "false"), "output.record_mass");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::domain_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

}  // namespace detail

/// Named preset expanded to a full, validated RunConfig.
inline RunConfig preset_config(const std::string& name) {
  if (name == "validation") {
    RunConfig cfg = validation_config();
    cfg.record_tv = true;
    return cfg;
  }
  if (name == "convergence") return validation_config(160);
  if (name == "case1" || name == "case2" || name == "case3") {
    RunConfig cfg = case_config(name.back() - '0');
    cfg.record_tv = true;
    cfg.store_states = true;
    return cfg;
  }
  if (name == "compare_local") return case_config(3, 40960);
  if (name == "weight_sweep") return case_config(3, 40960);
  if (name == "artifact_probe") return artifact_config(3);
  throw ConfigError("preset: unknown preset '" + name + "'");
}

/// Parses the structured text format. A leading `preset = <name>` seeds every
/// key from that preset; explicit keys override it.
inline RunConfig parse_config_text(const std::string& text) {
  detail::ConfigKV file = detail::kv_of_text(text);
  auto preset_it = file.kv.find("preset");
  if (preset_it == file.kv.end()) return detail::config_of_kv(file);
  detail::ConfigKV merged = detail::kv_of_config(preset_config(preset_it->second));
  for (const auto& [k, v] : file.kv)
    if (k != "preset") merged.kv[k] = v;
  return detail::config_of_kv(merged);
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace busflow
