#pragma once

// Configuration-driven trajectories: resolve a scenario (defaults, preset,
// YAML file), tabulate kernels once per bath setting, propagate the initial
// state over the time grid and write one CSV per case plus a run manifest.
//
// Config files are YAML with the sections material, bath, initial, grid,
// sweep, quadrature, oracle and outputs; every key is optional. An empty
// file resolves to the GaAs defaults.

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dotdiscord/correlation_measures.hpp"
#include "dotdiscord/errors.hpp"
#include "dotdiscord/phonon_kernel.hpp"
#include "dotdiscord/two_qubit_state.hpp"
#include "dotdiscord/verification_oracle.hpp"

namespace dotdiscord {

inline constexpr const char* tool_version = "dotdiscord 1.0.0";

// Shortest round-trip-safe text for a double ("%.17g").
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Compact text used in file names ("%g").
inline std::string format_label(double v) {
  if (std::isinf(v)) return "inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

struct TimeGrid {
  double t_max = 10.0;
  std::size_t n_points = 201;

  // t_max = 0 collapses the grid to the single point {0}.
  std::vector<double> points() const {
    if (t_max == 0.0) return {0.0};
    std::vector<double> out(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
      out[i] = t_max * static_cast<double>(i) / static_cast<double>(n_points - 1);
    }
    return out;
  }
};

struct InitialState {
  enum class Kind { Pure, XState, Matrix };
  Kind kind = Kind::Pure;
  PureStateSpec pure;
  XStateSpec x;
  std::string matrix_path;
  Matrix4c matrix = Matrix4c::Zero();

  TwoQubitState state() const {
    switch (kind) {
      case Kind::Pure: return make_pure_state(pure);
      case Kind::XState: return make_x_state(x, 1.0, 1.0);
      case Kind::Matrix: return TwoQubitState::from_matrix(matrix);
    }
    throw Error("unknown initial-state kind");
  }
};

enum class SweepAxis { Temperature, Distance, AMinusB, DeltaEps, DeltaE };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Temperature: return "temperature";
    case SweepAxis::Distance: return "d";
    case SweepAxis::AMinusB: return "a_minus_b";
    case SweepAxis::DeltaEps: return "delta_eps";
    case SweepAxis::DeltaE: return "delta_E";
  }
  return "?";
}

inline const char* axis_tag(SweepAxis a) {
  switch (a) {
    case SweepAxis::Temperature: return "T";
    case SweepAxis::Distance: return "d";
    case SweepAxis::AMinusB: return "ab";
    case SweepAxis::DeltaEps: return "deps";
    case SweepAxis::DeltaE: return "dE";
  }
  return "?";
}

struct Sweep {
  SweepAxis axis = SweepAxis::Temperature;
  std::vector<double> values;  // +inf encodes d = infinite
};

// One fully resolved trajectory.
struct ScenarioCase {
  std::string label;
  BathConfig bath;
  std::optional<double> target_delta_E;  // when set, bath.delta_eps is derived
  InitialState initial;
};

struct ScenarioConfig {
  MaterialParams material = MaterialParams::gaas();
  BathConfig bath;
  std::optional<double> target_delta_E;
  InitialState initial;
  TimeGrid grid;
  std::vector<Sweep> sweeps;
  QuadratureConfig quadrature;
  OracleOptions oracle;
  std::string output_dir = "out";
  bool plot_scripts = true;
  bool with_oracle = false;
  unsigned threads = 1;
  std::string preset;
  std::vector<ScenarioCase> preset_cases;  // replaces sweep expansion when non-empty

  // Cartesian product of the sweep axes (or the preset's case list).
  std::vector<ScenarioCase> cases() const;
};

namespace detail {

inline void apply_axis(ScenarioCase& c, SweepAxis axis, double v) {
  switch (axis) {
    case SweepAxis::Temperature: c.bath.temperature_K = v; break;
    case SweepAxis::Distance:
      c.bath.distance = std::isinf(v) ? DotDistance::infinite() : DotDistance::nm(v);
      break;
    case SweepAxis::AMinusB:
      if (c.initial.kind != InitialState::Kind::XState) {
        throw ConfigParseError("sweep.a_minus_b", "sweeping a_minus_b needs an xstate initial state");
      }
      c.initial.x = XStateSpec::from_difference(v);
      break;
    case SweepAxis::DeltaEps:
      c.bath.delta_eps = v;
      c.target_delta_E.reset();
      break;
    case SweepAxis::DeltaE: c.target_delta_E = v; break;
  }
}

}  // namespace detail

inline std::vector<ScenarioCase> ScenarioConfig::cases() const {
  if (!preset_cases.empty()) return preset_cases;
  ScenarioCase base{"base", bath, target_delta_E, initial};
  std::vector<ScenarioCase> out{base};
  for (const auto& sweep : sweeps) {
    std::vector<ScenarioCase> next;
    for (const auto& c : out) {
      for (double v : sweep.values) {
        ScenarioCase n = c;
        detail::apply_axis(n, sweep.axis, v);
        n.label = (c.label == "base" ? std::string() : c.label + "_") + axis_tag(sweep.axis) +
                  "-" + format_label(v);
        next.push_back(std::move(n));
      }
    }
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Presets

// X-state decay at 77 K: |a - b| in {0, 0.15, 0.3} for d = inf and d = 6 nm.
inline void apply_preset_fig1(ScenarioConfig& cfg) {
  cfg.preset = "fig1";
  cfg.material = MaterialParams::gaas();
  cfg.bath = BathConfig{77.0, DotDistance::nm(6.0), 0.0};
  cfg.target_delta_E.reset();
  cfg.initial = InitialState{};
  cfg.initial.kind = InitialState::Kind::XState;
  cfg.sweeps.clear();
  cfg.preset_cases.clear();
  for (double d : {std::numeric_limits<double>::infinity(), 6.0}) {
    for (double diff : {0.0, 0.15, 0.3}) {
      ScenarioCase c;
      c.bath = cfg.bath;
      c.bath.distance = std::isinf(d) ? DotDistance::infinite() : DotDistance::nm(d);
      c.initial = cfg.initial;
      c.initial.x = XStateSpec::from_difference(diff);
      c.label = "d-" + format_label(d) + "_ab-" + format_label(diff);
      cfg.preset_cases.push_back(c);
    }
  }
}

// Pure a = 1/4 state at d = 6 nm: renormalized shift 0 at 3 K and 77 K, and
// 6 / ps at 77 K.
inline void apply_preset_fig2(ScenarioConfig& cfg) {
  cfg.preset = "fig2";
  cfg.material = MaterialParams::gaas();
  cfg.bath = BathConfig{77.0, DotDistance::nm(6.0), 0.0};
  cfg.target_delta_E = 0.0;
  cfg.initial = InitialState{};
  cfg.initial.kind = InitialState::Kind::Pure;
  cfg.initial.pure = PureStateSpec{0.25, 0.0, 0.0};
  cfg.sweeps.clear();
  cfg.preset_cases.clear();
  const std::vector<std::pair<double, double>> runs = {{3.0, 0.0}, {77.0, 0.0}, {77.0, 6.0}};
  for (const auto& [temperature, shift] : runs) {
    ScenarioCase c;
    c.bath = cfg.bath;
    c.bath.temperature_K = temperature;
    c.target_delta_E = shift;
    c.initial = cfg.initial;
    c.label = "T-" + format_label(temperature) + "_dE-" + format_label(shift);
    cfg.preset_cases.push_back(c);
  }
}

inline void apply_preset(ScenarioConfig& cfg, const std::string& name) {
  if (name == "fig1") {
    apply_preset_fig1(cfg);
  } else if (name == "fig2") {
    apply_preset_fig2(cfg);
  } else {
    throw ConfigParseError("--preset", "unknown preset '" + name + "' (expected fig1 or fig2)");
  }
}

// ---------------------------------------------------------------------------
// YAML parsing

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : -1; }

inline void check_keys(const YAML::Node& node, const std::string& section,
                       const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ConfigParseError(section, "expected a mapping", line_of(node));
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ConfigParseError(section + "." + key, "unknown key", line_of(kv.first));
    }
  }
}

inline double parse_number(const YAML::Node& n, const std::string& field) {
  if (!n.IsScalar()) throw ConfigParseError(field, "expected a number", line_of(n));
  const std::string text = n.Scalar();
  if (text == "inf" || text == "infinity" || text == "Inf" || text == ".inf") {
    return std::numeric_limits<double>::infinity();
  }
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigParseError(field, "'" + text + "' is not a number", line_of(n));
  }
}

inline double parse_finite(const YAML::Node& n, const std::string& field) {
  const double v = parse_number(n, field);
  if (!std::isfinite(v)) throw ConfigParseError(field, "must be finite", line_of(n));
  return v;
}

inline std::size_t parse_count(const YAML::Node& n, const std::string& field, std::size_t min) {
  const double v = parse_finite(n, field);
  if (v < static_cast<double>(min) || v != std::floor(v)) {
    throw ConfigParseError(field, "must be an integer >= " + std::to_string(min), line_of(n));
  }
  return static_cast<std::size_t>(v);
}

inline DotDistance parse_distance(const YAML::Node& n, const std::string& field) {
  const double v = parse_number(n, field);
  if (std::isinf(v) && v > 0) return DotDistance::infinite();
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigParseError(field, "must be > 0 nm or inf", line_of(n));
  }
  return DotDistance::nm(v);
}

inline void parse_material(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "material", {"sigma_e", "sigma_h", "c", "rho", "l_perp", "l_z"});
  const MaterialParams& m = cfg.material;
  double se = m.sigma_e(), sh = m.sigma_h(), c = m.c(), rho = m.rho_kg_per_m3(),
         lp = m.l_perp(), lz = m.l_z();
  if (n["sigma_e"]) se = parse_finite(n["sigma_e"], "material.sigma_e");
  if (n["sigma_h"]) sh = parse_finite(n["sigma_h"], "material.sigma_h");
  auto positive = [&](const char* key, double& target) {
    if (!n[key]) return;
    const std::string field = std::string("material.") + key;
    target = parse_finite(n[key], field);
    if (!(target > 0.0)) throw ConfigParseError(field, "must be > 0", line_of(n[key]));
  };
  positive("c", c);
  positive("rho", rho);
  positive("l_perp", lp);
  positive("l_z", lz);
  cfg.material = MaterialParams::create(se, sh, c, rho, lp, lz);
}

inline void parse_bath(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "bath", {"temperature", "d", "delta_eps", "delta_E"});
  if (n["temperature"]) {
    const double t = parse_finite(n["temperature"], "bath.temperature");
    if (!(t >= 0.0)) {
      throw ConfigParseError("bath.temperature", "must be >= 0 K", line_of(n["temperature"]));
    }
    cfg.bath.temperature_K = t;
  }
  if (n["d"]) cfg.bath.distance = parse_distance(n["d"], "bath.d");
  if (n["delta_eps"] && n["delta_E"]) {
    throw ConfigParseError("bath", "give either delta_eps or delta_E, not both", line_of(n));
  }
  if (n["delta_eps"]) {
    cfg.bath.delta_eps = parse_finite(n["delta_eps"], "bath.delta_eps");
    cfg.target_delta_E.reset();
  }
  if (n["delta_E"]) cfg.target_delta_E = parse_finite(n["delta_E"], "bath.delta_E");
}

inline void parse_initial(const YAML::Node& n, const std::filesystem::path& base_dir,
                          ScenarioConfig& cfg) {
  check_keys(n, "initial", {"pure", "xstate", "matrix"});
  const int variants = (n["pure"] ? 1 : 0) + (n["xstate"] ? 1 : 0) + (n["matrix"] ? 1 : 0);
  if (variants != 1) {
    throw ConfigParseError("initial", "exactly one of pure, xstate, matrix is required",
                           line_of(n));
  }
  InitialState init;
  if (const auto p = n["pure"]) {
    check_keys(p, "initial.pure", {"a", "alpha", "beta"});
    init.kind = InitialState::Kind::Pure;
    if (p["a"]) init.pure.a = parse_finite(p["a"], "initial.pure.a");
    if (p["alpha"]) init.pure.alpha = parse_finite(p["alpha"], "initial.pure.alpha");
    if (p["beta"]) init.pure.beta = parse_finite(p["beta"], "initial.pure.beta");
    if (!(init.pure.a >= 0.0 && init.pure.a <= 0.5)) {
      throw ConfigParseError("initial.pure.a", "must lie in [0, 1/2]", line_of(p["a"]));
    }
  } else if (const auto x = n["xstate"]) {
    check_keys(x, "initial.xstate", {"a", "b", "a_minus_b"});
    init.kind = InitialState::Kind::XState;
    if (x["a_minus_b"]) {
      if (x["a"] || x["b"]) {
        throw ConfigParseError("initial.xstate", "give a_minus_b or a/b, not both", line_of(x));
      }
      const double diff = parse_finite(x["a_minus_b"], "initial.xstate.a_minus_b");
      if (std::abs(diff) > 0.5) {
        throw ConfigParseError("initial.xstate.a_minus_b", "must lie in [-1/2, 1/2]",
                               line_of(x["a_minus_b"]));
      }
      init.x = XStateSpec::from_difference(diff);
    } else {
      if (x["a"]) init.x.a = parse_finite(x["a"], "initial.xstate.a");
      init.x.b = x["b"] ? parse_finite(x["b"], "initial.xstate.b") : 0.5 - init.x.a;
      if (x["a"] && !x["b"]) init.x.b = 0.5 - init.x.a;
      if (x["b"] && !x["a"]) init.x.a = 0.5 - init.x.b;
      try {
        init.x.validate();
      } catch (const InvalidWeight& e) {
        throw ConfigParseError("initial.xstate", e.what(), line_of(x));
      }
    }
  } else {
    const auto m = n["matrix"];
    if (!m.IsScalar()) throw ConfigParseError("initial.matrix", "expected a file path", line_of(m));
    init.kind = InitialState::Kind::Matrix;
    std::filesystem::path path = m.Scalar();
    if (path.is_relative()) path = base_dir / path;
    std::ifstream in(path);
    if (!in) throw ConfigParseError("initial.matrix", "cannot open " + path.string(), line_of(m));
    init.matrix_path = path.string();
    try {
      init.matrix = read_matrix(in);
      TwoQubitState::from_matrix(init.matrix);
    } catch (const InvalidState& e) {
      throw ConfigParseError("initial.matrix", e.what(), line_of(m));
    }
  }
  cfg.initial = init;
}

inline void parse_grid(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "grid", {"t_max", "n_points"});
  if (n["t_max"]) {
    const double t = parse_finite(n["t_max"], "grid.t_max");
    if (!(t >= 0.0)) throw ConfigParseError("grid.t_max", "must be >= 0 ps", line_of(n["t_max"]));
    cfg.grid.t_max = t;
  }
  if (n["n_points"]) cfg.grid.n_points = parse_count(n["n_points"], "grid.n_points", 2);
}

inline void parse_sweep(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "sweep", {"temperature", "d", "a_minus_b", "delta_eps", "delta_E"});
  if (n.size() > 1) throw ConfigParseError("sweep", "sweep exactly one axis", line_of(n));
  cfg.sweeps.clear();
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    const std::string field = "sweep." + key;
    if (!kv.second.IsSequence() || kv.second.size() == 0) {
      throw ConfigParseError(field, "expected a non-empty list", line_of(kv.second));
    }
    Sweep s;
    for (SweepAxis a : {SweepAxis::Temperature, SweepAxis::Distance, SweepAxis::AMinusB,
                        SweepAxis::DeltaEps, SweepAxis::DeltaE}) {
      if (key == axis_name(a)) s.axis = a;
    }
    for (const auto& item : kv.second) {
      double v = parse_number(item, field);
      if (s.axis == SweepAxis::Distance) {
        if (!(v > 0.0) || (std::isinf(v) && v < 0)) {
          throw ConfigParseError(field, "distances must be > 0 nm or inf", line_of(item));
        }
      } else if (!std::isfinite(v)) {
        throw ConfigParseError(field, "values must be finite", line_of(item));
      }
      if (s.axis == SweepAxis::Temperature && v < 0.0) {
        throw ConfigParseError(field, "temperatures must be >= 0 K", line_of(item));
      }
      if (s.axis == SweepAxis::AMinusB && std::abs(v) > 0.5) {
        throw ConfigParseError(field, "|a - b| must be <= 1/2", line_of(item));
      }
      s.values.push_back(v);
    }
    if (s.axis == SweepAxis::AMinusB && cfg.initial.kind != InitialState::Kind::XState) {
      throw ConfigParseError(field, "sweeping a_minus_b needs an xstate initial state",
                             line_of(kv.first));
    }
    cfg.sweeps.push_back(std::move(s));
  }
}

inline void parse_quadrature(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "quadrature", {"tolerance", "n_sigma", "max_panels"});
  if (n["tolerance"]) {
    cfg.quadrature.abs_tolerance = parse_finite(n["tolerance"], "quadrature.tolerance");
    if (!(cfg.quadrature.abs_tolerance > 0.0)) {
      throw ConfigParseError("quadrature.tolerance", "must be > 0", line_of(n["tolerance"]));
    }
  }
  if (n["n_sigma"]) {
    cfg.quadrature.n_sigma = parse_finite(n["n_sigma"], "quadrature.n_sigma");
    if (!(cfg.quadrature.n_sigma > 0.0)) {
      throw ConfigParseError("quadrature.n_sigma", "must be > 0", line_of(n["n_sigma"]));
    }
  }
  if (n["max_panels"]) {
    cfg.quadrature.max_panels = parse_count(n["max_panels"], "quadrature.max_panels", 1);
  }
}

inline void parse_oracle(const YAML::Node& n, ScenarioConfig& cfg) {
  check_keys(n, "oracle", {"enabled", "grid", "restarts"});
  if (n["enabled"]) {
    try {
      cfg.with_oracle = n["enabled"].as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigParseError("oracle.enabled", "expected true or false", line_of(n["enabled"]));
    }
  }
  if (n["grid"]) cfg.oracle.grid = parse_count(n["grid"], "oracle.grid", 2);
  if (n["restarts"]) cfg.oracle.restarts = parse_count(n["restarts"], "oracle.restarts", 1);
}

inline void parse_output(const YAML::Node& n, ScenarioConfig& cfg) {
  if (n.IsScalar()) {
    cfg.output_dir = n.Scalar();
    return;
  }
  check_keys(n, "outputs", {"dir", "plot_scripts"});
  if (n["dir"]) cfg.output_dir = n["dir"].as<std::string>();
  if (n["plot_scripts"]) {
    try {
      cfg.plot_scripts = n["plot_scripts"].as<bool>();
    } catch (const YAML::Exception&) {
      throw ConfigParseError("outputs.plot_scripts", "expected true or false",
                             line_of(n["plot_scripts"]));
    }
  }
}

}  // namespace detail

// Parses YAML text on top of `cfg`. Relative matrix paths resolve against
// base_dir.
inline void apply_config_text(const std::string& text, ScenarioConfig& cfg,
                              const std::filesystem::path& base_dir = ".") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigParseError("", e.msg, e.mark.line >= 0 ? e.mark.line + 1 : -1);
  }
  if (root.IsNull()) return;
  detail::check_keys(root, "config", {"material", "bath", "initial", "grid", "sweep",
                                      "quadrature", "oracle", "outputs"});
  using namespace detail;
  if (root["material"]) parse_material(root["material"], cfg);
  if (root["bath"]) parse_bath(root["bath"], cfg);
  if (root["initial"]) parse_initial(root["initial"], base_dir, cfg);
  if (root["grid"]) parse_grid(root["grid"], cfg);
  if (root["sweep"]) parse_sweep(root["sweep"], cfg);
  if (root["quadrature"]) parse_quadrature(root["quadrature"], cfg);
  if (root["oracle"]) parse_oracle(root["oracle"], cfg);
  if (root["outputs"]) parse_output(root["outputs"], cfg);
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Defaults, then the config file, then the preset (which fixes the physical
// parameters and the case list but keeps grid, quadrature and output
// settings from the file).
inline ScenarioConfig load_config(const std::optional<std::filesystem::path>& path,
                                  const std::optional<std::string>& preset = std::nullopt) {
  ScenarioConfig cfg;
  if (path) {
    apply_config_text(read_text_file(*path), cfg, path->parent_path());
  }
  if (preset) apply_preset(cfg, *preset);
  return cfg;
}

inline ScenarioConfig validate_config(const std::filesystem::path& path) {
  return load_config(path);
}

// ---------------------------------------------------------------------------
// Resolved description (manifest lines)

using KeyValues = std::vector<std::pair<std::string, std::string>>;

inline std::string initial_description(const InitialState& init) {
  switch (init.kind) {
    case InitialState::Kind::Pure:
      return "pure a=" + format_double(init.pure.a) + " alpha=" + format_double(init.pure.alpha) +
             " beta=" + format_double(init.pure.beta);
    case InitialState::Kind::XState:
      return "xstate a=" + format_double(init.x.a) + " b=" + format_double(init.x.b);
    case InitialState::Kind::Matrix: return "matrix " + init.matrix_path;
  }
  return "?";
}

inline KeyValues describe(const ScenarioConfig& cfg) {
  const auto& m = cfg.material;
  KeyValues kv = {
      {"tool_version", tool_version},
      {"preset", cfg.preset.empty() ? "none" : cfg.preset},
      {"constants.hbar_meV_ps", format_double(units::hbar_meV_ps)},
      {"constants.kB_meV_per_K", format_double(units::kB_meV_per_K)},
      {"constants.kg_per_m3_to_meV_ps2_per_nm5", format_double(units::kg_per_m3_to_internal)},
      {"material.sigma_e_meV", format_double(m.sigma_e())},
      {"material.sigma_h_meV", format_double(m.sigma_h())},
      {"material.c_nm_per_ps", format_double(m.c())},
      {"material.rho_kg_per_m3", format_double(m.rho_kg_per_m3())},
      {"material.rho_meV_ps2_per_nm5", format_double(m.rho_internal())},
      {"material.l_perp_nm", format_double(m.l_perp())},
      {"material.l_z_nm", format_double(m.l_z())},
      {"material.coupling_prefactor_nm2", format_double(m.coupling_prefactor())},
      {"grid.t_max_ps", format_double(cfg.grid.t_max)},
      {"grid.n_points", std::to_string(cfg.grid.points().size())},
      {"quadrature.abs_tolerance", format_double(cfg.quadrature.abs_tolerance)},
      {"quadrature.n_sigma", format_double(cfg.quadrature.n_sigma)},
      {"quadrature.max_panels", std::to_string(cfg.quadrature.max_panels)},
      {"oracle.enabled", cfg.with_oracle ? "true" : "false"},
      {"oracle.grid", std::to_string(cfg.oracle.grid)},
      {"oracle.restarts", std::to_string(cfg.oracle.restarts)},
      {"oracle.step_tolerance", format_double(cfg.oracle.step_tolerance)},
      {"outputs.dir", cfg.output_dir},
  };
  const auto cases = cfg.cases();
  kv.emplace_back("cases", std::to_string(cases.size()));
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    const std::string p = "case." + std::to_string(i) + ".";
    kv.emplace_back(p + "label", c.label);
    kv.emplace_back(p + "initial", initial_description(c.initial));
    kv.emplace_back(p + "temperature_K", format_double(c.bath.temperature_K));
    kv.emplace_back(p + "d_nm", c.bath.distance.to_string());
    if (c.target_delta_E) {
      kv.emplace_back(p + "delta_E_target_per_ps", format_double(*c.target_delta_E));
    } else {
      kv.emplace_back(p + "delta_eps_per_ps", format_double(c.bath.delta_eps));
    }
  }
  return kv;
}

inline std::string render(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory evaluation

struct TrajectoryRow {
  KernelSample kernel;
  double delta_E = 0.0;
  DiscordBounds bounds;
  double err_lower = 0.0;
  double err_upper = 0.0;
  double concurrence = 0.0;
  double purity = 0.0;
  std::optional<double> oracle;
  std::optional<double> xstate_concurrence;
  std::optional<double> xstate_discord;
  std::optional<double> err_xstate_discord;
};

namespace detail {

// First-order propagation of the kernel error bounds: each kernel is moved
// by +-err and the largest change of the measure is accumulated.
template <class Measure>
double propagated_error(const KernelSample& k, Measure&& measure) {
  const double base = measure(k);
  double total = 0.0;
  const std::array<std::pair<double KernelSample::*, double KernelSample::*>, 4> fields = {{
      {&KernelSample::A01, &KernelSample::err_A01},
      {&KernelSample::A03, &KernelSample::err_A03},
      {&KernelSample::B01, &KernelSample::err_B01},
      {&KernelSample::B03, &KernelSample::err_B03},
  }};
  for (const auto& [value, error] : fields) {
    const double e = k.*error;
    if (e == 0.0) continue;
    double worst = 0.0;
    for (double sign : {-1.0, 1.0}) {
      KernelSample shifted = k;
      shifted.*value += sign * e;
      worst = std::max(worst, std::abs(measure(shifted) - base));
    }
    total += worst;
  }
  return total;
}

}  // namespace detail

inline TrajectoryRow evaluate_row(const InitialState& init, const TwoQubitState& initial,
                                  const KernelSample& k, double delta_E, bool with_oracle,
                                  const OracleOptions& oracle) {
  TrajectoryRow row;
  row.kernel = k;
  row.delta_E = delta_E;
  const TwoQubitState state = propagate(initial, k);
  row.bounds = discord_bounds(state);
  row.concurrence = wootters_concurrence(state);
  row.purity = state.purity();

  auto bounds_at = [&](const KernelSample& s) { return discord_bounds(propagate(initial, s)); };
  row.err_lower = detail::propagated_error(k, [&](const KernelSample& s) { return bounds_at(s).lower; });
  row.err_upper = detail::propagated_error(k, [&](const KernelSample& s) { return bounds_at(s).upper; });

  if (with_oracle) row.oracle = oracle_discord(state, oracle).value;
  if (init.kind == InitialState::Kind::XState) {
    const cplx g03 = k.coherence_factor(0, 3);
    const cplx g12 = k.coherence_factor(1, 2);
    row.xstate_concurrence = xstate_concurrence(init.x, g03, g12);
    row.xstate_discord = xstate_discord_closed_form(init.x, g03, g12);
    row.err_xstate_discord = detail::propagated_error(k, [&](const KernelSample& s) {
      return xstate_discord_closed_form(init.x, s.coherence_factor(0, 3), s.coherence_factor(1, 2));
    });
  }
  return row;
}

inline std::string csv_header(bool with_oracle, bool xstate) {
  std::string h = "t,B01,B03,B12,A01,A03,deltaE,D_lower,D_upper";
  if (with_oracle) h += ",D_oracle";
  h += ",C_wootters";
  if (xstate) h += ",C_xstate,D_xstate_closed";
  h += ",purity,err_B01,err_B03,err_B12,err_A01,err_A03,err_D_lower,err_D_upper";
  if (xstate) h += ",err_D_xstate_closed";
  return h + "\n";
}

inline std::string csv_row(const TrajectoryRow& r) {
  const auto& k = r.kernel;
  std::vector<double> v = {k.t, k.B01, k.B03, k.B12(), k.A01, k.A03, r.delta_E,
                           r.bounds.lower, r.bounds.upper};
  if (r.oracle) v.push_back(*r.oracle);
  v.push_back(r.concurrence);
  if (r.xstate_discord) {
    v.push_back(*r.xstate_concurrence);
    v.push_back(*r.xstate_discord);
  }
  for (double x : {r.purity, k.err_B01, k.err_B03, k.err_B12(), k.err_A01, k.err_A03,
                   r.err_lower, r.err_upper}) {
    v.push_back(x);
  }
  if (r.err_xstate_discord) v.push_back(*r.err_xstate_discord);
  std::string line;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) line += ',';
    line += format_double(v[i]);
  }
  return line + "\n";
}

inline std::string kernels_header() {
  return "t,B01,B03,B12,A01,A03,deltaE,err_B01,err_B03,err_B12,err_A01,err_A03,err_deltaE\n";
}

inline std::string kernels_row(const KernelSample& k, double delta_E, double delta_E_error) {
  std::string line;
  const double v[] = {k.t, k.B01, k.B03, k.B12(), k.A01, k.A03, delta_E,
                      k.err_B01, k.err_B03, k.err_B12(), k.err_A01, k.err_A03, delta_E_error};
  for (std::size_t i = 0; i < std::size(v); ++i) {
    if (i) line += ',';
    line += format_double(v[i]);
  }
  return line + "\n";
}

inline std::string plot_script(const std::string& csv_name, bool xstate) {
  std::string s;
  s += "# gnuplot -p " + csv_name.substr(0, csv_name.size() - 4) + ".gp\n";
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead\n";
  s += "set xlabel 't (ps)'\n";
  s += "set ylabel 'geometric discord'\n";
  s += "plot '" + csv_name + "' using 't':'D_lower' with lines, \\\n";
  s += "     '" + csv_name + "' using 't':'D_upper' with lines dashtype 2";
  if (xstate) s += ", \\\n     '" + csv_name + "' using 't':'D_xstate_closed' with lines dashtype 3";
  return s + "\n";
}

struct CaseResult {
  ScenarioCase scenario;
  double delta_E = 0.0;
  double delta_E_error = 0.0;
  std::vector<TrajectoryRow> rows;
};

// Kernels depend only on the bath (material, quadrature and grid are shared
// by every case of a run), so cases that differ only in the initial state
// reuse one table.
class KernelCache {
 public:
  KernelCache(const ScenarioConfig& cfg, std::vector<double> grid)
      : cfg_(cfg), grid_(std::move(grid)) {}

  const DephasingKernels& get(const BathConfig& bath) {
    const Key key{bath.temperature_K, bath.distance.to_string(), bath.delta_eps};
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      const PhononKernel kernel(cfg_.material, bath, cfg_.quadrature);
      it = cache_.emplace(key, kernels_on_grid(grid_, kernel, cfg_.threads)).first;
    }
    return it->second;
  }

  const std::vector<double>& grid() const { return grid_; }

 private:
  using Key = std::tuple<double, std::string, double>;
  const ScenarioConfig& cfg_;
  std::vector<double> grid_;
  std::map<Key, DephasingKernels> cache_;
};

// Resolves a target renormalized shift into the bare one.
inline BathConfig resolve_bath(const ScenarioCase& c, const ScenarioConfig& cfg) {
  BathConfig bath = c.bath;
  if (c.target_delta_E) {
    bath.delta_eps = delta_eps_for_target(*c.target_delta_E, cfg.material, bath, cfg.quadrature);
  }
  return bath;
}

inline std::vector<CaseResult> compute_scenario(const ScenarioConfig& cfg) {
  cfg.quadrature.validate();
  const auto grid = cfg.grid.points();
  KernelCache cache(cfg, grid);
  std::vector<CaseResult> results;
  for (const auto& c : cfg.cases()) {
    CaseResult res;
    res.scenario = c;
    res.scenario.bath = resolve_bath(c, cfg);
    const auto& table = cache.get(res.scenario.bath);
    res.delta_E = table.delta_E;
    res.delta_E_error = table.delta_E_error;
    const TwoQubitState initial = c.initial.state();
    res.rows.resize(table.size());
    parallel_for(table.size(), cfg.threads, [&](std::size_t i) {
      res.rows[i] = evaluate_row(c.initial, initial, table[i], table.delta_E, cfg.with_oracle,
                                 cfg.oracle);
    });
    results.push_back(std::move(res));
  }
  return results;
}

inline std::string case_file_stem(const ScenarioConfig& cfg, const ScenarioCase& c) {
  return (cfg.preset.empty() ? std::string("run") : cfg.preset) + "_" + c.label;
}

struct RunSummary {
  std::vector<std::filesystem::path> files;
  std::vector<CaseResult> cases;
};

namespace detail {

// Writes every file under a temporary name first and renames at the end;
// on any failure the files written so far are removed.
class StagedWriter {
 public:
  explicit StagedWriter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  StagedWriter(const StagedWriter&) = delete;
  StagedWriter& operator=(const StagedWriter&) = delete;
  ~StagedWriter() {
    if (!committed_) {
      std::error_code ec;
      for (const auto& p : staged_) std::filesystem::remove(p, ec);
    }
  }

  void add(const std::string& name, const std::string& content) {
    const auto tmp = dir_ / (name + ".partial");
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    staged_.push_back(tmp);
    out << content;
    out.close();
    if (!out) throw IoError("failed writing " + tmp.string());
    names_.push_back(name);
  }

  std::vector<std::filesystem::path> commit() {
    std::vector<std::filesystem::path> out;
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto final_path = dir_ / names_[i];
      std::error_code ec;
      std::filesystem::rename(staged_[i], final_path, ec);
      if (ec) throw IoError("cannot rename to " + final_path.string() + ": " + ec.message());
      staged_[i] = final_path;
      out.push_back(final_path);
    }
    committed_ = true;
    return out;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::filesystem::path> staged_;
  std::vector<std::string> names_;
  bool committed_ = false;
};

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory " + dir.string());
  }
}

}  // namespace detail

inline std::string manifest_text(const ScenarioConfig& cfg, const std::vector<CaseResult>& results,
                                 const std::vector<std::string>& files) {
  KeyValues kv = describe(cfg);
  for (std::size_t i = 0; i < results.size(); ++i) {
    const std::string p = "result." + std::to_string(i) + ".";
    kv.emplace_back(p + "label", results[i].scenario.label);
    kv.emplace_back(p + "delta_eps_per_ps", format_double(results[i].scenario.bath.delta_eps));
    kv.emplace_back(p + "delta_E_per_ps", format_double(results[i].delta_E));
    kv.emplace_back(p + "delta_E_error", format_double(results[i].delta_E_error));
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    kv.emplace_back("file." + std::to_string(i), files[i]);
  }
  return render(kv);
}

// Full run: trajectories, CSVs, plot scripts and manifest.txt. Nothing is
// left behind in the output directory if the run fails.
inline RunSummary run_scenario(const ScenarioConfig& cfg) {
  RunSummary summary;
  summary.cases = compute_scenario(cfg);

  const std::filesystem::path dir = cfg.output_dir;
  detail::ensure_dir(dir);
  detail::StagedWriter writer(dir);
  std::vector<std::string> names;
  for (const auto& res : summary.cases) {
    const bool xstate = res.scenario.initial.kind == InitialState::Kind::XState;
    const std::string stem = case_file_stem(cfg, res.scenario);
    std::string csv = csv_header(cfg.with_oracle, xstate);
    for (const auto& row : res.rows) csv += csv_row(row);
    writer.add(stem + ".csv", csv);
    names.push_back(stem + ".csv");
    if (cfg.plot_scripts) {
      writer.add(stem + ".gp", plot_script(stem + ".csv", xstate));
      names.push_back(stem + ".gp");
    }
  }
  writer.add("manifest.txt", manifest_text(cfg, summary.cases, names));
  summary.files = writer.commit();
  return summary;
}

// Kernels-only tables, one CSV per distinct bath setting of the run.
inline std::vector<std::filesystem::path> run_kernels(const ScenarioConfig& cfg) {
  const auto grid = cfg.grid.points();
  KernelCache cache(cfg, grid);
  const std::filesystem::path dir = cfg.output_dir;
  std::vector<std::pair<std::string, std::string>> outputs;
  std::set<std::string> seen;
  std::vector<CaseResult> resolved;
  for (const auto& c : cfg.cases()) {
    const BathConfig bath = resolve_bath(c, cfg);
    const std::string stem = (cfg.preset.empty() ? std::string("kernels") : cfg.preset + "_kernels") +
                             "_T-" + format_label(bath.temperature_K) + "_d-" +
                             (bath.distance.is_infinite() ? std::string("inf")
                                                          : format_label(bath.distance.nm_value())) +
                             "_deps-" + format_label(bath.delta_eps);
    if (!seen.insert(stem).second) continue;
    const auto& table = cache.get(bath);
    std::string csv = kernels_header();
    for (const auto& s : table.samples) csv += kernels_row(s, table.delta_E, table.delta_E_error);
    outputs.emplace_back(stem + ".csv", csv);
  }
  detail::ensure_dir(dir);
  detail::StagedWriter writer(dir);
  for (const auto& [name, content] : outputs) writer.add(name, content);
  return writer.commit();
}

}  // namespace dotdiscord
