// Acceptance checks 1-11. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../test_support.hpp"
#include "dotdiscord/scenario.hpp"

using namespace dotdiscord;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

char buf[512];

template <class... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Table = std::map<std::string, std::vector<double>>;

Table read_csv(const fs::path& path) {
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> names;
  {
    std::istringstream h(line);
    for (std::string n; std::getline(h, n, ',');) names.push_back(n);
  }
  Table t;
  while (std::getline(in, line)) {
    std::istringstream r(line);
    std::size_t i = 0;
    for (std::string v; std::getline(r, v, ','); ++i) t[names.at(i)].push_back(std::stod(v));
  }
  return t;
}

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("dotdiscord_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

ScenarioConfig preset_config(const std::string& name, const fs::path& out, double tolerance) {
  ScenarioConfig cfg;
  apply_preset(cfg, name);
  cfg.output_dir = out.string();
  cfg.quadrature.abs_tolerance = tolerance;
  cfg.plot_scripts = false;
  return cfg;
}

// Preset runs shared by several criteria.
struct PresetRuns {
  fs::path fig1_dir = scratch("fig1");
  fs::path fig1_half_dir = scratch("fig1_half");
  fs::path fig2_dir = scratch("fig2");
  bool fig1_done = false;
  bool fig1_half_done = false;
  bool fig2_done = false;

  const fs::path& fig1() {
    if (!fig1_done) run_scenario(preset_config("fig1", fig1_dir, 1e-8));
    fig1_done = true;
    return fig1_dir;
  }
  const fs::path& fig1_half() {
    if (!fig1_half_done) run_scenario(preset_config("fig1", fig1_half_dir, 0.5e-8));
    fig1_half_done = true;
    return fig1_half_dir;
  }
  const fs::path& fig2() {
    if (!fig2_done) run_scenario(preset_config("fig2", fig2_dir, 1e-8));
    fig2_done = true;
    return fig2_dir;
  }
  ~PresetRuns() {
    std::error_code ec;
    for (const auto& d : {fig1_dir, fig1_half_dir, fig2_dir}) fs::remove_all(d, ec);
  }
};

PresetRuns runs;

// 1. Bell states from the pure-state family endpoints.
Outcome bell_states() {
  const std::vector<PureStateSpec> specs = {
      {0.0, 0.0, 0.0}, {0.0, units::pi, 0.0}, {0.5, 0.0, 0.0}, {0.5, units::pi, 0.0}};
  double worst = 0.0;
  for (const auto& spec : specs) {
    const auto s = make_pure_state(spec);
    const auto d = discord_bounds(s);
    const double o = oracle_discord(s).value;
    worst = std::max({worst, std::abs(d.lower - 0.5), std::abs(d.upper - 0.5), std::abs(o - 0.5)});
  }
  return {worst <= 1e-8, fmt("max |D - 1/2| = %.3e over lower, upper, oracle", worst)};
}

// 2. Bell-diagonal endpoints decay as (1/2) exp(2 B_ij).
Outcome bell_diagonal_decay() {
  std::vector<double> grid(200);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 10.0 * i / 199.0;
  const auto table = kernels_on_grid(grid, MaterialParams::gaas(),
                                     BathConfig{77.0, DotDistance::nm(6.0), 0.0});
  double worst = 0.0;
  for (double a : {0.0, 0.5}) {
    const auto initial = make_pure_state({a, 0.0, 0.0});
    for (const auto& k : table.samples) {
      const double b = a == 0.0 ? k.B12() : k.B03;
      const double expected = 0.5 * std::exp(2.0 * b);
      const auto d = discord_bounds(propagate(initial, k));
      worst = std::max({worst, std::abs(d.lower - expected) / expected,
                        std::abs(d.upper - expected) / expected});
    }
  }
  return {worst <= 1e-8, fmt("max relative deviation %.3e (d = 6 nm, 200 points)", worst)};
}

// 3. X-state closed form against bounds and oracle.
Outcome xstate_consistency() {
  std::mt19937_64 rng(301);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double bracket = 0.0;
  double oracle_gap = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = 0.5 * u(rng);
    const XStateSpec spec{a, 0.5 - a};
    const cplx g03 = std::polar(u(rng), 2.0 * units::pi * u(rng));
    const cplx g12 = std::polar(u(rng), 2.0 * units::pi * u(rng));
    const auto s = make_x_state(spec, g03, g12);
    const auto d = discord_bounds(s);
    const double closed = xstate_discord_closed_form(spec, g03, g12);
    bracket = std::max({bracket, d.lower - closed, closed - d.upper});
    if (i % 20 == 0) oracle_gap = std::max(oracle_gap, std::abs(oracle_discord(s).value - closed));
  }
  return {bracket <= 1e-9 && oracle_gap <= 1e-6,
          fmt("bracket violation %.3e, oracle vs closed form %.3e (50 cases)", bracket, oracle_gap)};
}

double regime_indicator(const Table& t, std::size_t i, double a, double b) {
  return std::abs(a - b) - (a * std::exp(t.at("B03")[i]) + b * std::exp(t.at("B12")[i]));
}

int sign_changes(const Table& t, double a, double b) {
  int changes = 0;
  const std::size_t n = t.at("t").size();
  for (std::size_t i = 1; i < n; ++i) {
    const double prev = regime_indicator(t, i - 1, a, b);
    const double cur = regime_indicator(t, i, a, b);
    if ((prev < 0.0) != (cur < 0.0)) ++changes;
  }
  return changes;
}

// 4. Regime switch for |a - b| = 0.3 at d = inf, none for a = b.
Outcome decay_transition() {
  const auto dir = runs.fig1();
  const Table t03 = read_csv(dir / "fig1_d-inf_ab-0.3.csv");
  const Table t015 = read_csv(dir / "fig1_d-inf_ab-0.15.csv");
  const Table t0 = read_csv(dir / "fig1_d-inf_ab-0.csv");
  const int switches03 = sign_changes(t03, 0.4, 0.1);
  const int switches0 = sign_changes(t0, 0.25, 0.25);
  double min_discord = 1.0;
  for (const Table* t : {&t03, &t015}) {
    const auto& tt = t->at("t");
    const auto& d = t->at("D_xstate_closed");
    const auto& lo = t->at("D_lower");
    for (std::size_t i = 0; i < tt.size(); ++i) min_discord = std::min({min_discord, d[i], lo[i]});
  }
  return {switches03 == 1 && switches0 == 0 && min_discord > 0.0,
          fmt("switches: %d for |a-b| = 0.3, %d for |a-b| = 0; min discord for |a-b| > 0: %.3e",
              switches03, switches0, min_discord)};
}

// 5. a = b = 1/4 develops discord around the transit time only at finite d.
// B03 - 2 B01 rises as a step to a plateau, so the window is centred on the
// steepest part of the step.
Outcome interference_enhancement() {
  const auto dir = runs.fig1();
  const Table fin = read_csv(dir / "fig1_d-6_ab-0.csv");
  const Table inf = read_csv(dir / "fig1_d-inf_ab-0.csv");
  const auto& t = fin.at("t");
  auto deviation = [&](std::size_t i) { return fin.at("B03")[i] - 2.0 * fin.at("B01")[i]; };
  std::size_t steepest = 1;
  double best_rate = 0.0;
  for (std::size_t i = 1; i < t.size(); ++i) {
    const double rate = std::abs(deviation(i) - deviation(i - 1)) / (t[i] - t[i - 1]);
    if (rate > best_rate) {
      best_rate = rate;
      steepest = i;
    }
  }
  const double t_step = 0.5 * (t[steepest] + t[steepest - 1]);
  double window_max = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - t_step) <= 1.0) window_max = std::max(window_max, fin.at("D_lower")[i]);
  }
  double inf_max = 0.0;
  for (double v : inf.at("D_upper")) inf_max = std::max(inf_max, v);
  const double transit = 6.0 / MaterialParams::gaas().c();
  return {window_max > 1e-6 && inf_max < 1e-10,
          fmt("B03 - 2 B01 changes fastest at t = %.3f ps (d/c = %.3f ps); max D_lower within "
              "1 ps: %.3e; d = inf max D_upper: %.3e",
              t_step, transit, window_max, inf_max)};
}

// 6. B03 - 2 B01 away from the transit window at d = 500 nm.
Outcome large_distance_limit() {
  const auto material = MaterialParams::gaas();
  const double d = 500.0;
  const double transit = d / material.c();
  const std::vector<double> grid = {1.0, 5.0, 20.0, 50.0, 80.0, 90.0, 94.0, 102.0, 106.0, 120.0};
  const PhononKernel finite(material, BathConfig{77.0, DotDistance::nm(d), 0.0});
  const PhononKernel symbolic(material, BathConfig{77.0, DotDistance::infinite(), 0.0});
  const auto table = kernels_on_grid(grid, finite);
  double max_b01 = 0.0;
  for (const auto& s : table.samples) max_b01 = std::max(max_b01, std::abs(s.B01));
  double worst = 0.0;
  double worst_t = 0.0;
  for (const auto& s : table.samples) {
    if (std::abs(s.t - transit) <= 2.0) continue;
    const double dev = std::abs(s.B03 - 2.0 * s.B01);
    if (dev > worst) {
      worst = dev;
      worst_t = s.t;
    }
  }
  bool symbolic_exact = true;
  for (double t : grid) {
    const auto s = symbolic.evaluate(t);
    symbolic_exact = symbolic_exact && s.B03 == 2.0 * s.B01;
  }
  const double ratio = worst / max_b01;
  return {ratio < 1e-4 && symbolic_exact,
          fmt("max |B03 - 2 B01| / max |B01| = %.3e at t = %.0f ps (T = 77 K, transit %.1f ps); "
              "d = inf exact: %s",
              ratio, worst_t, transit, symbolic_exact ? "yes" : "no")};
}

// 7. Classes with coinciding bounds.
Outcome bound_coincidence() {
  std::mt19937_64 rng(701);
  double pure = 0.0, bell = 0.0, zero = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto gap = [](const TwoQubitState& s) {
      const auto d = discord_bounds(s);
      return std::abs(d.upper - d.lower);
    };
    pure = std::max(pure, gap(fixtures::random_pure_state(rng)));
    bell = std::max(bell, gap(fixtures::random_bell_diagonal(rng)));
    zero = std::max(zero, gap(fixtures::random_zero_local_bloch(rng)));
  }
  return {pure < 1e-9 && bell < 1e-9 && zero < 1e-9,
          fmt("max gap: pure %.3e, Bell-diagonal %.3e, x = y = 0 %.3e", pure, bell, zero)};
}

// 8. Oracle bracketed by the bounds.
Outcome bracketing() {
  std::mt19937_64 rng(801);
  double below = -1.0, above = -1.0;
  for (int i = 0; i < 500; ++i) {
    const auto s = fixtures::random_state(rng);
    const auto d = discord_bounds(s);
    const double o = oracle_discord(s).value;
    below = std::max(below, d.lower - o);
    above = std::max(above, o - d.upper);
  }
  return {below <= 1e-6 && above <= 1e-6,
          fmt("max (lower - oracle) = %.3e, max (oracle - upper) = %.3e", below, above)};
}

// 9. Local-unitary invariance.
Outcome local_unitary_invariance() {
  std::mt19937_64 rng(901);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto s = fixtures::random_state(rng);
    const auto r = s.locally_rotated(fixtures::random_unitary(rng), fixtures::random_unitary(rng));
    const auto a = discord_bounds(s);
    const auto b = discord_bounds(r);
    worst = std::max({worst, std::abs(a.lower - b.lower), std::abs(a.upper - b.upper)});
  }
  return {worst < 1e-9, fmt("max change %.3e", worst)};
}

// 10. Oscillation with the biexcitonic shift.
Outcome biexcitonic_oscillation() {
  const auto dir = runs.fig2();
  const Table shifted = read_csv(dir / "fig2_T-77_dE-6.csv");
  const Table reference = read_csv(dir / "fig2_T-77_dE-0.csv");
  const auto& t = shifted.at("t");
  const double node = units::pi / 6.0;
  double near_min = 1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - node) <= 0.15) near_min = std::min(near_min, shifted.at("D_upper")[i]);
  }
  const double initial = shifted.at("D_upper")[0];
  std::size_t above = 0;
  double first_above = -1.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (shifted.at("D_lower")[i] > reference.at("D_lower")[i] + 1e-9) {
      if (above == 0) first_above = t[i];
      ++above;
    }
  }
  return {near_min < 0.1 * initial && above > 0,
          fmt("min D_upper within 0.15 ps of pi/dE: %.3e (D(0) = %.3e); %zu grid points with "
              "D_lower above the dE = 0 curve, first at t = %.2f ps",
              near_min, initial, above, first_above)};
}

// 11. Halving the quadrature tolerance stays within the reported errors.
Outcome quadrature_robustness() {
  const auto& base = runs.fig1();
  const auto& half = runs.fig1_half();
  const std::vector<std::pair<std::string, std::string>> columns = {
      {"B01", "err_B01"},         {"B03", "err_B03"},         {"B12", "err_B12"},
      {"A01", "err_A01"},         {"A03", "err_A03"},         {"D_lower", "err_D_lower"},
      {"D_upper", "err_D_upper"}, {"D_xstate_closed", "err_D_xstate_closed"}};
  std::size_t checked = 0, violations = 0;
  double worst_ratio = 0.0;
  for (const auto& entry : fs::directory_iterator(base)) {
    if (entry.path().extension() != ".csv") continue;
    const Table a = read_csv(entry.path());
    const Table b = read_csv(half / entry.path().filename());
    for (const auto& [value, error] : columns) {
      for (std::size_t i = 0; i < a.at(value).size(); ++i) {
        const double change = std::abs(a.at(value)[i] - b.at(value)[i]);
        const double bound = a.at(error)[i];
        ++checked;
        const bool ok = bound > 0.0 ? change < bound : change == 0.0;
        if (!ok) ++violations;
        if (bound > 0.0) worst_ratio = std::max(worst_ratio, change / bound);
      }
    }
  }
  return {violations == 0 && checked > 0,
          fmt("%zu values checked, %zu violations, max change / error bound = %.3f", checked,
              violations, worst_ratio)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"bell-state discord", bell_states},
      {"bell-diagonal decay law", bell_diagonal_decay},
      {"x-state closed-form consistency", xstate_consistency},
      {"decay-type transition", decay_transition},
      {"interference enhancement", interference_enhancement},
      {"infinite-distance kernel limit", large_distance_limit},
      {"bound-coincidence classes", bound_coincidence},
      {"bracketing suite", bracketing},
      {"local-unitary invariance", local_unitary_invariance},
      {"biexcitonic-shift oscillation", biexcitonic_oscillation},
      {"quadrature robustness", quadrature_robustness},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
