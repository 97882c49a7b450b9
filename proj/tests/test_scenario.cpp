#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dotdiscord/scenario.hpp"

using namespace dotdiscord;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            (std::string("dotdiscord_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path_ / name) << text;
    return path_ / name;
  }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) { return read_text_file(p); }

ScenarioConfig parse(const std::string& text) {
  ScenarioConfig cfg;
  apply_config_text(text, cfg);
  return cfg;
}

ConfigParseError parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigParseError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigParseError for:\n" << text;
  return ConfigParseError("", "");
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DOTDISCORD_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST(Config, EmptyFileResolvesToDefaults) {
  const auto cfg = parse("");
  EXPECT_EQ(cfg.material, MaterialParams::gaas());
  EXPECT_EQ(cfg.bath.temperature_K, 77.0);
  EXPECT_EQ(cfg.bath.distance, DotDistance::nm(6.0));
  EXPECT_EQ(cfg.bath.delta_eps, 0.0);
  EXPECT_EQ(cfg.grid.t_max, 10.0);
  EXPECT_EQ(cfg.grid.n_points, 201u);
  EXPECT_EQ(cfg.quadrature, QuadratureConfig{});
  EXPECT_FALSE(cfg.with_oracle);
  EXPECT_EQ(cfg.cases().size(), 1u);
}

TEST(Config, FullFile) {
  const auto cfg = parse(R"(
material: {sigma_e: 7000, sigma_h: -500, c: 4.8, rho: 5300, l_perp: 4, l_z: 1.5}
bath: {temperature: 3, d: inf, delta_E: 6}
initial:
  xstate: {a: 0.4}
grid: {t_max: 5, n_points: 11}
sweep:
  a_minus_b: [0, 0.3]
quadrature: {tolerance: 1e-7, n_sigma: 6, max_panels: 500}
oracle: {enabled: true, grid: 8, restarts: 2}
outputs: {dir: results, plot_scripts: false}
)");
  EXPECT_EQ(cfg.material.sigma_e(), 7000.0);
  EXPECT_EQ(cfg.material.l_z(), 1.5);
  EXPECT_TRUE(cfg.bath.distance.is_infinite());
  EXPECT_EQ(cfg.target_delta_E, 6.0);
  EXPECT_EQ(cfg.initial.kind, InitialState::Kind::XState);
  EXPECT_DOUBLE_EQ(cfg.initial.x.b, 0.1);
  EXPECT_EQ(cfg.grid.points().size(), 11u);
  EXPECT_EQ(cfg.quadrature.max_panels, 500u);
  EXPECT_TRUE(cfg.with_oracle);
  EXPECT_EQ(cfg.oracle.grid, 8u);
  EXPECT_EQ(cfg.output_dir, "results");
  EXPECT_FALSE(cfg.plot_scripts);
  const auto cases = cfg.cases();
  ASSERT_EQ(cases.size(), 2u);
  EXPECT_EQ(cases[1].label, "ab-0.3");
  EXPECT_DOUBLE_EQ(cases[1].initial.x.a, 0.4);
  EXPECT_EQ(cases[1].target_delta_E, 6.0);
}

TEST(Config, InfiniteDistanceIsSymbolic) {
  EXPECT_TRUE(parse("bath: {d: inf}").bath.distance.is_infinite());
  EXPECT_TRUE(parse("bath:\n  d: \"inf\"\n").bath.distance.is_infinite());
}

TEST(Config, NegativeTemperatureNamesTheField) {
  const auto e = parse_error("grid: {t_max: 1}\nbath:\n  temperature: -1\n");
  EXPECT_EQ(e.field(), "bath.temperature");
  EXPECT_EQ(e.line(), 3);
  EXPECT_NE(std::string(e.what()).find("bath.temperature"), std::string::npos);
}

TEST(Config, FieldLevelDiagnostics) {
  EXPECT_EQ(parse_error("bath: {temprature: 3}").field(), "bath.temprature");
  EXPECT_EQ(parse_error("grid: {n_points: 1}").field(), "grid.n_points");
  EXPECT_EQ(parse_error("grid: {t_max: abc}").field(), "grid.t_max");
  EXPECT_EQ(parse_error("bath: {d: 0}").field(), "bath.d");
  EXPECT_EQ(parse_error("sweep: {temperature: [3, .nan]}").field(), "sweep.temperature");
  EXPECT_EQ(parse_error("sweep: {temperature: [3], d: [6]}").field(), "sweep");
  EXPECT_EQ(parse_error("initial: {pure: {a: 0.1}, xstate: {a: 0.2}}").field(), "initial");
  EXPECT_EQ(parse_error("initial: {pure: {a: 0.7}}").field(), "initial.pure.a");
  EXPECT_EQ(parse_error("sweep: {a_minus_b: [0.1]}").field(), "sweep.a_minus_b");
  EXPECT_EQ(parse_error("material: {c: -5}").field(), "material.c");
  EXPECT_EQ(parse_error("quadrature: {tolerance: 0}").field(), "quadrature.tolerance");
  EXPECT_EQ(parse_error("colour: blue").field(), "config.colour");
  EXPECT_EQ(parse_error("bath: [1, 2").line(), 1);
}

TEST(Config, MatrixFileRelativeToConfig) {
  TempDir dir;
  dir.write("rho.txt", "0.5,0 0,0 0,0 0.5,0\n0,0 0,0 0,0 0,0\n0,0 0,0 0,0 0,0\n0.5,0 0,0 0,0 0.5,0\n");
  const auto path = dir.write("c.yaml", "initial: {matrix: rho.txt}\n");
  const auto cfg = load_config(path);
  EXPECT_EQ(cfg.initial.kind, InitialState::Kind::Matrix);
  EXPECT_NEAR(cfg.initial.state().purity(), 1.0, 1e-15);

  const auto bad = dir.write("bad.yaml", "initial: {matrix: missing.txt}\n");
  EXPECT_THROW(load_config(bad), ConfigParseError);
}

TEST(Presets, Fig1ResolvesToSixCases) {
  ScenarioConfig cfg = parse("grid: {t_max: 4, n_points: 9}\nbath: {temperature: 3}");
  apply_preset(cfg, "fig1");
  EXPECT_EQ(cfg.material, MaterialParams::gaas());
  EXPECT_EQ(cfg.grid.t_max, 4.0);
  const auto cases = cfg.cases();
  ASSERT_EQ(cases.size(), 6u);
  for (const auto& c : cases) {
    EXPECT_EQ(c.bath.temperature_K, 77.0);
    EXPECT_EQ(c.bath.delta_eps, 0.0);
    EXPECT_EQ(c.initial.kind, InitialState::Kind::XState);
    EXPECT_DOUBLE_EQ(c.initial.x.a + c.initial.x.b, 0.5);
  }
  EXPECT_TRUE(cases[0].bath.distance.is_infinite());
  EXPECT_EQ(cases[3].bath.distance, DotDistance::nm(6.0));
  EXPECT_DOUBLE_EQ(cases[2].initial.x.a - cases[2].initial.x.b, 0.3);
  EXPECT_DOUBLE_EQ(cases[1].initial.x.a - cases[1].initial.x.b, 0.15);
  EXPECT_EQ(cases[0].initial.x.a, cases[0].initial.x.b);
}

TEST(Presets, Fig2ResolvesToThreeCases) {
  ScenarioConfig cfg;
  apply_preset(cfg, "fig2");
  const auto cases = cfg.cases();
  ASSERT_EQ(cases.size(), 3u);
  EXPECT_EQ(cases[0].bath.temperature_K, 3.0);
  EXPECT_EQ(cases[1].bath.temperature_K, 77.0);
  EXPECT_EQ(cases[2].bath.temperature_K, 77.0);
  EXPECT_EQ(cases[0].target_delta_E, 0.0);
  EXPECT_EQ(cases[2].target_delta_E, 6.0);
  for (const auto& c : cases) {
    EXPECT_EQ(c.initial.kind, InitialState::Kind::Pure);
    EXPECT_EQ(c.initial.pure.a, 0.25);
    EXPECT_EQ(c.bath.distance, DotDistance::nm(6.0));
  }
  const BathConfig b = resolve_bath(cases[2], cfg);
  EXPECT_NEAR(PhononKernel(cfg.material, b, cfg.quadrature).delta_E(), 6.0, 1e-12);
}

TEST(Presets, UnknownNameIsAConfigError) {
  ScenarioConfig cfg;
  EXPECT_THROW(apply_preset(cfg, "fig3"), ConfigParseError);
}

TEST(Run, TimeZeroGridGivesInitialValues) {
  TempDir dir;
  ScenarioConfig cfg = parse("grid: {t_max: 0}\ninitial: {pure: {a: 0.1}}\n");
  cfg.output_dir = dir.path().string();
  const auto summary = run_scenario(cfg);
  const auto csv = lines(slurp(dir.path() / "run_base.csv"));
  ASSERT_EQ(csv.size(), 2u);
  EXPECT_EQ(csv[0].rfind("t,B01,B03,B12,A01,A03,deltaE,D_lower,D_upper,C_wootters,purity", 0), 0u);
  const auto d = discord_bounds(make_pure_state({0.1, 0.0, 0.0}));
  const auto& row = summary.cases[0].rows[0];
  EXPECT_EQ(row.bounds.lower, d.lower);
  EXPECT_EQ(row.bounds.upper, d.upper);
  EXPECT_NE(csv[1].find(format_double(d.lower)), std::string::npos);
  EXPECT_TRUE(fs::exists(dir.path() / "manifest.txt"));
  EXPECT_TRUE(fs::exists(dir.path() / "run_base.gp"));
}

TEST(Run, CsvFormat) {
  TempDir dir;
  ScenarioConfig cfg = parse("grid: {t_max: 1, n_points: 3}\nbath: {d: inf}\n"
                             "initial: {xstate: {a_minus_b: 0.2}}\n");
  cfg.output_dir = dir.path().string();
  run_scenario(cfg);
  const std::string text = slurp(dir.path() / "run_base.csv");
  EXPECT_EQ(text.find('\r'), std::string::npos);
  EXPECT_EQ(text.back(), '\n');
  const auto rows = lines(text);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NE(rows[0].find("C_xstate,D_xstate_closed"), std::string::npos);
  const auto count = [](const std::string& s) { return std::count(s.begin(), s.end(), ','); };
  for (const auto& r : rows) EXPECT_EQ(count(r), count(rows[0]));
  EXPECT_EQ(rows[2].substr(0, 4), "0.5,");
  // 17 significant digits round-trip every value.
  std::istringstream fields(rows[2]);
  std::string field;
  std::getline(fields, field, ',');
  std::getline(fields, field, ',');
  const double b01 = std::stod(field);
  EXPECT_EQ(format_double(b01), field);
}

TEST(Run, DeterministicAcrossRunsAndThreads) {
  TempDir dir;
  const std::string text = "grid: {t_max: 2, n_points: 6}\nsweep: {temperature: [0, 77]}\n";
  ScenarioConfig a = parse(text);
  a.output_dir = (dir.path() / "a").string();
  ScenarioConfig b = parse(text);
  b.output_dir = (dir.path() / "b").string();
  b.threads = 3;
  run_scenario(a);
  run_scenario(b);
  for (const char* name : {"run_T-0.csv", "run_T-77.csv"}) {
    EXPECT_EQ(slurp(dir.path() / "a" / name), slurp(dir.path() / "b" / name)) << name;
  }
}

TEST(Run, ManifestRecordsConstantsAndTolerances) {
  TempDir dir;
  ScenarioConfig cfg = parse("grid: {t_max: 0}\n");
  cfg.output_dir = dir.path().string();
  run_scenario(cfg);
  const std::string m = slurp(dir.path() / "manifest.txt");
  for (const char* key :
       {"tool_version = ", "constants.hbar_meV_ps = ", "constants.kB_meV_per_K = ",
        "material.rho_meV_ps2_per_nm5 = ", "quadrature.abs_tolerance = ", "quadrature.n_sigma = ",
        "quadrature.max_panels = ", "oracle.step_tolerance = ", "case.0.d_nm = 6",
        "result.0.delta_E_per_ps = ", "file.0 = run_base.csv"}) {
    EXPECT_NE(m.find(key), std::string::npos) << key;
  }
  for (const auto& l : lines(m)) EXPECT_NE(l.find(" = "), std::string::npos) << l;
}

TEST(Run, OracleColumnOnRequest) {
  TempDir dir;
  ScenarioConfig cfg = parse("grid: {t_max: 1, n_points: 2}\nbath: {d: inf}\n"
                             "oracle: {enabled: true, grid: 8}\n");
  cfg.output_dir = dir.path().string();
  const auto s = run_scenario(cfg);
  EXPECT_NE(slurp(dir.path() / "run_base.csv").find(",D_oracle,"), std::string::npos);
  for (const auto& r : s.cases[0].rows) {
    EXPECT_LE(r.bounds.lower, *r.oracle + 1e-6);
    EXPECT_LE(*r.oracle, r.bounds.upper + 1e-6);
  }
}

TEST(Run, NonConvergenceLeavesNoFiles) {
  TempDir dir;
  ScenarioConfig cfg = parse("grid: {t_max: 5, n_points: 3}\n"
                             "quadrature: {tolerance: 1e-14, max_panels: 2}\n");
  cfg.output_dir = (dir.path() / "out").string();
  EXPECT_THROW(run_scenario(cfg), QuadratureNotConverged);
  EXPECT_TRUE(!fs::exists(dir.path() / "out") || fs::is_empty(dir.path() / "out"));
}

TEST(Run, UnwritableOutputIsAnIoError) {
  TempDir dir;
  dir.write("file", "x");
  ScenarioConfig cfg = parse("grid: {t_max: 0}\n");
  cfg.output_dir = (dir.path() / "file" / "sub").string();
  EXPECT_THROW(run_scenario(cfg), IoError);
}

TEST(Run, KernelsOnlyTablesOnePerBath) {
  TempDir dir;
  ScenarioConfig cfg = parse("grid: {t_max: 1, n_points: 3}\nbath: {d: inf}\n"
                             "initial: {xstate: {a: 0.25}}\nsweep: {a_minus_b: [0, 0.1, 0.2]}\n");
  cfg.output_dir = dir.path().string();
  const auto files = run_kernels(cfg);
  ASSERT_EQ(files.size(), 1u);
  const auto rows = lines(slurp(files[0]));
  EXPECT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0], "t,B01,B03,B12,A01,A03,deltaE,err_B01,err_B03,err_B12,err_A01,err_A03,err_deltaE");
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const auto empty = dir.write("empty.yaml", "");
  const auto bad = dir.write("bad.yaml", "bath: {temperature: -1}\n");
  const auto hard = dir.write("hard.yaml",
                              "grid: {t_max: 5, n_points: 2}\nquadrature: {tolerance: 1e-14, max_panels: 2}\n");
  const auto quick = dir.write("quick.yaml", "grid: {t_max: 0}\n");
  dir.write("blocker", "x");
  EXPECT_EQ(run_cli("validate " + empty.string()), 0);
  EXPECT_EQ(run_cli("validate " + bad.string()), 2);
  EXPECT_EQ(run_cli("validate " + (dir.path() / "nope.yaml").string()), 2);
  EXPECT_EQ(run_cli("run " + quick.string() + " --preset fig9"), 2);
  EXPECT_EQ(run_cli("run " + hard.string() + " --out " + (dir.path() / "o1").string()), 3);
  EXPECT_EQ(run_cli("run " + quick.string() + " --out " + (dir.path() / "blocker" / "x").string()), 4);
  EXPECT_EQ(run_cli("run " + quick.string() + " --threads 2 --out " + (dir.path() / "o2").string()), 0);
  EXPECT_TRUE(fs::exists(dir.path() / "o2" / "run_base.csv"));
  EXPECT_EQ(run_cli("kernels " + quick.string() + " --out " + (dir.path() / "o3").string()), 0);
}

TEST(Cli, PresetOverridesFilePhysicsButKeepsGrid) {
  TempDir dir;
  const auto cfg = dir.write("g.yaml", "grid: {t_max: 0.5, n_points: 2}\nbath: {temperature: 5}\n");
  ASSERT_EQ(run_cli("run " + cfg.string() + " --preset fig1 --out " + (dir.path() / "o").string()), 0);
  int csvs = 0;
  for (const auto& e : fs::directory_iterator(dir.path() / "o")) csvs += e.path().extension() == ".csv";
  EXPECT_EQ(csvs, 6);
  const std::string m = slurp(dir.path() / "o" / "manifest.txt");
  EXPECT_NE(m.find("case.0.temperature_K = 77"), std::string::npos);
  EXPECT_NE(m.find("grid.t_max_ps = 0.5"), std::string::npos);
  EXPECT_NE(m.find("preset = fig1"), std::string::npos);
}
