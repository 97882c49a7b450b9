// dotdiscord: run, validate and kernels subcommands.
//
// Exit codes: 0 success, 2 config error, 3 quadrature non-convergence,
// 4 I/O error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "dotdiscord/scenario.hpp"

namespace {

enum Exit { ok = 0, config_error = 2, not_converged = 3, io_error = 4, internal_error = 1 };

int report(const char* kind, const std::exception& e, int code) {
  std::cerr << "dotdiscord: " << kind << ": " << e.what() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-dot pure-dephasing dynamics: discord bounds, concurrence, purity"};
  app.require_subcommand(1);
  app.set_version_flag("--version", dotdiscord::tool_version);

  std::string config_path;
  std::optional<std::string> preset;
  bool with_oracle = false;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;

  auto* run = app.add_subcommand("run", "compute trajectories and write CSV files");
  run->add_option("config", config_path, "YAML scenario file")->required();
  run->add_option("--preset", preset, "built-in scenario")->check(CLI::IsMember({"fig1", "fig2"}));
  run->add_flag("--with-oracle", with_oracle, "add the D_oracle column");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));

  auto* validate = app.add_subcommand("validate", "resolve a config and print it");
  validate->add_option("config", config_path, "YAML scenario file")->required();

  auto* kernels = app.add_subcommand("kernels", "write kernel tables only");
  kernels->add_option("config", config_path, "YAML scenario file")->required();
  kernels->add_option("--preset", preset, "built-in scenario")
      ->check(CLI::IsMember({"fig1", "fig2"}));
  kernels->add_option("--out", out_dir, "output directory");
  kernels->add_option("--threads", threads, "worker threads")->check(CLI::Range(1u, 1024u));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  using namespace dotdiscord;
  try {
    if (!std::filesystem::exists(config_path)) {
      throw ConfigParseError("config", "file not found: " + config_path);
    }
    ScenarioConfig cfg = load_config(std::filesystem::path(config_path), preset);
    if (with_oracle) cfg.with_oracle = true;
    if (out_dir) cfg.output_dir = *out_dir;
    if (threads) cfg.threads = *threads;

    if (validate->parsed()) {
      std::cout << render(describe(cfg));
      return ok;
    }
    if (kernels->parsed()) {
      for (const auto& f : run_kernels(cfg)) std::cout << f.string() << '\n';
      return ok;
    }
    const auto summary = run_scenario(cfg);
    for (const auto& f : summary.files) std::cout << f.string() << '\n';
    return ok;
  } catch (const ConfigParseError& e) {
    return report("config error", e, config_error);
  } catch (const QuadratureNotConverged& e) {
    return report("not converged", e, not_converged);
  } catch (const IoError& e) {
    return report("I/O error", e, io_error);
  } catch (const InvalidParameter& e) {
    return report("config error", e, config_error);
  } catch (const InvalidWeight& e) {
    return report("config error", e, config_error);
  } catch (const InvalidState& e) {
    return report("config error", e, config_error);
  } catch (const InvalidCoherence& e) {
    return report("config error", e, config_error);
  } catch (const std::exception& e) {
    return report("error", e, internal_error);
  }
}
