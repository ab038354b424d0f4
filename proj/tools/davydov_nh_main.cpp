// davydov-nh run <config> [--jobs N] [--out DIR] [--compare] [--tolerance X] [--seed N]
//
// Exit codes: 0 ok, 2 config error, 3 numerical failure (partial outputs kept),
// 4 comparison outside tolerance. DAVYDOV_NH_LOG sets the log level.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "davydov_nh/cli/runner.hpp"
#include "davydov_nh/version.hpp"

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("davydov-nh");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S.%e] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("DAVYDOV_NH_LOG")) {
    const std::string name(env);
    const auto level = spdlog::level::from_str(name);
    if (level == spdlog::level::off && name != "off") {
      spdlog::warn("DAVYDOV_NH_LOG: unknown level '{}', using info", name);
    } else {
      spdlog::set_level(level);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = davydov_nh::cli;
  setup_logging();

  CLI::App app{"Variational dynamics of non-Hermitian spin-boson models"};
  app.set_version_flag("--version", std::string(davydov_nh::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  unsigned jobs = std::max(1u, std::thread::hardware_concurrency());
  std::optional<std::string> out_dir;
  bool compare = false;
  std::optional<double> tolerance;
  std::optional<std::uint64_t> seed;

  CLI::App* run = app.add_subcommand("run", "Run the experiment described by a YAML config");
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--jobs,-j", jobs, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--out,-o", out_dir, "Output directory (overrides output.directory)");
  run->add_flag("--compare", compare, "Compare against the exact solver");
  run->add_option("--tolerance", tolerance, "Comparison tolerance")->check(CLI::PositiveNumber);
  run->add_option("--seed", seed, "Seed of the initial-state noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::kExitConfig;
  }

  try {
    cli::ExperimentConfig cfg = cli::load_config(config_path);
    if (out_dir) cfg.output.directory = *out_dir;
    if (compare) cfg.output.compare = true;
    if (tolerance) cfg.output.tolerance = *tolerance;
    if (seed) cfg.integrator.seed = *seed;

    spdlog::info("{}: preset {}, {} = {} value(s), {} job(s)", config_path, cli::to_string(cfg.preset),
                 cfg.sweep.parameter, cfg.sweep.values.size(), jobs);
    const cli::RunSummary summary = cli::run_experiment(cfg, jobs);
    for (const auto& t : summary.tasks) {
      if (t.comparison) {
        spdlog::info("{} = {}: max |d {}| = {:.3e} ({})", cfg.sweep.parameter, t.value, t.comparison->quantity,
                     t.comparison->max_abs, t.comparison->pass ? "pass" : "FAIL");
      }
    }
    spdlog::info("wrote {} in {:.1f} s, exit {}", cfg.output.directory, summary.wall_time, summary.exit_code);
    return summary.exit_code;
  } catch (const davydov_nh::Error& e) {
    spdlog::error("{}: {}", davydov_nh::to_string(e.kind()), e.what());
    return e.kind() == davydov_nh::ErrorKind::Config || e.kind() == davydov_nh::ErrorKind::Io
               ? cli::kExitConfig
               : cli::kExitNumerical;
  }
}
