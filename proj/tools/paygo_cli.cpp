// paygo: batch runner and report tool for the toll-session simulator.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "paygo/error.hpp"
#include "paygo/harness.hpp"

namespace fs = std::filesystem;
using namespace paygo;

namespace {

int run(const fs::path& config_path, std::optional<std::uint64_t> seed,
        std::optional<std::string> mode, const fs::path& out) {
  auto config = harness::ScenarioConfig::load(config_path);
  if (seed) config.seed = *seed;
  if (mode) config.mode = harness::timing_mode_from_string(*mode);
  config.validate();

  const auto trials = harness::run_trials(config);
  const auto report = harness::feasibility_report(
      trials.samples, harness::window(config.comm_range_m, config.speed_kmh));
  harness::write_outputs(out, config, trials, report);
  std::cout << report.to_text();
  return 0;
}

int report(const fs::path& in, std::optional<double> window_override) {
  const auto config = harness::ScenarioConfig::load(in / "config.txt");
  const double w = window_override ? *window_override
                                   : harness::window(config.comm_range_m, config.speed_kmh);
  std::cout << harness::feasibility_report(harness::read_samples(in), w).to_text();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pay-as-you-go toll session simulator"};
  app.require_subcommand(1);

  fs::path config_path, out_dir, in_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<double> window_override;

  auto* run_cmd = app.add_subcommand("run", "run a batch of trials and write samples, transcripts and a report");
  run_cmd->add_option("--config", config_path, "scenario file (key = value lines)")->required();
  run_cmd->add_option("--seed", seed, "override the config seed");
  run_cmd->add_option("--mode", mode, "calibrated | live")->check(CLI::IsMember({"calibrated", "live"}));
  run_cmd->add_option("--out", out_dir, "output directory")->required();

  auto* report_cmd = app.add_subcommand("report", "recompute the feasibility report of a finished run");
  report_cmd->add_option("--in", in_dir, "directory written by run")->required();
  report_cmd->add_option("--window-override", window_override, "window in seconds")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run(config_path, seed, mode, out_dir);
    return report(in_dir, window_override);
  } catch (const Error& e) {
    std::cerr << fmt::format("paygo: {} ({})\n", e.what(), to_string(e.code()));
    return 2;
  }
}
