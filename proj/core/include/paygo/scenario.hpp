#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "paygo/latency.hpp"
#include "paygo/tangle.hpp"
#include "paygo/tolling.hpp"

namespace paygo::harness {

enum class TimingMode { Calibrated, Live };
std::string_view to_string(TimingMode mode);
/// Errc::InvalidConfig for anything but "calibrated" or "live".
TimingMode timing_mode_from_string(std::string_view text);

/// Everything a batch of trials depends on. The text form is one
/// `key = value` pair per line; `#` starts a comment. Keys:
///
///   comm_range_m, speed_kmh, trials, seed, mode, difficulty_bits,
///   deadline_s, epsilon_m, reuse, user_balance, vehicle_class, direction,
///   response_timeout_s, reestablish_timeout_s, poll_interval_s,
///   latency.<phase> = constant V | normal M SD | lognormal MU SIGMA | live
///   rate.<class> = amount
///
/// Any `rate.` line replaces the whole default rate table.
struct ScenarioConfig {
  double comm_range_m = 600.0;
  double speed_kmh = 130.0;
  std::uint64_t trials = 1000;
  std::uint64_t seed = 1;
  TimingMode mode = TimingMode::Calibrated;
  unsigned difficulty_bits = 8;
  sim::LatencyModel latency = sim::LatencyModel::calibrated();
  std::map<std::string, tangle::Amount> rates{{"light", 5}, {"heavy", 12}};
  std::string vehicle_class = "light";
  std::string direction = "northbound";
  double deadline_s = 60.0;
  double epsilon_m = 100.0;
  bool reuse = false;
  tangle::Amount user_balance = 1000;
  double response_timeout_s = 5.0;
  double reestablish_timeout_s = 2.0;
  double poll_interval_s = 0.25;

  /// Errc::InvalidConfig on a non-positive range, speed, trial count or
  /// deadline, an empty rate table or a vehicle class missing from it.
  void validate() const;

  /// Session parameters; in live mode every compute phase becomes Live.
  tolling::SessionConfig session_config() const;

  std::string to_text() const;
  /// Starts from the defaults; Errc::InvalidConfig on unknown keys or bad
  /// values. Does not validate.
  static ScenarioConfig parse(std::string_view text);
  /// Errc::Io if the file cannot be read.
  static ScenarioConfig load(const std::filesystem::path& path);
};

}  // namespace paygo::harness
