#include "paygo/scenario.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "paygo/error.hpp"

namespace paygo::harness {

std::string_view to_string(TimingMode mode) {
  return mode == TimingMode::Live ? "live" : "calibrated";
}

TimingMode timing_mode_from_string(std::string_view text) {
  if (text == "calibrated") return TimingMode::Calibrated;
  if (text == "live") return TimingMode::Live;
  throw Error(Errc::InvalidConfig, "mode must be calibrated or live, got '" + std::string(text) + "'");
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidConfig, why); };
  if (!(comm_range_m > 0)) fail("comm_range_m must be positive");
  if (!(speed_kmh > 0)) fail("speed_kmh must be positive");
  if (trials == 0) fail("trials must be positive");
  if (!(deadline_s > 0)) fail("deadline_s must be positive");
  if (!(epsilon_m > 0)) fail("epsilon_m must be positive");
  if (!(poll_interval_s > 0)) fail("poll_interval_s must be positive");
  if (difficulty_bits > 64) fail("difficulty_bits must be at most 64");
  if (rates.empty()) fail("rate table is empty");
  if (!rates.count(vehicle_class)) fail("no rate for vehicle class '" + vehicle_class + "'");
  tolling::RateTable check(rates);  // positivity
}

tolling::SessionConfig ScenarioConfig::session_config() const {
  tolling::SessionConfig s;
  s.latency = latency;
  if (mode == TimingMode::Live)
    for (auto p : sim::kAllPhases)
      if (p != sim::Phase::NetworkOneWay && p != sim::Phase::Broadcast) s.latency[p] = sim::Live{};
  s.difficulty_bits = difficulty_bits;
  s.rates = tolling::RateTable(rates);
  s.vehicle_class = vehicle_class;
  s.direction = direction;
  s.deadline_s = deadline_s;
  s.epsilon_m = epsilon_m;
  s.reestablish_timeout_s = reestablish_timeout_s;
  s.response_timeout_s = response_timeout_s;
  s.poll_interval_s = poll_interval_s;
  return s;
}

std::string ScenarioConfig::to_text() const {
  std::string out;
  auto line = [&](std::string_view key, const auto& value) {
    out += fmt::format("{} = {}\n", key, value);
  };
  line("comm_range_m", comm_range_m);
  line("speed_kmh", speed_kmh);
  line("trials", trials);
  line("seed", seed);
  line("mode", to_string(mode));
  line("difficulty_bits", difficulty_bits);
  line("deadline_s", deadline_s);
  line("epsilon_m", epsilon_m);
  line("reuse", reuse ? "true" : "false");
  line("user_balance", user_balance);
  line("vehicle_class", vehicle_class);
  line("direction", direction);
  line("response_timeout_s", response_timeout_s);
  line("reestablish_timeout_s", reestablish_timeout_s);
  line("poll_interval_s", poll_interval_s);
  for (auto p : sim::kAllPhases)
    line(fmt::format("latency.{}", sim::to_string(p)), latency[p].to_string());
  for (const auto& [cls, amount] : rates) line("rate." + cls, amount);
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size())
    throw Error(Errc::InvalidConfig, fmt::format("{}: '{}' is not a valid number", key, value));
  return out;
}

bool boolean(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(Errc::InvalidConfig, fmt::format("{}: '{}' is not a boolean", key, value));
}

}  // namespace

ScenarioConfig ScenarioConfig::parse(std::string_view text) {
  ScenarioConfig c;
  bool rates_seen = false;
  std::size_t lineno = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto raw = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (auto hash = raw.find('#'); hash != std::string_view::npos) raw = raw.substr(0, hash);
    raw = trim(raw);
    if (raw.empty()) continue;
    auto eq = raw.find('=');
    if (eq == std::string_view::npos)
      throw Error(Errc::InvalidConfig, fmt::format("line {}: expected key = value", lineno));
    const auto key = trim(raw.substr(0, eq));
    const auto value = trim(raw.substr(eq + 1));

    if (key == "comm_range_m") c.comm_range_m = number<double>(key, value);
    else if (key == "speed_kmh") c.speed_kmh = number<double>(key, value);
    else if (key == "trials") c.trials = number<std::uint64_t>(key, value);
    else if (key == "seed") c.seed = number<std::uint64_t>(key, value);
    else if (key == "mode") c.mode = timing_mode_from_string(value);
    else if (key == "difficulty_bits") c.difficulty_bits = number<unsigned>(key, value);
    else if (key == "deadline_s") c.deadline_s = number<double>(key, value);
    else if (key == "epsilon_m") c.epsilon_m = number<double>(key, value);
    else if (key == "reuse") c.reuse = boolean(key, value);
    else if (key == "user_balance") c.user_balance = number<tangle::Amount>(key, value);
    else if (key == "vehicle_class") c.vehicle_class = std::string(value);
    else if (key == "direction") c.direction = std::string(value);
    else if (key == "response_timeout_s") c.response_timeout_s = number<double>(key, value);
    else if (key == "reestablish_timeout_s") c.reestablish_timeout_s = number<double>(key, value);
    else if (key == "poll_interval_s") c.poll_interval_s = number<double>(key, value);
    else if (key.starts_with("latency.")) {
      const auto name = key.substr(8);
      bool found = false;
      for (auto p : sim::kAllPhases)
        if (sim::to_string(p) == name) {
          c.latency[p] = sim::Distribution::parse(value);
          found = true;
        }
      if (!found) throw Error(Errc::InvalidConfig, fmt::format("unknown latency phase '{}'", name));
    } else if (key.starts_with("rate.")) {
      if (!rates_seen) c.rates.clear();
      rates_seen = true;
      c.rates[std::string(key.substr(5))] = number<tangle::Amount>(key, value);
    } else {
      throw Error(Errc::InvalidConfig, fmt::format("line {}: unknown key '{}'", lineno, key));
    }
  }
  return c;
}

ScenarioConfig ScenarioConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

}  // namespace paygo::harness
