#include "paygo/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <fmt/format.h>

#include "paygo/error.hpp"

namespace paygo::harness {

double window(double comm_range_m, double speed_kmh) {
  if (!(comm_range_m > 0) || !(speed_kmh > 0))
    throw Error(Errc::InvalidConfig, "range and speed must be positive");
  return 2.0 * comm_range_m / (speed_kmh / 3.6);
}

std::vector<PhaseSample> samples_from(const tolling::SessionTranscript& t, std::uint64_t trial) {
  std::vector<PhaseSample> out;
  auto elapsed = [&](const char* name) -> std::optional<double> {
    const auto* p = t.phase(name);
    if (!p || (p->outcome != "ok" && p->outcome != "new" && p->outcome != "reused"))
      return std::nullopt;
    return p->elapsed();
  };
  auto emit = [&](const char* phase, std::optional<double> v) {
    if (v) out.push_back({trial, phase, *v});
  };

  const auto overhead = elapsed("trigger");
  const auto handshake = elapsed("channel");
  const auto gantry = elapsed("gantry_proof");
  const auto user = elapsed("user_proof");
  emit("overhead", overhead);
  emit("handshake", handshake);
  emit("gantry_proof", gantry);
  emit("user_proof", user);
  if (overhead && handshake && gantry && user)
    emit("credential_total", *overhead + *handshake + *gantry + *user);
  emit("payment_request", elapsed("payment_request"));
  emit("tip_selection", elapsed("tip_selection"));
  emit("pow", elapsed("pow"));
  emit("broadcast", elapsed("broadcast"));
  const auto attach = elapsed("payment_attach");
  emit("payment_total", attach);
  if (attach && overhead) {
    const auto* first = t.phase("trigger");
    const auto* last = t.phase("payment_attach");
    out.push_back({trial, "total", last->end - first->start});
  }
  return out;
}

TrialRun run_trials(const ScenarioConfig& config) {
  config.validate();
  const auto session = config.session_config();
  tolling::ProvisionOptions options;
  options.user_balance = config.user_balance;

  TrialRun run;
  run.transcripts.reserve(config.trials);
  std::optional<tolling::World> shared;
  for (std::uint64_t i = 0; i < config.trials; ++i) {
    Rng streams = Rng::derive(config.seed, i);
    const auto world_seed = streams();
    const auto session_seed = streams();
    if (config.reuse) {
      if (!shared) shared.emplace(tolling::provision(options, world_seed));
    } else {
      shared.reset();
      shared.emplace(tolling::provision(options, world_seed));
    }
    auto transcript = tolling::run_toll_session(*shared, session, session_seed);
    transcript.session_id = i;
    auto samples = samples_from(transcript, i);
    run.samples.insert(run.samples.end(), samples.begin(), samples.end());
    run.transcripts.push_back(std::move(transcript));
  }
  return run;
}

std::vector<CdfPoint> cdf(std::vector<double> values) {
  if (values.empty()) throw Error(Errc::EmptySamples, "cdf of no samples");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  std::vector<CdfPoint> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.push_back({values[i], static_cast<double>(i + 1) / n});
  }
  return out;
}

std::vector<CdfPoint> cdf(const std::vector<PhaseSample>& samples, const std::string& phase) {
  std::vector<double> values;
  for (const auto& s : samples)
    if (s.phase == phase) values.push_back(s.elapsed_s);
  if (values.empty()) throw Error(Errc::EmptySamples, "no samples for phase " + phase);
  return cdf(std::move(values));
}

double percentile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(Errc::EmptySamples, "percentile of no samples");
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
  return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
}

const PhaseStats& FeasibilityReport::stats(const std::string& phase) const {
  for (const auto& s : phases)
    if (s.phase == phase) return s;
  throw Error(Errc::MissingPhase, phase);
}

std::string FeasibilityReport::to_text() const {
  std::string out;
  out += fmt::format("window_s\t{:.9f}\n", window_s);
  out += fmt::format("total_mean_s\t{:.9f}\n", total_mean);
  out += fmt::format("fraction_within_window\t{:.9f}\n", fraction_within_window);
  out += fmt::format("margin_s\t{:.9f}\n", margin_s);
  out += "phase\tcount\tmean_s\tp50_s\tp90_s\tp99_s\tmin_s\tmax_s\n";
  for (const auto& s : phases)
    out += fmt::format("{}\t{}\t{:.9f}\t{:.9f}\t{:.9f}\t{:.9f}\t{:.9f}\t{:.9f}\n", s.phase, s.count,
                       s.mean, s.p50, s.p90, s.p99, s.min, s.max);
  return out;
}

FeasibilityReport feasibility_report(const std::vector<PhaseSample>& samples, double window_s) {
  std::map<std::string, std::vector<double>> by_phase;
  for (const auto& s : samples) by_phase[s.phase].push_back(s.elapsed_s);

  FeasibilityReport r;
  r.window_s = window_s;
  for (const auto& phase : kSamplePhases) {
    auto it = by_phase.find(phase);
    if (it == by_phase.end()) throw Error(Errc::MissingPhase, "no samples for phase " + phase);
    auto v = it->second;
    std::sort(v.begin(), v.end());
    PhaseStats st;
    st.phase = phase;
    st.count = v.size();
    st.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    st.p50 = percentile(v, 50);
    st.p90 = percentile(v, 90);
    st.p99 = percentile(v, 99);
    st.min = v.front();
    st.max = v.back();
    r.phases.push_back(st);
  }
  const auto& total = r.stats("total");
  const auto& totals = by_phase["total"];
  r.total_mean = total.mean;
  const auto within = std::count_if(totals.begin(), totals.end(), [&](double t) { return t <= window_s; });
  r.fraction_within_window = static_cast<double>(within) / static_cast<double>(totals.size());
  r.margin_s = window_s - total.p99;
  return r;
}

// ---- files -----------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

}  // namespace

void write_outputs(const std::filesystem::path& dir, const ScenarioConfig& config,
                   const TrialRun& run, const FeasibilityReport& report) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::Io, "cannot create " + dir.string() + ": " + ec.message());

  write_file(dir / "config.txt", config.to_text());
  for (const auto& phase : kSamplePhases) {
    std::string body = "trial\telapsed_s\n";
    for (const auto& s : run.samples)
      if (s.phase == phase) body += fmt::format("{}\t{:.9f}\n", s.trial, s.elapsed_s);
    write_file(dir / ("samples_" + phase + ".tsv"), body);
  }
  std::string lines;
  for (const auto& t : run.transcripts) lines += t.to_json_line() + "\n";
  write_file(dir / "transcripts.jsonl", lines);
  write_file(dir / "report.txt", report.to_text());
}

std::vector<PhaseSample> read_samples(const std::filesystem::path& dir) {
  std::vector<PhaseSample> out;
  for (const auto& phase : kSamplePhases) {
    const auto path = dir / ("samples_" + phase + ".tsv");
    std::ifstream in(path);
    if (!in) throw Error(Errc::Io, "cannot read " + path.string());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto tab = line.find('\t');
      PhaseSample s;
      s.phase = phase;
      const char* end = line.data() + line.size();
      auto [p1, e1] = std::from_chars(line.data(), line.data() + std::min(tab, line.size()), s.trial);
      auto [p2, e2] = tab == std::string::npos
                          ? std::from_chars_result{end, std::errc::invalid_argument}
                          : std::from_chars(line.data() + tab + 1, end, s.elapsed_s);
      if (e1 != std::errc{} || e2 != std::errc{} || p2 != end)
        throw Error(Errc::Io, fmt::format("{}: malformed line '{}'", path.string(), line));
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace paygo::harness
