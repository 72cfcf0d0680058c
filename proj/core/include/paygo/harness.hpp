#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "paygo/scenario.hpp"
#include "paygo/tolling.hpp"

namespace paygo::harness {

/// Seconds a vehicle spends in coverage: (2 * range) / speed.
/// Errc::InvalidConfig unless both are positive.
double window(double comm_range_m, double speed_kmh);

struct PhaseSample {
  std::uint64_t trial = 0;
  std::string phase;
  double elapsed_s = 0.0;

  friend bool operator==(const PhaseSample&, const PhaseSample&) = default;
};

/// Phases emitted per completed session, in file order. credential_total is
/// overhead + handshake + gantry_proof + user_proof; payment_total is
/// tip_selection + pow + broadcast as seen end to end; total runs from the
/// trigger to delivery of the payment broadcast.
inline const std::vector<std::string> kSamplePhases{
    "overhead",          "handshake", "gantry_proof",  "user_proof",
    "credential_total",  "payment_request", "tip_selection", "pow",
    "broadcast",         "payment_total",   "total"};

/// Samples for one transcript. Phases the session never reached are left out.
std::vector<PhaseSample> samples_from(const tolling::SessionTranscript& transcript,
                                      std::uint64_t trial);

struct TrialRun {
  std::vector<PhaseSample> samples;  // trial-major, kSamplePhases order
  std::vector<tolling::SessionTranscript> transcripts;
};

/// config.trials honest-path sessions. Each trial draws from its own
/// (seed, index) streams and, unless config.reuse, gets a fresh world.
TrialRun run_trials(const ScenarioConfig& config);

struct CdfPoint {
  double value = 0.0;
  double fraction = 0.0;

  friend bool operator==(const CdfPoint&, const CdfPoint&) = default;
};

/// Empirical CDF: one point per distinct value, carrying the fraction of
/// samples <= value. Errc::EmptySamples.
std::vector<CdfPoint> cdf(std::vector<double> values);
std::vector<CdfPoint> cdf(const std::vector<PhaseSample>& samples, const std::string& phase);

struct PhaseStats {
  std::string phase;
  std::size_t count = 0;
  double mean = 0.0;
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double min = 0.0;
  double max = 0.0;
};

/// Nearest-rank percentile of sorted values, p in (0, 100].
double percentile(const std::vector<double>& sorted, double p);

struct FeasibilityReport {
  double window_s = 0.0;
  std::vector<PhaseStats> phases;  // kSamplePhases order
  double total_mean = 0.0;
  double fraction_within_window = 0.0;
  double margin_s = 0.0;  // window - p99(total)

  const PhaseStats& stats(const std::string& phase) const;
  std::string to_text() const;
};

/// Errc::MissingPhase unless every kSamplePhases entry has samples.
FeasibilityReport feasibility_report(const std::vector<PhaseSample>& samples, double window_s);

// ---- files -----------------------------------------------------------------
//
//   config.txt              ScenarioConfig::to_text()
//   samples_<phase>.tsv     header "trial<TAB>elapsed_s", one sample per line
//   transcripts.jsonl       one SessionTranscript JSON object per line
//   report.txt              FeasibilityReport::to_text()

void write_outputs(const std::filesystem::path& dir, const ScenarioConfig& config,
                   const TrialRun& run, const FeasibilityReport& report);

/// Reads every samples_<phase>.tsv under `dir`. Errc::Io on unreadable or
/// malformed files.
std::vector<PhaseSample> read_samples(const std::filesystem::path& dir);

}  // namespace paygo::harness
