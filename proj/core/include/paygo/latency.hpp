#pragma once

#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

#include "paygo/rng.hpp"

namespace paygo::sim {

struct Constant {
  double value = 0.0;
};
struct Normal {
  double mean = 0.0;
  double sd = 0.0;
};
struct LogNormal {
  double mu = 0.0;
  double sigma = 0.0;
};
/// Marker: measure the real computation instead of sampling.
struct Live {};

/// Delay distribution in seconds. Samples are truncated at zero.
class Distribution {
 public:
  using Spec = std::variant<Constant, Normal, LogNormal, Live>;

  Distribution() = default;
  template <typename T>
    requires std::is_constructible_v<Spec, T>
  Distribution(T spec) : spec_(std::move(spec)) {}  // NOLINT(google-explicit-constructor)

  static Distribution lognormal_with_mean(double mean, double sigma);

  double sample(Rng& rng) const;
  /// Analytic mean of the untruncated distribution; 0 for Live.
  double mean() const;
  bool is_live() const { return std::holds_alternative<Live>(spec_); }
  const Spec& spec() const { return spec_; }

  /// "constant V" | "normal MEAN SD" | "lognormal MU SIGMA" | "live"
  std::string to_string() const;
  static Distribution parse(std::string_view text);

 private:
  Spec spec_ = Constant{};
};

/// Named protocol phases whose duration is drawn from a Distribution.
enum class Phase {
  NetworkOneWay,
  HandshakeCompute,
  GantryProofCompute,
  UserProofCompute,
  SessionOverhead,
  TipSelection,
  Pow,  // per transaction
  Broadcast,
};

inline constexpr Phase kAllPhases[] = {
    Phase::NetworkOneWay, Phase::HandshakeCompute, Phase::GantryProofCompute,
    Phase::UserProofCompute, Phase::SessionOverhead, Phase::TipSelection,
    Phase::Pow, Phase::Broadcast,
};

std::string_view to_string(Phase phase);

struct LatencyModel {
  Distribution network_one_way;
  Distribution handshake_compute;
  Distribution gantry_proof_compute;
  Distribution user_proof_compute;
  Distribution session_overhead;
  Distribution tip_selection;
  Distribution pow;
  Distribution broadcast;

  Distribution& operator[](Phase phase);
  const Distribution& operator[](Phase phase) const;

  /// Profile reproducing the measured phase means of the reference testbed:
  /// 70 ms round trip, 119.4 / 467.0 / 465.9 ms credential sub-phases,
  /// 38 ms session overhead, 0.43 s tip selection, 1.02 s PoW per bundle
  /// (three transactions), 0.06 s broadcast.
  static LatencyModel calibrated();
  /// Compute phases measured live; network and broadcast keep the
  /// calibrated distributions since the medium stays simulated.
  static LatencyModel live();
};

}  // namespace paygo::sim
