#include "paygo/latency.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "paygo/error.hpp"

namespace paygo::sim {

Distribution Distribution::lognormal_with_mean(double mean, double sigma) {
  return Distribution(LogNormal{std::log(mean) - sigma * sigma / 2.0, sigma});
}

double Distribution::sample(Rng& rng) const {
  double v = std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Constant>) {
          return s.value;
        } else if constexpr (std::is_same_v<T, Normal>) {
          if (s.sd <= 0.0) return s.mean;
          return std::normal_distribution<double>(s.mean, s.sd)(rng);
        } else if constexpr (std::is_same_v<T, LogNormal>) {
          if (s.sigma <= 0.0) return std::exp(s.mu);
          return std::lognormal_distribution<double>(s.mu, s.sigma)(rng);
        } else {
          return 0.0;
        }
      },
      spec_);
  return v < 0.0 ? 0.0 : v;
}

double Distribution::mean() const {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Constant>) return s.value;
        else if constexpr (std::is_same_v<T, Normal>) return s.mean;
        else if constexpr (std::is_same_v<T, LogNormal>) return std::exp(s.mu + s.sigma * s.sigma / 2.0);
        else return 0.0;
      },
      spec_);
}

std::string Distribution::to_string() const {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Constant>) return fmt::format("constant {}", s.value);
        else if constexpr (std::is_same_v<T, Normal>) return fmt::format("normal {} {}", s.mean, s.sd);
        else if constexpr (std::is_same_v<T, LogNormal>) return fmt::format("lognormal {} {}", s.mu, s.sigma);
        else return "live";
      },
      spec_);
}

Distribution Distribution::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string kind;
  in >> kind;
  std::vector<double> params;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      params.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::logic_error&) {
      throw Error(Errc::InvalidConfig, "bad distribution parameter '" + token + "'");
    }
  }
  auto want = [&](std::size_t n) {
    if (params.size() != n)
      throw Error(Errc::InvalidConfig, fmt::format("'{}' takes {} parameter(s)", kind, n));
  };
  if (kind == "constant") {
    want(1);
    return Distribution(Constant{params[0]});
  }
  if (kind == "normal") {
    want(2);
    if (params[1] < 0) throw Error(Errc::InvalidConfig, "normal sd must be >= 0");
    return Distribution(Normal{params[0], params[1]});
  }
  if (kind == "lognormal") {
    want(2);
    if (params[1] < 0) throw Error(Errc::InvalidConfig, "lognormal sigma must be >= 0");
    return Distribution(LogNormal{params[0], params[1]});
  }
  if (kind == "live") {
    want(0);
    return Distribution(Live{});
  }
  throw Error(Errc::InvalidConfig, "unknown distribution '" + kind + "'");
}

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::NetworkOneWay: return "network_one_way";
    case Phase::HandshakeCompute: return "handshake_compute";
    case Phase::GantryProofCompute: return "gantry_proof_compute";
    case Phase::UserProofCompute: return "user_proof_compute";
    case Phase::SessionOverhead: return "session_overhead";
    case Phase::TipSelection: return "tip_selection";
    case Phase::Pow: return "pow";
    case Phase::Broadcast: return "broadcast";
  }
  return "unknown";
}

Distribution& LatencyModel::operator[](Phase phase) {
  return const_cast<Distribution&>(std::as_const(*this)[phase]);
}

const Distribution& LatencyModel::operator[](Phase phase) const {
  switch (phase) {
    case Phase::NetworkOneWay: return network_one_way;
    case Phase::HandshakeCompute: return handshake_compute;
    case Phase::GantryProofCompute: return gantry_proof_compute;
    case Phase::UserProofCompute: return user_proof_compute;
    case Phase::SessionOverhead: return session_overhead;
    case Phase::TipSelection: return tip_selection;
    case Phase::Pow: return pow;
    case Phase::Broadcast: return broadcast;
  }
  return network_one_way;
}

LatencyModel LatencyModel::calibrated() {
  constexpr double kOneWay = 0.035;
  LatencyModel m;
  m.network_one_way = Normal{kOneWay, 0.002};
  // handshake and gantry proof each put two transits on the critical path,
  // the user proof one (its request travels alongside the gantry proof)
  m.handshake_compute = Normal{0.1194 - 2 * kOneWay, 0.004};
  m.gantry_proof_compute = Normal{0.4670 - 2 * kOneWay, 0.010};
  m.user_proof_compute = Normal{0.4659 - kOneWay, 0.010};
  m.session_overhead = Constant{0.038};
  m.tip_selection = Normal{0.43, 0.03};
  m.pow = Distribution::lognormal_with_mean(1.02 / 3.0, 0.25);
  m.broadcast = Normal{0.06, 0.008};
  return m;
}

LatencyModel LatencyModel::live() {
  LatencyModel m = calibrated();
  for (auto p : kAllPhases)
    if (p != Phase::NetworkOneWay && p != Phase::Broadcast) m[p] = Live{};
  return m;
}

}  // namespace paygo::sim
