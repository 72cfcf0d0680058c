#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include "paygo/codec.hpp"
#include "paygo/engine.hpp"
#include "paygo/latency.hpp"
#include "paygo/rng.hpp"

namespace paygo::sim {

struct WireMessage {
  std::uint64_t id = 0;
  std::string from;
  std::string to;
  std::string kind;
  Bytes payload;
  SimTime sent_at = 0.0;
};

/// Simulated point-to-point medium. One-way delay is drawn per message;
/// each directed link is FIFO (a message never overtakes an earlier one on
/// the same link).
class Network {
 public:
  using Handler = std::function<void(const WireMessage&)>;
  /// May alter or drop (return false) a message in flight.
  using Interceptor = std::function<bool(WireMessage&)>;

  Network(Engine& engine, Distribution one_way, Rng& rng)
      : engine_(engine), one_way_(std::move(one_way)), rng_(rng) {}

  void attach(const std::string& endpoint, Handler handler);
  void detach(const std::string& endpoint);
  bool attached(const std::string& endpoint) const { return handlers_.count(endpoint) > 0; }

  /// Returns the scheduled delivery time.
  SimTime send(const std::string& from, const std::string& to, std::string kind, Bytes payload);
  /// Plaintext delivery to every other attached endpoint.
  void broadcast(const std::string& from, std::string kind, const Bytes& payload);

  void set_interceptor(Interceptor interceptor) { interceptor_ = std::move(interceptor); }

  std::size_t sent() const { return sent_; }
  std::size_t sent(const std::string& kind) const;
  std::size_t dropped() const { return dropped_; }
  const std::map<std::string, std::size_t>& sent_by_kind() const { return by_kind_; }

 private:
  Engine& engine_;
  Distribution one_way_;
  Rng& rng_;
  std::map<std::string, Handler> handlers_;
  std::map<std::pair<std::string, std::string>, SimTime> link_tail_;
  Interceptor interceptor_;
  std::uint64_t next_id_ = 1;
  std::size_t sent_ = 0;
  std::size_t dropped_ = 0;
  std::map<std::string, std::size_t> by_kind_;
};

}  // namespace paygo::sim
