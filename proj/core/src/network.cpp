#include "paygo/network.hpp"

#include <algorithm>

namespace paygo::sim {

void Network::attach(const std::string& endpoint, Handler handler) {
  handlers_[endpoint] = std::move(handler);
}

void Network::detach(const std::string& endpoint) { handlers_.erase(endpoint); }

std::size_t Network::sent(const std::string& kind) const {
  auto it = by_kind_.find(kind);
  return it == by_kind_.end() ? 0 : it->second;
}

SimTime Network::send(const std::string& from, const std::string& to, std::string kind,
                      Bytes payload) {
  WireMessage msg{next_id_++, from, to, std::move(kind), std::move(payload), engine_.now()};
  ++sent_;
  ++by_kind_[msg.kind];

  auto& tail = link_tail_[{from, to}];
  const SimTime deliver_at = std::max(engine_.now() + one_way_.sample(rng_), tail);
  tail = deliver_at;

  if (interceptor_ && !interceptor_(msg)) {
    ++dropped_;
    return deliver_at;
  }
  engine_.schedule_at(deliver_at, [this, msg = std::move(msg)] {
    auto it = handlers_.find(msg.to);
    if (it == handlers_.end()) {
      ++dropped_;
      return;
    }
    it->second(msg);
  });
  return deliver_at;
}

void Network::broadcast(const std::string& from, std::string kind, const Bytes& payload) {
  std::vector<std::string> targets;
  for (const auto& [name, handler] : handlers_)
    if (name != from) targets.push_back(name);
  for (const auto& to : targets) send(from, to, kind, payload);
}

}  // namespace paygo::sim
