#include "paygo/tolling.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <json.hpp>

#include "paygo/engine.hpp"
#include "paygo/error.hpp"
#include "paygo/network.hpp"

namespace paygo::tolling {

// ---- value types -----------------------------------------------------------

RateTable::RateTable(std::map<std::string, tangle::Amount> rates) : rates_(std::move(rates)) {
  for (const auto& [cls, amount] : rates_)
    if (amount <= 0) throw Error(Errc::InvalidConfig, "rate for '" + cls + "' must be positive");
}

tangle::Amount RateTable::at(const std::string& vehicle_class) const {
  auto it = rates_.find(vehicle_class);
  if (it == rates_.end()) throw Error(Errc::UnknownVehicleClass, vehicle_class);
  return it->second;
}

Bytes Announcement::encode() const {
  codec::Writer w;
  w.str(gantry_label).f64(location.lat_deg).f64(location.lon_deg).f64(broadcast_interval_s);
  return std::move(w).take();
}

Announcement Announcement::decode(ByteView data) {
  codec::Reader r(data);
  Announcement a;
  a.gantry_label = r.str();
  a.location.lat_deg = r.f64();
  a.location.lon_deg = r.f64();
  a.broadcast_interval_s = r.f64();
  r.expect_end();
  return a;
}

Bytes PaymentRequest::encode() const {
  codec::Writer w;
  w.i64(amount).str(pay_to.str()).bytes(payment_nonce.bytes);
  return std::move(w).take();
}

PaymentRequest PaymentRequest::decode(ByteView data) {
  codec::Reader r(data);
  PaymentRequest p;
  p.amount = r.i64();
  p.pay_to = tangle::Address(r.str());
  auto nonce = r.bytes();
  r.expect_end();
  if (nonce.size() != crypto::kNonceSize) throw Error(Errc::MalformedMessage, "payment nonce width");
  std::copy(nonce.begin(), nonce.end(), p.payment_nonce.bytes.begin());
  return p;
}

std::string_view to_string(Status status) {
  return status == Status::Settled ? "Settled" : "Enforcement";
}

const PhaseRecord* SessionTranscript::phase(std::string_view name) const {
  for (const auto* list : {&phases, &steps})
    for (const auto& p : *list)
      if (p.name == name) return &p;
  return nullptr;
}

std::string SessionTranscript::to_json_line() const {
  using nlohmann::ordered_json;
  auto phase_list = [](const std::vector<PhaseRecord>& list) {
    ordered_json out = ordered_json::array();
    for (const auto& p : list)
      out.push_back({{"name", p.name}, {"start", p.start}, {"end", p.end},
                     {"elapsed", p.elapsed()}, {"outcome", p.outcome}});
    return out;
  };
  auto attrs = [](const wallet::Attributes& a) {
    ordered_json out = ordered_json::object();
    for (const auto& [k, v] : a) out[k] = v;
    return out;
  };

  ordered_json j;
  j["session_id"] = session_id;
  j["direction"] = direction;
  j["channel"] = channel;
  j["status"] = to_string(status);
  j["phases"] = phase_list(phases);
  j["steps"] = phase_list(steps);
  j["gantry_attributes"] = attrs(gantry_attributes);
  j["user_attributes"] = attrs(user_attributes);
  if (payment)
    j["payment"] = {{"amount", payment->amount},
                    {"pay_to", payment->pay_to.str()},
                    {"payment_nonce", payment->payment_nonce.hex()}};
  else
    j["payment"] = nullptr;
  j["settled_at"] = settled_at ? ordered_json(*settled_at) : ordered_json(nullptr);
  if (enforcement) {
    const auto& e = *enforcement;
    j["enforcement"] = {
        {"plate", e.plate},
        {"session_ref", e.session_ref},
        {"payment_nonce", e.payment_nonce ? ordered_json(e.payment_nonce->hex()) : ordered_json()},
        {"deadline_missed_at", e.deadline_missed_at},
        {"evidence", e.evidence},
        {"reason", e.reason}};
  } else {
    j["enforcement"] = nullptr;
  }
  j["events"] = events;
  ordered_json msgs = ordered_json::object();
  for (const auto& [k, n] : messages) msgs[k] = n;
  j["messages"] = msgs;
  j["message_count"] = message_count;
  return j.dump();
}

// ---- provisioning ----------------------------------------------------------

std::string format_localization(const pairwise::GeoPoint& p) {
  return fmt::format("{:.6f},{:.6f}", p.lat_deg, p.lon_deg);
}

pairwise::GeoPoint parse_localization(std::string_view text) {
  auto comma = text.find(',');
  pairwise::GeoPoint p;
  auto parse = [&](std::string_view part, double& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    return ec == std::errc{} && ptr == part.data() + part.size();
  };
  if (comma == std::string_view::npos || !parse(text.substr(0, comma), p.lat_deg) ||
      !parse(text.substr(comma + 1), p.lon_deg))
    throw Error(Errc::LocationMismatch, "unparseable localization '" + std::string(text) + "'");
  return p;
}

namespace {

pairwise::GeoPoint offset_north(pairwise::GeoPoint p, double metres) {
  constexpr double kMetresPerDegree = 6371008.8 * std::numbers::pi / 180.0;
  p.lat_deg += metres / kMetresPerDegree;
  return p;
}

}  // namespace

World provision(const ProvisionOptions& options, std::uint64_t seed) {
  Rng seeds(seed);
  wallet::Wallet trustee("trustee", seeds());
  wallet::Wallet op("operator", seeds());
  wallet::Wallet gantry("gantry", seeds());
  wallet::Wallet user("user", seeds());

  const auto trustee_id = trustee.create_did();
  identity::IdentityLedger ledger(trustee_id.did, trustee_id.verkey);

  const auto op_id = op.create_did();
  ledger.submit(identity::NymRecord{op_id.did, op_id.verkey, identity::Role::TrustAnchor, {}},
                trustee_id.did);
  const auto gantry_id = gantry.create_did();
  ledger.submit(identity::NymRecord{gantry_id.did, gantry_id.verkey, identity::Role::IdentityOwner, {}}, op_id.did);
  const auto user_id = user.create_did();
  ledger.submit(identity::NymRecord{user_id.did, user_id.verkey, identity::Role::IdentityOwner, {}}, op_id.did);
  gantry.create_master_secret();
  user.create_master_secret();

  auto publish = [&](std::string_view name, const std::vector<std::string>& attrs,
                     const std::string& issuer, const crypto::Verkey& key) {
    auto schema = ledger.submit(
        identity::SchemaRecord{std::string(name), "1.0", attrs, {}}, issuer);
    return ledger.submit(identity::CredDefRecord{schema, {}, key}, issuer);
  };
  const auto tolling_def = publish(kTollingCharge, kGantryAttributes, op_id.did, op_id.verkey);
  const auto client_def = publish(kClientIdentification, kUserAttributes, op_id.did, op_id.verkey);

  Announcement announcement{options.gantry_label, options.gantry_location, 1.0};
  const wallet::Attributes gantry_attrs{
      {"name", options.gantry_label},
      {"localization",
       format_localization(offset_north(options.gantry_location, options.gantry_location_offset_m))},
      {"identifier", options.gantry_identifier}};

  if (options.gantry_self_issued) {
    // Only a Trustee may raise another party's role.
    ledger.submit(identity::NymRecord{gantry_id.did, gantry_id.verkey, identity::Role::TrustAnchor, {}},
                  trustee_id.did);
    const auto own_def = publish(kTollingCharge, kGantryAttributes, gantry_id.did, gantry_id.verkey);
    gantry.store_credential(
        wallet::issue_credential(gantry, ledger, own_def, gantry_attrs, gantry.holder_commitment()));
  } else {
    gantry.store_credential(
        wallet::issue_credential(op, ledger, tolling_def, gantry_attrs, gantry.holder_commitment()));
  }
  if (options.user_has_credential)
    user.store_credential(wallet::issue_credential(op, ledger, client_def, options.user_attributes,
                                                   user.holder_commitment()));

  const auto user_pay = user.create_did();
  const auto gantry_pay = gantry.create_did();
  const auto user_address = tangle::Address::from_verkey(user_pay.verkey);
  const auto pay_to = tangle::Address::from_verkey(gantry_pay.verkey);
  const tangle::TangleState::Allocations alloc{{user_address, options.user_balance}};

  if (options.known_relationship) {
    auto req = pairwise::initiate_connection(user);
    auto env = pairwise::respond_connection(gantry, req, {}, 0.0);
    pairwise::complete_connection(user, env, options.gantry_location, 0.0);
  }

  return World{
      .ledger = std::move(ledger),
      .trustee = std::move(trustee),
      .operator_ = std::move(op),
      .gantry = std::move(gantry),
      .user = std::move(user),
      .trustee_did = trustee_id.did,
      .operator_did = op_id.did,
      .gantry_did = gantry_id.did,
      .user_did = user_id.did,
      .tolling_cred_def = tolling_def,
      .client_cred_def = client_def,
      .user_payment_did = user_pay.did,
      .gantry_payment_did = gantry_pay.did,
      .user_address = user_address,
      .pay_to = pay_to,
      .announcement = announcement,
      .user_node = tangle::TangleState::genesis(alloc),
      .operator_node = tangle::TangleState::genesis(alloc),
  };
}

// ---- protocol steps --------------------------------------------------------

std::optional<pairwise::PairwiseRecord> on_announcement(const wallet::Wallet& user,
                                                        const Announcement& announcement,
                                                        double epsilon_m) {
  return pairwise::lookup_known_peer(user.pairwise(), announcement.location, epsilon_m);
}

wallet::ProofRequest gantry_proof_request(const std::vector<std::string>& operator_dids, Rng& rng) {
  return wallet::make_proof_request(std::string(kTollingCharge), kGantryAttributes, operator_dids,
                                    rng);
}

wallet::ProofRequest user_proof_request(const std::vector<std::string>& operator_dids, Rng& rng) {
  return wallet::make_proof_request(std::string(kClientIdentification), kUserAttributes,
                                    operator_dids, rng);
}

wallet::Attributes validate_gantry(const identity::IdentityLedger& ledger,
                                   const wallet::ProofRequest& request, const wallet::Proof& proof,
                                   const Announcement& announcement, double epsilon_m) {
  auto attrs = wallet::verify_proof(ledger, request, proof);
  auto it = attrs.find("localization");
  if (it == attrs.end()) throw Error(Errc::LocationMismatch, "no localization disclosed");
  const double d = pairwise::distance_m(parse_localization(it->second), announcement.location);
  if (d > epsilon_m)
    throw Error(Errc::LocationMismatch,
                fmt::format("credential localization is {:.1f} m from the announcement", d));
  return attrs;
}

wallet::Attributes validate_user(const identity::IdentityLedger& ledger,
                                 const wallet::ProofRequest& request, const wallet::Proof& proof) {
  return wallet::verify_proof(ledger, request, proof);
}

PaymentRequest request_payment(const std::string& vehicle_class, const RateTable& rates,
                               const tangle::Address& pay_to, Rng& rng) {
  return PaymentRequest{rates.at(vehicle_class), pay_to, crypto::new_nonce(rng)};
}

tangle::Bundle build_payment(const wallet::Wallet& user, std::string_view payment_did,
                             const tangle::TangleState& node, const PaymentRequest& request,
                             std::int64_t timestamp_us) {
  const auto from = tangle::Address::from_verkey(user.verkey(payment_did));
  if (node.balance(from) < request.amount)
    throw Error(Errc::InsufficientBalance,
                fmt::format("balance {} below requested {}", node.balance(from), request.amount));
  return tangle::build_value_bundle(user.key_store(), user.key_handle(payment_did), from,
                                    request.pay_to, request.amount, request.payment_nonce,
                                    timestamp_us);
}

tangle::Bundle execute_payment(const wallet::Wallet& user, std::string_view payment_did,
                               tangle::TangleState& node, const PaymentRequest& request,
                               unsigned difficulty_bits, Rng& rng) {
  return node.attach_bundle(build_payment(user, payment_did, node, request), difficulty_bits, rng);
}

bool payment_settled(const tangle::TangleState& operator_node, const PaymentRequest& request) {
  return operator_node.find_payment(request.pay_to, request.payment_nonce, request.amount)
      .has_value();
}

// ---- session ---------------------------------------------------------------

namespace {

enum Tag : std::uint8_t { kProofRequest = 1, kProof = 2, kDecline = 3, kPaymentRequest = 4 };

std::string kind_of(Tag tag) {
  switch (tag) {
    case kProofRequest: return "proof_request";
    case kProof: return "proof";
    case kDecline: return "proof_decline";
    case kPaymentRequest: return "payment_request";
  }
  return "channel";
}

bool is_channel_kind(const std::string& kind) {
  return kind == "proof_request" || kind == "proof" || kind == "proof_decline" ||
         kind == "payment_request";
}

Bytes frame(Tag tag, ByteView body) {
  codec::Writer w;
  w.u8(tag).bytes(body);
  return std::move(w).take();
}

std::string describe(const Error& e) { return std::string(to_string(e.code())); }

class Session {
 public:
  Session(World& world, const SessionConfig& config, std::uint64_t seed, const Faults& faults)
      : w_(world),
        cfg_(config),
        faults_(faults),
        net_rng_(Rng::derive(seed, 1)),
        timing_rng_(Rng::derive(seed, 2)),
        gossip_rng_(Rng::derive(seed, 3)),
        proto_rng_(Rng::derive(seed, 4)),
        net_(engine_, config.latency.network_one_way, net_rng_),
        gossip_(engine_, config.latency.broadcast, gossip_rng_),
        user_(engine_),
        gantry_(engine_) {
    tr_.session_id = world.sessions_run++;
    tr_.direction = config.direction;
    gossip_.add_peer(w_.operator_node);
  }

  SessionTranscript run() {
    net_.attach("user", [this](const sim::WireMessage& m) {
      user_.post([this, m] { user_receive(m); });
    });
    net_.attach("gantry", [this](const sim::WireMessage& m) {
      gantry_.post([this, m] { gantry_receive(m); });
    });
    if (faults_.tamper_channel_message) {
      net_.set_interceptor([this](sim::WireMessage& m) {
        if (!is_channel_kind(m.kind)) return true;
        if (channel_seen_++ == *faults_.tamper_channel_message && !m.payload.empty()) {
          m.payload.back() ^= 0x01;
          event("tampered " + m.kind + " in flight");
        }
        return true;
      });
    }

    deadline_ = cfg_.deadline_s;
    engine_.schedule_at(deadline_, [this] {
      if (!issued_) enforce("no payment request was issued");
    });
    auto announcement = w_.announcement;
    announcement.broadcast_interval_s = cfg_.announcement_interval_s;
    net_.send("gantry", "user", "announcement", announcement.encode());

    engine_.run();

    if (open_) close("interrupted");
    tr_.messages = net_.sent_by_kind();
    if (gossip_.broadcasts() > 0) tr_.messages["bundle_broadcast"] = gossip_.broadcasts();
    for (const auto& [k, n] : tr_.messages) tr_.message_count += n;
    return std::move(tr_);
  }

 private:
  // ---- bookkeeping ----

  void event(std::string text) { tr_.events.push_back(fmt::format("{:.6f} {}", engine_.now(), text)); }

  void open(std::string name) {
    if (open_) close("superseded");
    open_ = PhaseRecord{std::move(name), engine_.now(), engine_.now(), "ok"};
  }
  void close(std::string outcome) {
    if (!open_) return;
    open_->end = engine_.now();
    open_->outcome = std::move(outcome);
    tr_.phases.push_back(std::move(*open_));
    open_.reset();
  }
  bool is_open(std::string_view name) const { return open_ && open_->name == name; }

  void step(std::string name, double start, double end) {
    tr_.steps.push_back(PhaseRecord{std::move(name), start, end, "ok"});
  }

  /// Simulated duration of `fn`: sampled from the phase distribution
  /// (scaled by `share`), or measured when the distribution is Live.
  template <typename Fn>
  double cost(sim::Phase phase, double share, Fn&& fn) {
    const auto& dist = cfg_.latency[phase];
    if (dist.is_live()) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    fn();
    return dist.sample(timing_rng_) * share;
  }

  std::uint64_t arm(sim::Agent& agent, std::uint64_t& token, double delay, std::string what) {
    const auto mine = ++token;
    return agent.set_timer(delay, [this, &token, mine, what = std::move(what)] {
      if (token == mine) on_timeout(what);
    });
  }

  void on_timeout(const std::string& what) {
    if (what == "reestablish") {
      event("echo unanswered, falling back to a fresh handshake");
      start_handshake();
    } else if (what == "client_request" || what == "gantry_proof" || what == "handshake" ||
               what == "payment_request") {
      abort_user(what + " timed out");
    } else if (what == "user_proof") {
      user_answered_ = true;
      event("user proof timed out");
      if (is_open("user_proof")) close("timeout");
    }
  }

  void abort_user(const std::string& reason) {
    if (user_done_) return;
    user_done_ = true;
    ++user_wait_;
    event("user aborted: " + reason);
    close(reason);
  }

  // ---- user ----

  void user_receive(const sim::WireMessage& m) {
    if (user_done_) return;
    if (m.kind == "announcement") {
      if (triggered_) return;
      try {
        on_trigger(Announcement::decode(m.payload));
      } catch (const Error&) {
        event("unparseable announcement ignored");
      }
      return;
    }
    if (m.kind == "conn_response") return on_conn_response(m.payload);
    if (m.kind == "echo") return on_echo_reply(m.payload);
    if (!is_channel_kind(m.kind) || !user_channel_) return;

    Bytes plain;
    try {
      plain = user_channel_->receive(m.payload);
    } catch (const Error& e) {
      event("user dropped " + m.kind + ": " + describe(e));
      return;
    }
    try {
      codec::Reader r(plain);
      const auto tag = static_cast<Tag>(r.u8());
      auto body = r.bytes();
      r.expect_end();
      switch (tag) {
        case kProof: return on_gantry_proof(wallet::Proof::decode(body));
        case kDecline: return on_gantry_decline();
        case kProofRequest: return on_client_request(wallet::ProofRequest::decode(body));
        case kPaymentRequest: return on_payment_request(PaymentRequest::decode(body));
      }
    } catch (const Error& e) {
      event("user rejected malformed " + m.kind + ": " + describe(e));
    }
  }

  void on_trigger(const Announcement& a) {
    triggered_ = true;
    seen_ = a;
    open("trigger");
    user_.work(cost(sim::Phase::SessionOverhead, 1.0, [] {}), [this] {
      close("ok");
      open("channel");
      auto known = on_announcement(w_.user, *seen_, cfg_.epsilon_m);
      if (!known) return start_handshake();
      tr_.channel = "reused";
      reuse_ = *known;
      echo_nonce_ = crypto::new_nonce(w_.user.rng());
      Bytes ping;
      const double d = cost(sim::Phase::HandshakeCompute, 0.5,
                            [&] { ping = pairwise::make_echo(w_.user, *reuse_, echo_nonce_); });
      user_.work(d, [this, ping = std::move(ping)]() mutable {
        net_.send("user", "gantry", "echo", std::move(ping));
        arm(user_, user_wait_, cfg_.reestablish_timeout_s, "reestablish");
      });
    });
  }

  void start_handshake() {
    reuse_.reset();
    ++user_wait_;
    tr_.channel = "new";
    pairwise::ConnectionRequest req;
    const double d = cost(sim::Phase::HandshakeCompute, 0.5,
                          [&] { req = pairwise::initiate_connection(w_.user); });
    user_.work(d, [this, payload = req.encode()]() mutable {
      net_.send("user", "gantry", "conn_request", std::move(payload));
      arm(user_, user_wait_, cfg_.response_timeout_s, "handshake");
      awaiting_response_ = true;
    });
  }

  void on_conn_response(const Bytes& envelope) {
    if (!awaiting_response_) return;
    try {
      auto record = pairwise::complete_connection(w_.user, envelope, seen_->location, engine_.now());
      awaiting_response_ = false;
      channel_ready(std::move(record));
    } catch (const Error& e) {
      event("connection response rejected: " + describe(e));
    }
  }

  void on_echo_reply(const Bytes& envelope) {
    if (!reuse_ || user_channel_) return;
    try {
      pairwise::accept_echo_reply(w_.user, *reuse_, envelope, echo_nonce_);
      channel_ready(*reuse_);
    } catch (const Error& e) {
      event("echo reply rejected: " + describe(e));
    }
  }

  void channel_ready(pairwise::PairwiseRecord record) {
    ++user_wait_;
    user_channel_.emplace(w_.user, std::move(record), [this](const std::string& label, Bytes env) {
      net_.send("user", "gantry", label, std::move(env));
    });
    close(tr_.channel);
    open("gantry_proof");
    tc_request_ = gantry_proof_request({w_.operator_did}, proto_rng_);
    user_channel_->send(frame(kProofRequest, tc_request_->encode()), kind_of(kProofRequest));
    arm(user_, user_wait_, cfg_.response_timeout_s, "gantry_proof");
  }

  void on_gantry_proof(const wallet::Proof& proof) {
    if (!is_open("gantry_proof") || verifying_) return;
    ++user_wait_;
    verifying_ = true;
    std::optional<wallet::Attributes> attrs;
    std::string outcome = "ok";
    const double d = cost(sim::Phase::GantryProofCompute, 0.5, [&] {
      try {
        attrs = validate_gantry(w_.ledger, *tc_request_, proof, *seen_, cfg_.epsilon_m);
      } catch (const Error& e) {
        outcome = describe(e);
      }
    });
    user_.work(d, [this, attrs = std::move(attrs), outcome] {
      verifying_ = false;
      if (!attrs) return abort_user(outcome);
      tr_.gantry_attributes = *attrs;
      close("ok");
      gantry_validated_ = true;
      open("user_proof");
      if (stashed_request_) {
        auto req = std::move(*stashed_request_);
        stashed_request_.reset();
        on_client_request(req);
      } else {
        arm(user_, user_wait_, cfg_.response_timeout_s, "client_request");
      }
    });
  }

  void on_gantry_decline() {
    if (is_open("gantry_proof")) abort_user("gantry declined to prove");
  }

  void on_client_request(const wallet::ProofRequest& request) {
    if (!gantry_validated_) {
      stashed_request_ = request;
      return;
    }
    if (answered_client_) return;
    answered_client_ = true;
    ++user_wait_;
    Bytes reply;
    const double d = cost(sim::Phase::UserProofCompute, 0.5, [&] {
      try {
        reply = frame(kProof, wallet::create_proof(w_.user, request).encode());
      } catch (const Error& e) {
        event("user cannot prove: " + describe(e));
        reply = frame(kDecline, as_bytes(to_string(e.code())));
      }
    });
    user_.work(d, [this, reply = std::move(reply)] {
      const auto tag = static_cast<Tag>(reply.front());
      user_channel_->send(reply, kind_of(tag));
      arm(user_, user_wait_, cfg_.response_timeout_s, "payment_request");
    });
  }

  void on_payment_request(PaymentRequest request) {
    if (!is_open("payment_request") || paying_) return;
    paying_ = true;
    ++user_wait_;
    close("ok");
    open("payment_attach");

    if (faults_.wrong_payment_nonce) request.payment_nonce.bytes[0] ^= 0xff;
    if (faults_.wrong_payment_amount) request.amount += 1;
    if (faults_.wrong_payment_address)
      request.pay_to = tangle::Address::from_verkey(w_.operator_.verkey(w_.operator_did));

    tangle::Bundle bundle;
    try {
      bundle = build_payment(w_.user, w_.user_payment_did, w_.user_node, request,
                             static_cast<std::int64_t>(std::llround(engine_.now() * 1e6)));
    } catch (const Error& e) {
      return abort_user(describe(e));
    }

    std::pair<tangle::TxId, tangle::TxId> tips;
    const double t0 = engine_.now();
    const double d_tip =
        cost(sim::Phase::TipSelection, 1.0, [&] { tips = w_.user_node.tip_select(proto_rng_); });
    user_.work(d_tip, [this, bundle = std::move(bundle), tips, t0] {
      step("tip_selection", t0, engine_.now());
      const double t1 = engine_.now();
      tangle::Bundle attached;
      double d_pow = 0.0;
      const auto& pow = cfg_.latency.pow;
      auto search = [&] {
        attached = tangle::chain_and_pow(bundle, tips.first, tips.second, cfg_.difficulty_bits);
      };
      if (pow.is_live()) {
        d_pow = cost(sim::Phase::Pow, 1.0, search);
      } else {
        search();
        for (std::size_t i = 0; i < attached.transactions.size(); ++i)
          d_pow += pow.sample(timing_rng_);
      }
      user_.work(d_pow, [this, attached = std::move(attached), t1] {
        step("pow", t1, engine_.now());
        const double t2 = engine_.now();
        try {
          w_.user_node.apply(attached);
        } catch (const Error& e) {
          return abort_user(describe(e));
        }
        gossip_.broadcast(attached, [this, t2] {
          step("broadcast", t2, engine_.now());
          if (is_open("payment_attach")) close("ok");
        });
      });
    });
  }

  // ---- gantry ----

  std::optional<pairwise::PairwiseRecord> relationship_for(const Bytes& envelope) const {
    try {
      auto env = pairwise::Envelope::decode(envelope);
      auto my_did = w_.gantry.did_for_verkey(env.recipient);
      if (!my_did) return std::nullopt;
      const auto* r = w_.gantry.pairwise().find_by_my_did(*my_did);
      if (!r || !r->complete() || *r->their_verkey != env.sender) return std::nullopt;
      return *r;
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  void gantry_receive(const sim::WireMessage& m) {
    if (m.kind == "conn_request") return on_conn_request(m.payload);
    if (m.kind == "echo") return on_echo(m.payload);
    if (!is_channel_kind(m.kind)) return;

    auto record = relationship_for(m.payload);
    if (!record) {
      event("gantry dropped " + m.kind + " from an unknown relationship");
      return;
    }
    if (!gantry_channel_ || gantry_channel_->record().my_did != record->my_did)
      gantry_channel_.emplace(w_.gantry, *record, [this](const std::string& label, Bytes env) {
        net_.send("gantry", "user", label, std::move(env));
      });
    Bytes plain;
    try {
      plain = gantry_channel_->receive(m.payload);
    } catch (const Error& e) {
      event("gantry dropped " + m.kind + ": " + describe(e));
      return;
    }
    try {
      codec::Reader r(plain);
      const auto tag = static_cast<Tag>(r.u8());
      auto body = r.bytes();
      r.expect_end();
      switch (tag) {
        case kProofRequest: return on_tolling_request(wallet::ProofRequest::decode(body));
        case kProof: return on_user_proof(wallet::Proof::decode(body));
        case kDecline: return on_user_decline(std::string(body.begin(), body.end()));
        case kPaymentRequest: return;
      }
    } catch (const Error& e) {
      event("gantry rejected malformed " + m.kind + ": " + describe(e));
    }
  }

  void on_conn_request(const Bytes& payload) {
    pairwise::ConnectionRequest req;
    try {
      req = pairwise::ConnectionRequest::decode(payload);
    } catch (const Error& e) {
      event("gantry rejected connection request: " + describe(e));
      return;
    }
    Bytes response;
    std::string failure;
    const double d = cost(sim::Phase::HandshakeCompute, 0.5, [&] {
      try {
        response = pairwise::respond_connection(w_.gantry, req, {}, engine_.now());
      } catch (const Error& e) {
        failure = describe(e);
      }
    });
    gantry_.work(d, [this, response = std::move(response), failure]() mutable {
      if (!failure.empty()) return event("gantry rejected connection request: " + failure);
      net_.send("gantry", "user", "conn_response", std::move(response));
    });
  }

  void on_echo(const Bytes& payload) {
    if (faults_.unresponsive_peer) {
      event("gantry ignored echo");
      return;
    }
    std::optional<Bytes> reply;
    const double d = cost(sim::Phase::HandshakeCompute, 0.5,
                          [&] { reply = pairwise::answer_echo(w_.gantry, payload); });
    if (!reply) return event("gantry could not answer echo");
    gantry_.work(d, [this, reply = std::move(*reply)]() mutable {
      net_.send("gantry", "user", "echo", std::move(reply));
    });
  }

  void on_tolling_request(const wallet::ProofRequest& request) {
    if (client_request_) return;
    // The gantry presents what it holds; trust in the issuer is the user's check.
    auto presented = request;
    presented.accepted_issuers.clear();
    Bytes reply;
    const double d = cost(sim::Phase::GantryProofCompute, 0.5, [&] {
      try {
        reply = frame(kProof, wallet::create_proof(w_.gantry, presented).encode());
      } catch (const Error& e) {
        reply = frame(kDecline, as_bytes(to_string(e.code())));
      }
    });
    client_request_ = user_proof_request({w_.operator_did}, proto_rng_);
    gantry_.work(d, [this, reply = std::move(reply)] {
      gantry_channel_->send(reply, kind_of(static_cast<Tag>(reply.front())));
      gantry_channel_->send(frame(kProofRequest, client_request_->encode()),
                            kind_of(kProofRequest));
      arm(gantry_, gantry_wait_, cfg_.response_timeout_s, "user_proof");
    });
  }

  void on_user_proof(const wallet::Proof& proof) {
    if (!client_request_ || user_answered_) return;
    user_answered_ = true;
    ++gantry_wait_;
    std::optional<wallet::Attributes> attrs;
    std::string outcome = "ok";
    const double d = cost(sim::Phase::UserProofCompute, 0.5, [&] {
      try {
        attrs = validate_user(w_.ledger, *client_request_, proof);
      } catch (const Error& e) {
        outcome = describe(e);
      }
    });
    gantry_.work(d, [this, attrs = std::move(attrs), outcome] {
      if (is_open("user_proof")) close(outcome);
      if (!attrs) return event("user validation failed: " + outcome);
      tr_.user_attributes = *attrs;
      issue_payment_request();
    });
  }

  void on_user_decline(const std::string& reason) {
    if (!client_request_ || user_answered_) return;
    user_answered_ = true;
    ++gantry_wait_;
    event("user declined identification: " + reason);
    if (is_open("user_proof")) close("declined");
  }

  void issue_payment_request() {
    if (!user_done_) open("payment_request");
    PaymentRequest req;
    try {
      req = request_payment(cfg_.vehicle_class, cfg_.rates, w_.pay_to, proto_rng_);
    } catch (const Error& e) {
      event("payment request not issued: " + describe(e));
      if (is_open("payment_request")) close(describe(e));
      return;
    }
    issued_ = req;
    tr_.payment = req;
    // Back-office hand-off: the operator starts watching for this payment.
    deadline_ = engine_.now() + cfg_.deadline_s;
    engine_.schedule_after(cfg_.poll_interval_s, [this] { poll(); });
    gantry_channel_->send(frame(kPaymentRequest, req.encode()), kind_of(kPaymentRequest));
  }

  // ---- operator ----

  void poll() {
    if (finalized_) return;
    if (payment_settled(w_.operator_node, *issued_)) return settle();
    if (engine_.now() >= deadline_) return enforce("no matching payment by the deadline");
    engine_.schedule_at(std::min(engine_.now() + cfg_.poll_interval_s, deadline_), [this] { poll(); });
  }

  double last_phase_end() const {
    return tr_.phases.empty() ? 0.0 : tr_.phases.back().end;
  }

  void settle() {
    finalized_ = true;
    if (open_) close("interrupted");
    tr_.phases.push_back(PhaseRecord{"settlement", last_phase_end(), engine_.now(), "settled"});
    tr_.status = Status::Settled;
    tr_.settled_at = engine_.now();
  }

  void enforce(std::string reason) {
    if (finalized_) return;
    finalized_ = true;
    if (open_) close("interrupted");
    tr_.phases.push_back(PhaseRecord{"settlement", last_phase_end(), engine_.now(), "enforcement"});
    tr_.status = Status::Enforcement;
    EnforcementRecord rec;
    if (auto it = tr_.user_attributes.find("vehicle_plate"); it != tr_.user_attributes.end())
      rec.plate = it->second;
    rec.session_ref = fmt::format("{}/{}", w_.announcement.gantry_label, tr_.session_id);
    if (issued_) rec.payment_nonce = issued_->payment_nonce;
    rec.deadline_missed_at = engine_.now();
    rec.reason = std::move(reason);
    tr_.enforcement = std::move(rec);
  }

  World& w_;
  const SessionConfig& cfg_;
  const Faults& faults_;
  SessionTranscript tr_;

  sim::Engine engine_;
  Rng net_rng_;
  Rng timing_rng_;
  Rng gossip_rng_;
  Rng proto_rng_;
  sim::Network net_;
  tangle::Gossip gossip_;
  sim::Agent user_;
  sim::Agent gantry_;

  std::optional<PhaseRecord> open_;
  unsigned channel_seen_ = 0;

  // user side
  bool triggered_ = false;
  bool user_done_ = false;
  bool awaiting_response_ = false;
  bool verifying_ = false;
  bool gantry_validated_ = false;
  bool answered_client_ = false;
  bool paying_ = false;
  std::uint64_t user_wait_ = 0;
  std::optional<Announcement> seen_;
  std::optional<pairwise::PairwiseRecord> reuse_;
  crypto::Nonce echo_nonce_;
  std::optional<pairwise::PairwiseChannel> user_channel_;
  std::optional<wallet::ProofRequest> tc_request_;
  std::optional<wallet::ProofRequest> stashed_request_;

  // gantry side
  std::uint64_t gantry_wait_ = 0;
  bool user_answered_ = false;
  std::optional<pairwise::PairwiseChannel> gantry_channel_;
  std::optional<wallet::ProofRequest> client_request_;

  // operator side
  std::optional<PaymentRequest> issued_;
  double deadline_ = 0.0;
  bool finalized_ = false;
};

}  // namespace

SessionTranscript run_toll_session(World& world, const SessionConfig& config, std::uint64_t seed,
                                   const Faults& faults) {
  Session session(world, config, seed, faults);
  return session.run();
}

}  // namespace paygo::tolling
