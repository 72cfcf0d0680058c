#include "paygo/pairwise.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "paygo/error.hpp"
#include "paygo/identity_ledger.hpp"

namespace paygo::pairwise {

// ---- store -----------------------------------------------------------------

double distance_m(const GeoPoint& a, const GeoPoint& b) {
  constexpr double kEarthRadiusM = 6371008.8;
  constexpr double kRad = std::numbers::pi / 180.0;
  const double dlat = (b.lat_deg - a.lat_deg) * kRad;
  const double dlon = (b.lon_deg - a.lon_deg) * kRad;
  const double h = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(a.lat_deg * kRad) * std::cos(b.lat_deg * kRad) * std::sin(dlon / 2) *
                       std::sin(dlon / 2);
  return 2.0 * kEarthRadiusM * std::asin(std::min(1.0, std::sqrt(h)));
}

void PairwiseStore::upsert(PairwiseRecord record) {
  auto it = std::find_if(records_.begin(), records_.end(),
                         [&](const auto& r) { return r.my_did == record.my_did; });
  if (it != records_.end())
    *it = std::move(record);
  else
    records_.push_back(std::move(record));
}

bool PairwiseStore::erase_by_their_did(std::string_view their_did) {
  auto before = records_.size();
  std::erase_if(records_, [&](const auto& r) { return r.their_did == their_did; });
  return records_.size() != before;
}

const PairwiseRecord* PairwiseStore::find_by_my_did(std::string_view my_did) const {
  for (const auto& r : records_)
    if (r.my_did == my_did) return &r;
  return nullptr;
}

const PairwiseRecord* PairwiseStore::find_by_their_did(std::string_view their_did) const {
  for (const auto& r : records_)
    if (r.their_did == their_did) return &r;
  return nullptr;
}

void PairwiseStore::add_pending(Pending pending) { pending_.push_back(std::move(pending)); }

const PairwiseStore::Pending* PairwiseStore::pending_for(std::string_view my_did) const {
  for (const auto& p : pending_)
    if (p.my_did == my_did) return &p;
  return nullptr;
}

std::optional<PairwiseStore::Pending> PairwiseStore::take_pending(std::string_view my_did,
                                                                  const crypto::Nonce& nonce) {
  auto it = std::find_if(pending_.begin(), pending_.end(),
                         [&](const auto& p) { return p.my_did == my_did && p.nonce == nonce; });
  if (it == pending_.end()) return std::nullopt;
  Pending out = std::move(*it);
  pending_.erase(it);
  return out;
}

std::optional<PairwiseRecord> lookup_known_peer(const PairwiseStore& store, const GeoPoint& observed,
                                                double epsilon_m) {
  if (!(epsilon_m > 0.0)) throw Error(Errc::InvalidConfig, "epsilon_m must be positive");
  const PairwiseRecord* best = nullptr;
  double best_d = 0.0;
  for (const auto& r : store.records()) {
    if (!r.complete()) continue;
    const double d = distance_m(r.peer_location, observed);
    if (d > epsilon_m) continue;
    if (!best || d < best_d || (d == best_d && r.their_did < best->their_did)) {
      best = &r;
      best_d = d;
    }
  }
  if (!best) return std::nullopt;
  return *best;
}

// ---- messages --------------------------------------------------------------

namespace {

void write_nonce(codec::Writer& w, const crypto::Nonce& n) { w.bytes(n.bytes); }

crypto::Nonce read_nonce(codec::Reader& r) {
  auto b = r.bytes();
  if (b.size() != crypto::kNonceSize) throw Error(Errc::MalformedMessage, "nonce width");
  crypto::Nonce n;
  std::copy(b.begin(), b.end(), n.bytes.begin());
  return n;
}

template <typename Msg>
Msg decode_did_message(ByteView data) {
  codec::Reader r(data);
  Msg m;
  m.did = r.str();
  m.verkey.bytes = r.bytes();
  m.nonce = read_nonce(r);
  r.expect_end();
  return m;
}

template <typename Msg>
Bytes encode_did_message(const Msg& m) {
  codec::Writer w;
  w.str(m.did).bytes(m.verkey.bytes);
  write_nonce(w, m.nonce);
  return std::move(w).take();
}

}  // namespace

Bytes ConnectionRequest::encode() const { return encode_did_message(*this); }

ConnectionRequest ConnectionRequest::decode(ByteView data) {
  ConnectionRequest req;
  try {
    req = decode_did_message<ConnectionRequest>(data);
  } catch (const Error& e) {
    throw Error(Errc::MalformedRequest, e.what());
  }
  if (req.did.empty() || req.verkey.bytes.empty())
    throw Error(Errc::MalformedRequest, "connection request lacks did or verkey");
  return req;
}

Bytes ConnectionResponse::encode() const { return encode_did_message(*this); }

ConnectionResponse ConnectionResponse::decode(ByteView data) {
  return decode_did_message<ConnectionResponse>(data);
}

Bytes Envelope::encode() const {
  codec::Writer w;
  w.bytes(sender.bytes).bytes(recipient.bytes).bytes(ciphertext);
  return std::move(w).take();
}

Envelope Envelope::decode(ByteView data) {
  codec::Reader r(data);
  Envelope e;
  e.sender.bytes = r.bytes();
  e.recipient.bytes = r.bytes();
  e.ciphertext = r.bytes();
  r.expect_end();
  return e;
}

Bytes seal(wallet::Wallet& wallet, std::string_view my_did, const crypto::Verkey& their_verkey,
           ByteView payload) {
  Envelope e{wallet.verkey(my_did), their_verkey, wallet.auth_encrypt(my_did, their_verkey, payload)};
  return e.encode();
}

namespace {

/// Opens an envelope addressed to one of `wallet`'s DIDs from `expected_sender`.
Bytes open_from(const wallet::Wallet& wallet, std::string_view my_did,
                const crypto::Verkey& expected_sender, ByteView data) {
  Envelope e;
  try {
    e = Envelope::decode(data);
  } catch (const Error&) {
    throw Error(Errc::AuthFailure, "envelope does not parse");
  }
  if (e.sender != expected_sender || e.recipient != wallet.verkey(my_did))
    throw Error(Errc::AuthFailure, "envelope is not between this channel's parties");
  try {
    return wallet.auth_decrypt(my_did, e.sender, e.ciphertext);
  } catch (const Error& err) {
    throw Error(Errc::AuthFailure, err.what());
  }
}

}  // namespace

// ---- handshake -------------------------------------------------------------

ConnectionRequest initiate_connection(wallet::Wallet& user) {
  auto info = user.create_did();
  ConnectionRequest req{info.did, info.verkey, crypto::new_nonce(user.rng())};
  user.pairwise().add_pending({req.nonce, info.did});
  return req;
}

Bytes respond_connection(wallet::Wallet& gantry, const ConnectionRequest& request,
                         const GeoPoint& peer_location, double now) {
  if (request.did.empty() || request.verkey.bytes.empty() ||
      identity::did_from_verkey(request.verkey) != request.did)
    throw Error(Errc::MalformedRequest, "connection request did does not match its verkey");
  auto info = gantry.create_did();
  gantry.pairwise().upsert(
      PairwiseRecord{info.did, info.verkey, request.did, request.verkey, peer_location, now});
  ConnectionResponse resp{info.did, info.verkey, request.nonce};
  return seal(gantry, info.did, request.verkey, resp.encode());
}

PairwiseRecord complete_connection(wallet::Wallet& user, ByteView response_envelope,
                                   const GeoPoint& peer_location, double now) {
  Envelope e;
  try {
    e = Envelope::decode(response_envelope);
  } catch (const Error& err) {
    throw Error(Errc::DecryptFailure, err.what());
  }
  auto my_did = user.did_for_verkey(e.recipient);
  if (!my_did || !user.pairwise().pending_for(*my_did))
    throw Error(Errc::NonceMismatch, "response matches no pending connection request");

  Bytes plain;
  try {
    plain = user.auth_decrypt(*my_did, e.sender, e.ciphertext);
  } catch (const Error& err) {
    throw Error(Errc::DecryptFailure, err.what());
  }
  ConnectionResponse resp;
  try {
    resp = ConnectionResponse::decode(plain);
  } catch (const Error& err) {
    throw Error(Errc::DecryptFailure, err.what());
  }
  if (resp.verkey != e.sender || identity::did_from_verkey(resp.verkey) != resp.did)
    throw Error(Errc::DecryptFailure, "response identity does not match its sender key");
  if (!user.pairwise().take_pending(*my_did, resp.nonce))
    throw Error(Errc::NonceMismatch, "echoed nonce differs from the request");

  PairwiseRecord record{*my_did, user.verkey(*my_did), resp.did, resp.verkey, peer_location, now};
  user.pairwise().upsert(record);
  return record;
}

// ---- channel ---------------------------------------------------------------

PairwiseChannel::PairwiseChannel(wallet::Wallet& wallet, PairwiseRecord record, Transport transport)
    : wallet_(&wallet), record_(std::move(record)), transport_(std::move(transport)) {
  if (!record_.complete()) throw Error(Errc::InvalidRecord, "channel needs a completed relationship");
}

void PairwiseChannel::send(ByteView payload, const std::string& label) {
  transport_(label, seal(*wallet_, record_.my_did, *record_.their_verkey, payload));
}

Bytes PairwiseChannel::receive(ByteView envelope) const {
  return open_from(*wallet_, record_.my_did, *record_.their_verkey, envelope);
}

// ---- echo ------------------------------------------------------------------

Bytes Echo::encode() const {
  codec::Writer w;
  w.u8(reply ? 1 : 0);
  write_nonce(w, nonce);
  return std::move(w).take();
}

Echo Echo::decode(ByteView data) {
  codec::Reader r(data);
  Echo e;
  e.reply = r.u8() != 0;
  e.nonce = read_nonce(r);
  r.expect_end();
  return e;
}

Bytes make_echo(wallet::Wallet& user, const PairwiseRecord& record, const crypto::Nonce& nonce) {
  if (!record.complete()) throw Error(Errc::InvalidRecord, "echo needs a completed relationship");
  return seal(user, record.my_did, *record.their_verkey, Echo{nonce, false}.encode());
}

std::optional<Bytes> answer_echo(wallet::Wallet& gantry, ByteView ping_envelope) {
  Envelope e;
  try {
    e = Envelope::decode(ping_envelope);
  } catch (const Error&) {
    return std::nullopt;
  }
  auto my_did = gantry.did_for_verkey(e.recipient);
  if (!my_did) return std::nullopt;
  const auto* record = gantry.pairwise().find_by_my_did(*my_did);
  if (!record || !record->complete() || *record->their_verkey != e.sender) return std::nullopt;
  try {
    auto ping = Echo::decode(gantry.auth_decrypt(*my_did, e.sender, e.ciphertext));
    if (ping.reply) return std::nullopt;
    return seal(gantry, *my_did, e.sender, Echo{ping.nonce, true}.encode());
  } catch (const Error&) {
    return std::nullopt;
  }
}

void accept_echo_reply(const wallet::Wallet& user, const PairwiseRecord& record, ByteView reply,
                       const crypto::Nonce& expected) {
  auto plain = open_from(user, record.my_did, *record.their_verkey, reply);
  Echo echo;
  try {
    echo = Echo::decode(plain);
  } catch (const Error& e) {
    throw Error(Errc::AuthFailure, e.what());
  }
  if (!echo.reply || echo.nonce != expected)
    throw Error(Errc::NonceMismatch, "echo reply carries the wrong nonce");
}

PairwiseRecord reestablish(wallet::Wallet& user, const PairwiseRecord& record, const Link& link,
                           double timeout) {
  const auto nonce = crypto::new_nonce(user.rng());
  bool done = false;
  link.network.attach(link.local, [&](const sim::WireMessage& msg) {
    if (done || msg.kind != "echo") return;
    try {
      accept_echo_reply(user, record, msg.payload, nonce);
      done = true;
    } catch (const Error&) {
      // wrong or tampered reply: keep waiting until the timeout
    }
  });
  link.network.send(link.local, link.remote, "echo", make_echo(user, record, nonce));
  const bool ok = link.engine.run_until([&] { return done; }, link.engine.now() + timeout);
  link.network.detach(link.local);
  if (!ok) throw Error(Errc::PeerUnresponsive, "no echo reply from " + record.their_did);
  return record;
}

}  // namespace paygo::pairwise
