#pragma once

#include <functional>
#include <optional>
#include <string>

#include "paygo/crypto.hpp"
#include "paygo/engine.hpp"
#include "paygo/network.hpp"
#include "paygo/pairwise_store.hpp"
#include "paygo/wallet.hpp"

namespace paygo::pairwise {

/// Plaintext request opening a relationship: fresh DID, its verkey and the
/// nonce the responder must echo.
struct ConnectionRequest {
  std::string did;
  crypto::Verkey verkey;
  crypto::Nonce nonce;

  Bytes encode() const;
  /// Errc::MalformedRequest on missing fields or undecodable bytes.
  static ConnectionRequest decode(ByteView data);
  friend bool operator==(const ConnectionRequest&, const ConnectionRequest&) = default;
};

struct ConnectionResponse {
  std::string did;
  crypto::Verkey verkey;
  crypto::Nonce nonce;  // echoed from the request

  Bytes encode() const;
  static ConnectionResponse decode(ByteView data);
  friend bool operator==(const ConnectionResponse&, const ConnectionResponse&) = default;
};

/// Authenticated-encryption envelope. Sender and recipient verkeys travel in
/// clear so the recipient can pick its key and authenticate the sender.
struct Envelope {
  crypto::Verkey sender;
  crypto::Verkey recipient;
  Bytes ciphertext;

  Bytes encode() const;
  static Envelope decode(ByteView data);
};

Bytes seal(wallet::Wallet& wallet, std::string_view my_did, const crypto::Verkey& their_verkey,
           ByteView payload);

/// User side: creates a relationship-scoped DID and records the pending request.
ConnectionRequest initiate_connection(wallet::Wallet& user);

/// Gantry side: creates its own relationship DID, stores the relationship and
/// returns the response envelope encrypted to request.verkey.
Bytes respond_connection(wallet::Wallet& gantry, const ConnectionRequest& request,
                         const GeoPoint& peer_location = {}, double now = 0.0);

/// User side: Errc::NonceMismatch when the response correlates with no pending
/// request, Errc::DecryptFailure when it does not authenticate.
PairwiseRecord complete_connection(wallet::Wallet& user, ByteView response_envelope,
                                   const GeoPoint& peer_location, double now);

/// Sends encrypted payloads along one side of an established relationship.
class PairwiseChannel {
 public:
  /// Receives each sealed envelope with a caller-chosen label (the wire kind).
  using Transport = std::function<void(const std::string& label, Bytes envelope)>;

  PairwiseChannel(wallet::Wallet& wallet, PairwiseRecord record, Transport transport);

  const PairwiseRecord& record() const { return record_; }

  void send(ByteView payload, const std::string& label = "channel");
  /// Opens an envelope received on this channel; Errc::AuthFailure if it was
  /// altered or comes from anyone but the peer.
  Bytes receive(ByteView envelope) const;

 private:
  wallet::Wallet* wallet_;
  PairwiseRecord record_;
  Transport transport_;
};

// Echo exchange used to re-establish a known relationship.

struct Echo {
  crypto::Nonce nonce;
  bool reply = false;

  Bytes encode() const;
  static Echo decode(ByteView data);
};

Bytes make_echo(wallet::Wallet& user, const PairwiseRecord& record, const crypto::Nonce& nonce);
/// Gantry side: returns the reply envelope if the ping comes from a known,
/// completed relationship; nullopt otherwise.
std::optional<Bytes> answer_echo(wallet::Wallet& gantry, ByteView ping_envelope);
/// Errc::AuthFailure or Errc::NonceMismatch on a bad reply.
void accept_echo_reply(const wallet::Wallet& user, const PairwiseRecord& record, ByteView reply,
                       const crypto::Nonce& expected);

/// Endpoint names and the simulated medium a blocking reestablish runs over.
struct Link {
  sim::Engine& engine;
  sim::Network& network;
  std::string local;
  std::string remote;
};

/// Sends an echo over `link` and runs the engine until the reply arrives or
/// `timeout` elapses (Errc::PeerUnresponsive). The wallet gains no DIDs.
/// The `link.local` endpoint is owned by this call while it runs and is
/// detached afterwards.
PairwiseRecord reestablish(wallet::Wallet& user, const PairwiseRecord& record, const Link& link,
                           double timeout);

}  // namespace paygo::pairwise
