#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paygo/crypto.hpp"

namespace paygo::pairwise {

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

/// Great-circle distance in metres (haversine, mean Earth radius).
double distance_m(const GeoPoint& a, const GeoPoint& b);

/// One pairwise relationship as seen from one side.
struct PairwiseRecord {
  std::string my_did;
  crypto::Verkey my_verkey;
  std::string their_did;
  std::optional<crypto::Verkey> their_verkey;  // set once the handshake completes
  GeoPoint peer_location;
  double established_at = 0.0;

  bool complete() const { return their_verkey.has_value() && !their_did.empty(); }
  friend bool operator==(const PairwiseRecord&, const PairwiseRecord&) = default;
};

/// Relationships known to one wallet, plus outstanding connection requests
/// keyed by the nonce the responder must echo.
class PairwiseStore {
 public:
  /// Inserts, or replaces the record with the same my_did.
  void upsert(PairwiseRecord record);
  bool erase_by_their_did(std::string_view their_did);

  const PairwiseRecord* find_by_my_did(std::string_view my_did) const;
  const PairwiseRecord* find_by_their_did(std::string_view their_did) const;
  const std::vector<PairwiseRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  struct Pending {
    crypto::Nonce nonce;
    std::string my_did;
  };
  void add_pending(Pending pending);
  /// Removes and returns the pending request for `my_did` if its nonce matches.
  std::optional<Pending> take_pending(std::string_view my_did, const crypto::Nonce& nonce);
  const Pending* pending_for(std::string_view my_did) const;
  std::size_t pending_count() const { return pending_.size(); }

 private:
  std::vector<PairwiseRecord> records_;
  std::vector<Pending> pending_;
};

/// Nearest known peer within epsilon_m of `observed`; ties go to the
/// lexicographically lowest their_did. Only completed records are considered.
std::optional<PairwiseRecord> lookup_known_peer(const PairwiseStore& store, const GeoPoint& observed,
                                                double epsilon_m);

}  // namespace paygo::pairwise
