#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paygo/identity_ledger.hpp"
#include "paygo/latency.hpp"
#include "paygo/pairwise.hpp"
#include "paygo/tangle.hpp"
#include "paygo/wallet.hpp"

namespace paygo::tolling {

inline constexpr std::string_view kTollingCharge = "Tolling Charge";
inline constexpr std::string_view kClientIdentification = "Client Identification";

/// Attribute names of the two credential schemas.
inline const std::vector<std::string> kGantryAttributes{"name", "localization", "identifier"};
inline const std::vector<std::string> kUserAttributes{"name", "vat_number", "vehicle_plate"};

/// Toll per vehicle class, in token units.
class RateTable {
 public:
  RateTable() = default;
  /// Errc::InvalidConfig if any amount is not positive.
  explicit RateTable(std::map<std::string, tangle::Amount> rates);

  /// Errc::UnknownVehicleClass.
  tangle::Amount at(const std::string& vehicle_class) const;
  const std::map<std::string, tangle::Amount>& rates() const { return rates_; }

 private:
  std::map<std::string, tangle::Amount> rates_;
};

/// Plaintext, periodically broadcast by a gantry.
struct Announcement {
  std::string gantry_label;
  pairwise::GeoPoint location;
  double broadcast_interval_s = 1.0;

  Bytes encode() const;
  static Announcement decode(ByteView data);
};

struct PaymentRequest {
  tangle::Amount amount = 0;
  tangle::Address pay_to;
  crypto::Nonce payment_nonce;

  Bytes encode() const;
  static PaymentRequest decode(ByteView data);
  friend bool operator==(const PaymentRequest&, const PaymentRequest&) = default;
};

enum class Status { Settled, Enforcement };
std::string_view to_string(Status status);

struct PhaseRecord {
  std::string name;
  double start = 0.0;
  double end = 0.0;
  std::string outcome = "ok";

  double elapsed() const { return end - start; }
};

struct EnforcementRecord {
  std::string plate;  // empty unless disclosed during validation
  std::string session_ref;
  std::optional<crypto::Nonce> payment_nonce;
  double deadline_missed_at = 0.0;
  std::string evidence = "camera-capture-placeholder";
  std::string reason;
};

struct SessionTranscript {
  std::uint64_t session_id = 0;
  std::string direction;
  std::string channel = "none";  // new | reused | none
  std::vector<PhaseRecord> phases;  // top level, in time order
  std::vector<PhaseRecord> steps;   // tip_selection, pow, broadcast inside payment_attach
  wallet::Attributes gantry_attributes;
  wallet::Attributes user_attributes;
  std::optional<PaymentRequest> payment;
  Status status = Status::Enforcement;
  std::optional<double> settled_at;
  std::optional<EnforcementRecord> enforcement;
  std::vector<std::string> events;  // failures and fallbacks, in order
  std::map<std::string, std::size_t> messages;
  std::size_t message_count = 0;

  /// Searches phases, then steps.
  const PhaseRecord* phase(std::string_view name) const;
  /// One JSON object, fixed key order, no trailing newline.
  std::string to_json_line() const;
};

struct SessionConfig {
  /// Phases whose distribution is Live are timed on the wall clock.
  sim::LatencyModel latency = sim::LatencyModel::calibrated();
  unsigned difficulty_bits = 8;
  RateTable rates{{{"light", 5}, {"heavy", 12}}};
  std::string vehicle_class = "light";
  std::string direction = "northbound";
  double deadline_s = 60.0;
  double epsilon_m = 100.0;
  double reestablish_timeout_s = 2.0;
  double response_timeout_s = 5.0;
  double poll_interval_s = 0.25;
  double announcement_interval_s = 1.0;
};

/// Deliberate faults for robustness testing. All off on the honest path.
struct Faults {
  bool wrong_payment_nonce = false;
  bool wrong_payment_amount = false;
  bool wrong_payment_address = false;
  bool unresponsive_peer = false;  // gantry ignores echo pings
  /// Corrupt the n-th encrypted channel message after the handshake.
  std::optional<unsigned> tamper_channel_message;
};

struct ProvisionOptions {
  tangle::Amount user_balance = 1000;
  bool user_has_credential = true;
  bool gantry_self_issued = false;
  /// Gantry's credential claims a localization this far (metres, due north)
  /// from where it announces itself.
  double gantry_location_offset_m = 0.0;
  /// Pre-establish a pairwise relationship as if from an earlier pass.
  bool known_relationship = false;
  wallet::Attributes user_attributes{
      {"name", "Ana Silva"}, {"vat_number", "PT123456789"}, {"vehicle_plate", "AA-00-BB"}};
  std::string gantry_label = "A1-km-212";
  std::string gantry_identifier = "GNT-0212";
  pairwise::GeoPoint gantry_location{40.6405, -8.6538};
};

/// Ledgers, wallets and funded payment addresses for one user, one gantry
/// and the road operator, already past onboarding.
struct World {
  identity::IdentityLedger ledger;
  wallet::Wallet trustee;
  wallet::Wallet operator_;
  wallet::Wallet gantry;
  wallet::Wallet user;
  std::string trustee_did;
  std::string operator_did;
  std::string gantry_did;
  std::string user_did;
  identity::SeqNo tolling_cred_def = 0;
  identity::SeqNo client_cred_def = 0;
  std::string user_payment_did;
  std::string gantry_payment_did;
  tangle::Address user_address;
  tangle::Address pay_to;
  Announcement announcement;
  tangle::TangleState user_node;      // the node the user's app attaches through
  tangle::TangleState operator_node;  // replica the operator watches
  std::uint64_t sessions_run = 0;
};

World provision(const ProvisionOptions& options, std::uint64_t seed);

// ---- protocol steps --------------------------------------------------------

/// Reuse decision for an announcement: the known relationship to try, or
/// nullopt for a fresh handshake.
std::optional<pairwise::PairwiseRecord> on_announcement(const wallet::Wallet& user,
                                                        const Announcement& announcement,
                                                        double epsilon_m);

wallet::ProofRequest gantry_proof_request(const std::vector<std::string>& operator_dids, Rng& rng);
wallet::ProofRequest user_proof_request(const std::vector<std::string>& operator_dids, Rng& rng);

/// Verifies the gantry's Tolling Charge proof and that its localization lies
/// within epsilon_m of the announced position (Errc::LocationMismatch).
wallet::Attributes validate_gantry(const identity::IdentityLedger& ledger,
                                   const wallet::ProofRequest& request, const wallet::Proof& proof,
                                   const Announcement& announcement, double epsilon_m);

/// Parses a "lat,lon" localization attribute; Errc::LocationMismatch if it
/// does not parse.
pairwise::GeoPoint parse_localization(std::string_view text);
std::string format_localization(const pairwise::GeoPoint& point);

wallet::Attributes validate_user(const identity::IdentityLedger& ledger,
                                 const wallet::ProofRequest& request, const wallet::Proof& proof);

/// Errc::UnknownVehicleClass.
PaymentRequest request_payment(const std::string& vehicle_class, const RateTable& rates,
                               const tangle::Address& pay_to, Rng& rng);

/// Builds the value bundle for `request` from the user's payment DID.
/// Errc::InsufficientBalance if `node` shows too little at `from`.
tangle::Bundle build_payment(const wallet::Wallet& user, std::string_view payment_did,
                             const tangle::TangleState& node, const PaymentRequest& request,
                             std::int64_t timestamp_us = 0);

/// Synchronous build + attach on `node`.
tangle::Bundle execute_payment(const wallet::Wallet& user, std::string_view payment_did,
                               tangle::TangleState& node, const PaymentRequest& request,
                               unsigned difficulty_bits, Rng& rng);

/// Settled iff the operator's replica holds a bundle matching the full
/// (address, nonce, amount) triple.
bool payment_settled(const tangle::TangleState& operator_node, const PaymentRequest& request);

/// Runs one complete session on a fresh simulated clock. Never throws for
/// protocol failures: they end up in the transcript as Enforcement.
SessionTranscript run_toll_session(World& world, const SessionConfig& config, std::uint64_t seed,
                                   const Faults& faults = {});

}  // namespace paygo::tolling
