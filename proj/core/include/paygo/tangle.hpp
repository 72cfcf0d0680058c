#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "paygo/crypto.hpp"
#include "paygo/engine.hpp"
#include "paygo/latency.hpp"
#include "paygo/rng.hpp"

namespace paygo::tangle {

using TxId = crypto::Digest;
using Amount = std::int64_t;

/// Opaque payment address derived from a verkey.
class Address {
 public:
  Address() = default;
  explicit Address(std::string value) : value_(std::move(value)) {}
  static Address from_verkey(const crypto::Verkey& verkey);

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }
  friend bool operator==(const Address&, const Address&) = default;
  friend auto operator<=>(const Address&, const Address&) = default;

 private:
  std::string value_;
};

/// DAG vertex. id = hash(contents || pow_nonce), and that id must end in at
/// least `difficulty` zero bits.
struct TangleTx {
  TxId id;
  TxId trunk;
  TxId branch;
  Address address;
  Amount value = 0;
  Bytes signature_message_fragment;
  crypto::Digest bundle_hash;
  std::uint32_t current_index = 0;
  std::uint32_t last_index = 0;
  std::int64_t timestamp_us = 0;
  std::uint64_t pow_nonce = 0;
  unsigned difficulty = 0;
  bool confirmed = false;

  bool is_genesis() const { return trunk.is_zero() && branch.is_zero(); }
  /// Canonical bytes covered by PoW (everything but id, nonce, difficulty
  /// and the confirmation flag).
  Bytes contents() const;
  TxId compute_id() const;

  friend bool operator==(const TangleTx&, const TangleTx&) = default;
};

/// Member layout of a value bundle at security level 2.
enum BundleSlot : std::uint32_t { kDebit = 0, kCredit = 1, kDebitSignature = 2 };
inline constexpr std::uint32_t kBundleSize = 3;

struct Bundle {
  std::vector<TangleTx> transactions;
  crypto::Digest bundle_hash;

  const TangleTx& debit() const { return transactions.at(kDebit); }
  const TangleTx& credit() const { return transactions.at(kCredit); }
  const TangleTx& signature() const { return transactions.at(kDebitSignature); }
  bool attached() const;
  Amount value_sum() const;
};

/// Hash over the bundle essence: every member's address, value, index and
/// timestamp plus the debit and credit message fragments.
crypto::Digest bundle_essence_hash(const std::vector<TangleTx>& members);

bool pow_valid(const TangleTx& tx);

struct PowResult {
  std::uint64_t nonce = 0;
  std::uint64_t attempts = 0;
};
/// Sequential nonce search from 0; attempts = nonce + 1.
PowResult do_pow(const TangleTx& draft, unsigned difficulty_bits);

class TangleState;

/// Picks one tip. Run twice per attachment.
class TipSelector {
 public:
  virtual ~TipSelector() = default;
  virtual TxId select(const TangleState& state, Rng& rng) const = 0;
};

class UniformTipSelector final : public TipSelector {
 public:
  TxId select(const TangleState& state, Rng& rng) const override;
};

/// A (from, to) pair draws: debit -amount at `from`, credit +amount at `to`
/// with the toll nonce in its fragment, then a zero-value member carrying the
/// sender's verkey and signature over the bundle hash. Errc::NonPositiveAmount.
Bundle build_value_bundle(const crypto::KeyStore& sender_keys, crypto::KeyHandle sender,
                          const Address& from, const Address& to, Amount amount,
                          const crypto::Nonce& message_nonce, std::int64_t timestamp_us = 0);

/// Chains members trunk-wise (index i -> i+1, last -> tip_a; branch -> tip_b)
/// and runs PoW for each, last member first. `on_pow` sees each result.
Bundle chain_and_pow(const Bundle& bundle, const TxId& tip_a, const TxId& tip_b,
                     unsigned difficulty_bits,
                     const std::function<void(const PowResult&)>& on_pow = {});

/// Full DAG ledger replica.
///
/// Mutations go through one owner; const access may be shared.
class TangleState {
 public:
  using Allocations = std::map<Address, Amount>;

  /// Single genesis vertex; Errc::NegativeAllocation.
  static TangleState genesis(const Allocations& initial_allocations);

  const TxId& genesis_id() const { return genesis_id_; }
  const std::set<TxId>& tips() const { return tips_; }
  std::size_t size() const { return txs_.size(); }
  bool contains(const TxId& id) const { return txs_.count(id) > 0; }
  const TangleTx& tx(const TxId& id) const;
  /// Attachment order, genesis first.
  const std::vector<TxId>& order() const { return order_; }
  Amount balance(const Address& address) const;
  const std::map<Address, Amount>& balances() const { return balances_; }
  Amount total_supply() const;

  /// Two independent runs of the tip selector.
  std::pair<TxId, TxId> tip_select(Rng& rng) const;
  void set_tip_selector(std::shared_ptr<const TipSelector> selector);

  /// Checks balance and debit signature, selects tips, runs PoW, applies.
  /// Errors: InsufficientBalance, BadDebitSignature, NonPositiveAmount.
  Bundle attach_bundle(const Bundle& bundle, unsigned difficulty_bits, Rng& rng,
                       const std::function<void(const PowResult&)>& on_pow = {});

  /// Validates an already attached bundle (references, PoW, zero sum,
  /// signature, balance) and inserts it. Returns false if every member is
  /// already present.
  bool apply(const Bundle& bundle);

  /// Bundle crediting `to` with exactly `amount` whose credit fragment
  /// equals `message_nonce`.
  std::optional<Bundle> find_payment(const Address& to, const crypto::Nonce& message_nonce,
                                     Amount amount) const;
  /// Same contract as find_payment, by linear scan of every vertex.
  std::optional<Bundle> find_payment_scan(const Address& to, const crypto::Nonce& message_nonce,
                                          Amount amount) const;
  std::optional<Bundle> bundle(const crypto::Digest& bundle_hash) const;

  /// Test hook; the ledger has no confirmation logic of its own.
  void mark_confirmed(const TxId& id);

  /// One transaction per line, attachment order:
  ///   TX id trunk branch address value fragment_hex bundle_hash index last
  ///      timestamp_us pow_nonce difficulty confirmed
  /// preceded by one ALLOC address amount line per genesis allocation.
  void dump(std::ostream& out) const;
  std::string dump() const;
  /// Rebuilds a state by replaying a dump; every bundle is re-validated.
  static TangleState load(std::istream& in);

 private:
  TangleState() = default;
  void check_value_bundle(const Bundle& bundle) const;
  void insert(const TangleTx& tx);

  std::map<TxId, TangleTx> txs_;
  std::vector<TxId> order_;
  std::set<TxId> tips_;
  std::map<Address, Amount> balances_;
  Allocations allocations_;
  TxId genesis_id_;
  std::map<crypto::Digest, std::vector<TxId>> bundles_;
  std::map<std::pair<Address, crypto::Nonce>, std::vector<crypto::Digest>> payment_index_;
  std::shared_ptr<const TipSelector> selector_ = std::make_shared<UniformTipSelector>();
};

/// Delivers attached bundles to peer replicas after a sampled delay.
class Gossip {
 public:
  Gossip(sim::Engine& engine, sim::Distribution delay, Rng& rng)
      : engine_(engine), delay_(std::move(delay)), rng_(rng) {}

  void add_peer(TangleState& peer) { peers_.push_back(&peer); }

  /// Returns the delivery time. Peers that already hold the bundle ignore
  /// the copy. `on_delivered` runs after every peer has applied it.
  sim::SimTime broadcast(const Bundle& bundle, std::function<void()> on_delivered = {});
  /// Same, with a delay already decided by the caller.
  sim::SimTime broadcast_after(sim::SimTime delay, const Bundle& bundle,
                               std::function<void()> on_delivered = {});

  std::size_t broadcasts() const { return broadcasts_; }

 private:
  sim::Engine& engine_;
  sim::Distribution delay_;
  Rng& rng_;
  std::vector<TangleState*> peers_;
  std::size_t broadcasts_ = 0;
};

}  // namespace paygo::tangle
