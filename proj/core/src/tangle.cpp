#include "paygo/tangle.hpp"

#include <algorithm>
#include <istream>
#include <sstream>

#include "paygo/error.hpp"

namespace paygo::tangle {

namespace {

constexpr std::string_view kAddressDomain = "paygo.address.v1";
constexpr std::string_view kEssenceDomain = "paygo.bundle.v1";
constexpr std::size_t kVerkeyBytes = 32;

std::array<std::uint8_t, 8> nonce_le(std::uint64_t nonce) {
  std::array<std::uint8_t, 8> out{};
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(nonce >> (8 * i));
  return out;
}

}  // namespace

Address Address::from_verkey(const crypto::Verkey& verkey) {
  codec::Writer w;
  w.str(kAddressDomain).bytes(verkey.bytes);
  auto d = crypto::hash(w.data());
  return Address(to_hex(ByteView(d.bytes.data(), 20)));
}

Bytes TangleTx::contents() const {
  codec::Writer w;
  w.bytes(trunk.bytes).bytes(branch.bytes).str(address.str()).i64(value);
  w.bytes(signature_message_fragment).bytes(bundle_hash.bytes);
  w.u32(current_index).u32(last_index).i64(timestamp_us);
  return std::move(w).take();
}

TxId TangleTx::compute_id() const {
  crypto::Hasher h;
  h.update(contents()).update(nonce_le(pow_nonce));
  return h.finish();
}

bool pow_valid(const TangleTx& tx) {
  const auto id = tx.compute_id();
  return id == tx.id && id.trailing_zero_bits() >= tx.difficulty;
}

PowResult do_pow(const TangleTx& draft, unsigned difficulty_bits) {
  crypto::Hasher prefix;
  prefix.update(draft.contents());
  for (std::uint64_t nonce = 0;; ++nonce) {
    auto h = prefix;
    if (h.update(nonce_le(nonce)).finish().trailing_zero_bits() >= difficulty_bits)
      return {nonce, nonce + 1};
  }
}

bool Bundle::attached() const {
  return !transactions.empty() &&
         std::all_of(transactions.begin(), transactions.end(),
                     [](const auto& tx) { return !tx.id.is_zero(); });
}

Amount Bundle::value_sum() const {
  Amount sum = 0;
  for (const auto& tx : transactions) sum += tx.value;
  return sum;
}

crypto::Digest bundle_essence_hash(const std::vector<TangleTx>& members) {
  codec::Writer w;
  w.str(kEssenceDomain).u32(static_cast<std::uint32_t>(members.size()));
  for (const auto& tx : members) {
    w.str(tx.address.str()).i64(tx.value).u32(tx.current_index).u32(tx.last_index).i64(tx.timestamp_us);
    if (tx.current_index != kDebitSignature) w.bytes(tx.signature_message_fragment);
  }
  return crypto::hash(w.data());
}

Bundle build_value_bundle(const crypto::KeyStore& sender_keys, crypto::KeyHandle sender,
                          const Address& from, const Address& to, Amount amount,
                          const crypto::Nonce& message_nonce, std::int64_t timestamp_us) {
  if (amount <= 0) throw Error(Errc::NonPositiveAmount, "bundle amount must be positive");
  std::vector<TangleTx> members(kBundleSize);
  for (std::uint32_t i = 0; i < kBundleSize; ++i) {
    members[i].current_index = i;
    members[i].last_index = kBundleSize - 1;
    members[i].timestamp_us = timestamp_us;
  }
  members[kDebit].address = from;
  members[kDebit].value = -amount;
  members[kCredit].address = to;
  members[kCredit].value = amount;
  members[kCredit].signature_message_fragment.assign(message_nonce.bytes.begin(),
                                                     message_nonce.bytes.end());
  members[kDebitSignature].address = from;
  members[kDebitSignature].value = 0;

  const auto bundle_hash = bundle_essence_hash(members);
  const auto& verkey = sender_keys.verkey(sender);
  auto sig = sender_keys.sign(sender, bundle_hash.bytes);
  Bytes fragment = verkey.bytes;
  fragment.insert(fragment.end(), sig.bytes.begin(), sig.bytes.end());
  members[kDebitSignature].signature_message_fragment = std::move(fragment);
  for (auto& tx : members) tx.bundle_hash = bundle_hash;
  return Bundle{std::move(members), bundle_hash};
}

Bundle chain_and_pow(const Bundle& bundle, const TxId& tip_a, const TxId& tip_b,
                     unsigned difficulty_bits, const std::function<void(const PowResult&)>& on_pow) {
  Bundle out = bundle;
  auto& txs = out.transactions;
  for (std::size_t k = txs.size(); k-- > 0;) {
    auto& tx = txs[k];
    tx.trunk = (k + 1 == txs.size()) ? tip_a : txs[k + 1].id;
    tx.branch = tip_b;
    tx.difficulty = difficulty_bits;
    tx.confirmed = false;
    const auto pow = do_pow(tx, difficulty_bits);
    tx.pow_nonce = pow.nonce;
    tx.id = tx.compute_id();
    if (on_pow) on_pow(pow);
  }
  return out;
}

// ---- tip selection ---------------------------------------------------------

TxId UniformTipSelector::select(const TangleState& state, Rng& rng) const {
  const auto& tips = state.tips();
  if (tips.empty()) throw Error(Errc::NoTips, "tangle has no tips");
  auto it = tips.begin();
  std::advance(it, static_cast<std::ptrdiff_t>(rng.below(tips.size())));
  return *it;
}

// ---- state -----------------------------------------------------------------

TangleState TangleState::genesis(const Allocations& initial_allocations) {
  TangleState s;
  codec::Writer w;
  w.str("paygo.genesis.v1").u32(static_cast<std::uint32_t>(initial_allocations.size()));
  for (const auto& [address, amount] : initial_allocations) {
    if (amount < 0)
      throw Error(Errc::NegativeAllocation, "negative allocation for " + address.str());
    w.str(address.str()).i64(amount);
    if (amount > 0) s.balances_[address] = amount;
  }
  s.allocations_ = initial_allocations;
  TangleTx g;
  g.signature_message_fragment = std::move(w).take();
  g.id = g.compute_id();
  s.genesis_id_ = g.id;
  s.order_.push_back(g.id);
  s.tips_.insert(g.id);
  s.txs_.emplace(g.id, std::move(g));
  return s;
}

const TangleTx& TangleState::tx(const TxId& id) const {
  auto it = txs_.find(id);
  if (it == txs_.end()) throw Error(Errc::NotFound, "transaction " + id.hex());
  return it->second;
}

Amount TangleState::balance(const Address& address) const {
  auto it = balances_.find(address);
  return it == balances_.end() ? 0 : it->second;
}

Amount TangleState::total_supply() const {
  Amount sum = 0;
  for (const auto& [a, v] : balances_) sum += v;
  return sum;
}

void TangleState::set_tip_selector(std::shared_ptr<const TipSelector> selector) {
  selector_ = std::move(selector);
}

std::pair<TxId, TxId> TangleState::tip_select(Rng& rng) const {
  auto a = selector_->select(*this, rng);
  auto b = selector_->select(*this, rng);
  return {a, b};
}

void TangleState::check_value_bundle(const Bundle& bundle) const {
  const auto& txs = bundle.transactions;
  if (txs.size() != kBundleSize)
    throw Error(Errc::InvalidTransaction, "value bundle must have three members");
  for (std::uint32_t i = 0; i < kBundleSize; ++i) {
    if (txs[i].current_index != i || txs[i].last_index != kBundleSize - 1)
      throw Error(Errc::InvalidTransaction, "bundle member indices out of order");
    if (txs[i].bundle_hash != bundle.bundle_hash)
      throw Error(Errc::InvalidTransaction, "member bundle hash differs");
  }
  if (bundle_essence_hash(txs) != bundle.bundle_hash)
    throw Error(Errc::InvalidTransaction, "bundle hash does not match its essence");
  const Amount amount = txs[kCredit].value;
  if (amount <= 0) throw Error(Errc::NonPositiveAmount, "bundle amount must be positive");
  if (txs[kDebit].value != -amount || txs[kDebitSignature].value != 0 ||
      txs[kDebitSignature].address != txs[kDebit].address)
    throw Error(Errc::InvalidTransaction, "bundle values do not balance");

  const auto& frag = txs[kDebitSignature].signature_message_fragment;
  if (frag.size() <= kVerkeyBytes) throw Error(Errc::BadDebitSignature, "missing signature material");
  crypto::Verkey verkey{Bytes(frag.begin(), frag.begin() + kVerkeyBytes)};
  crypto::Signature sig{Bytes(frag.begin() + kVerkeyBytes, frag.end())};
  if (Address::from_verkey(verkey) != txs[kDebit].address ||
      !crypto::verify(verkey, bundle.bundle_hash.bytes, sig))
    throw Error(Errc::BadDebitSignature, "debit signature does not verify for " +
                                             txs[kDebit].address.str());
}

Bundle TangleState::attach_bundle(const Bundle& bundle, unsigned difficulty_bits, Rng& rng,
                                  const std::function<void(const PowResult&)>& on_pow) {
  check_value_bundle(bundle);
  const Amount amount = bundle.credit().value;
  if (balance(bundle.debit().address) < amount)
    throw Error(Errc::InsufficientBalance, bundle.debit().address.str() + " cannot cover " +
                                               std::to_string(amount));
  auto [a, b] = tip_select(rng);
  auto attached = chain_and_pow(bundle, a, b, difficulty_bits, on_pow);
  apply(attached);
  return attached;
}

void TangleState::insert(const TangleTx& tx) {
  tips_.erase(tx.trunk);
  tips_.erase(tx.branch);
  tips_.insert(tx.id);
  order_.push_back(tx.id);
  bundles_[tx.bundle_hash].push_back(tx.id);
  txs_.emplace(tx.id, tx);
}

bool TangleState::apply(const Bundle& bundle) {
  const auto& txs = bundle.transactions;
  const auto present = std::count_if(txs.begin(), txs.end(), [&](const auto& t) { return contains(t.id); });
  if (present == static_cast<std::ptrdiff_t>(txs.size()) && !txs.empty()) return false;
  if (present != 0) throw Error(Errc::InvalidTransaction, "bundle partially present");

  check_value_bundle(bundle);
  for (std::size_t k = 0; k < txs.size(); ++k) {
    const auto& tx = txs[k];
    if (!pow_valid(tx)) throw Error(Errc::InvalidTransaction, "PoW does not validate for " + tx.id.hex());
    if (k + 1 < txs.size()) {
      if (tx.trunk != txs[k + 1].id)
        throw Error(Errc::InvalidTransaction, "bundle members must chain trunk-wise");
    } else if (!contains(tx.trunk)) {
      throw Error(Errc::InvalidTransaction, "trunk reference does not resolve");
    }
    if (!contains(tx.branch)) throw Error(Errc::InvalidTransaction, "branch reference does not resolve");
  }
  const Amount amount = bundle.credit().value;
  if (balance(bundle.debit().address) < amount)
    throw Error(Errc::InsufficientBalance, bundle.debit().address.str() + " cannot cover " +
                                               std::to_string(amount));

  for (std::size_t k = txs.size(); k-- > 0;) insert(txs[k]);
  balances_[bundle.debit().address] -= amount;
  balances_[bundle.credit().address] += amount;
  if (balances_[bundle.debit().address] == 0) balances_.erase(bundle.debit().address);

  const auto& frag = bundle.credit().signature_message_fragment;
  if (frag.size() == crypto::kNonceSize) {
    crypto::Nonce n;
    std::copy(frag.begin(), frag.end(), n.bytes.begin());
    payment_index_[{bundle.credit().address, n}].push_back(bundle.bundle_hash);
  }
  return true;
}

std::optional<Bundle> TangleState::bundle(const crypto::Digest& bundle_hash) const {
  auto it = bundles_.find(bundle_hash);
  if (it == bundles_.end()) return std::nullopt;
  Bundle b;
  b.bundle_hash = bundle_hash;
  for (const auto& id : it->second) b.transactions.push_back(tx(id));
  std::sort(b.transactions.begin(), b.transactions.end(),
            [](const auto& x, const auto& y) { return x.current_index < y.current_index; });
  return b;
}

std::optional<Bundle> TangleState::find_payment(const Address& to, const crypto::Nonce& message_nonce,
                                                Amount amount) const {
  auto it = payment_index_.find({to, message_nonce});
  if (it == payment_index_.end()) return std::nullopt;
  for (const auto& h : it->second) {
    auto b = bundle(h);
    if (b && b->credit().value == amount) return b;
  }
  return std::nullopt;
}

std::optional<Bundle> TangleState::find_payment_scan(const Address& to,
                                                     const crypto::Nonce& message_nonce,
                                                     Amount amount) const {
  const Bytes nonce_bytes(message_nonce.bytes.begin(), message_nonce.bytes.end());
  for (const auto& id : order_) {
    const auto& t = txs_.at(id);
    if (t.is_genesis() || t.current_index != kCredit || t.address != to || t.value != amount ||
        t.signature_message_fragment != nonce_bytes)
      continue;
    Bundle b;
    b.bundle_hash = t.bundle_hash;
    for (const auto& [other_id, other] : txs_)
      if (!other.is_genesis() && other.bundle_hash == t.bundle_hash) b.transactions.push_back(other);
    std::sort(b.transactions.begin(), b.transactions.end(),
              [](const auto& x, const auto& y) { return x.current_index < y.current_index; });
    return b;
  }
  return std::nullopt;
}

void TangleState::mark_confirmed(const TxId& id) {
  auto it = txs_.find(id);
  if (it == txs_.end()) throw Error(Errc::NotFound, "transaction " + id.hex());
  it->second.confirmed = true;
}

void TangleState::dump(std::ostream& out) const {
  for (const auto& [address, amount] : allocations_)
    out << text::join({"ALLOC", address.str(), std::to_string(amount)}) << '\n';
  for (const auto& id : order_) {
    const auto& t = txs_.at(id);
    out << text::join({"TX", t.id.hex(), t.trunk.hex(), t.branch.hex(), t.address.str(),
                       std::to_string(t.value), to_hex(t.signature_message_fragment),
                       t.bundle_hash.hex(), std::to_string(t.current_index),
                       std::to_string(t.last_index), std::to_string(t.timestamp_us),
                       std::to_string(t.pow_nonce), std::to_string(t.difficulty),
                       t.confirmed ? "1" : "0"})
        << '\n';
  }
}

std::string TangleState::dump() const {
  std::ostringstream out;
  dump(out);
  return out.str();
}

TangleState TangleState::load(std::istream& in) {
  Allocations allocs;
  std::vector<TangleTx> txs;
  std::string line;
  auto num = [](const std::string& s) -> std::int64_t {
    try {
      std::size_t used = 0;
      auto v = std::stoll(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::logic_error&) {
      throw Error(Errc::MalformedMessage, "bad integer '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = text::split(line);
    if (f[0] == "ALLOC" && f.size() == 3) {
      allocs[Address(f[1])] = num(f[2]);
    } else if (f[0] == "TX" && f.size() == 14) {
      TangleTx t;
      t.id = crypto::Digest::from_hex(f[1]);
      t.trunk = crypto::Digest::from_hex(f[2]);
      t.branch = crypto::Digest::from_hex(f[3]);
      t.address = Address(f[4]);
      t.value = num(f[5]);
      t.signature_message_fragment = from_hex(f[6]);
      t.bundle_hash = crypto::Digest::from_hex(f[7]);
      t.current_index = static_cast<std::uint32_t>(num(f[8]));
      t.last_index = static_cast<std::uint32_t>(num(f[9]));
      t.timestamp_us = num(f[10]);
      t.pow_nonce = static_cast<std::uint64_t>(std::stoull(f[11]));
      t.difficulty = static_cast<unsigned>(num(f[12]));
      t.confirmed = f[13] == "1";
      txs.push_back(std::move(t));
    } else {
      throw Error(Errc::MalformedMessage, "unrecognised tangle line: " + line);
    }
  }
  auto state = genesis(allocs);
  if (txs.empty() || txs.front().id != state.genesis_id())
    throw Error(Errc::MalformedMessage, "dump does not start with the matching genesis");

  std::vector<TangleTx> confirmed;
  std::size_t i = 1;
  while (i < txs.size()) {
    // members are stored last index first
    if (i + kBundleSize > txs.size())
      throw Error(Errc::MalformedMessage, "truncated bundle in tangle dump");
    Bundle b;
    b.bundle_hash = txs[i].bundle_hash;
    for (std::size_t k = 0; k < kBundleSize; ++k) b.transactions.push_back(txs[i + kBundleSize - 1 - k]);
    state.apply(b);
    i += kBundleSize;
  }
  for (const auto& t : txs)
    if (t.confirmed) state.mark_confirmed(t.id);
  return state;
}

// ---- gossip ----------------------------------------------------------------

sim::SimTime Gossip::broadcast(const Bundle& bundle, std::function<void()> on_delivered) {
  return broadcast_after(delay_.sample(rng_), bundle, std::move(on_delivered));
}

sim::SimTime Gossip::broadcast_after(sim::SimTime delay, const Bundle& bundle,
                                     std::function<void()> on_delivered) {
  ++broadcasts_;
  const auto at = engine_.now() + delay;
  engine_.schedule_at(at, [this, bundle, on_delivered = std::move(on_delivered)] {
    for (auto* peer : peers_) peer->apply(bundle);
    if (on_delivered) on_delivered();
  });
  return at;
}

}  // namespace paygo::tangle
