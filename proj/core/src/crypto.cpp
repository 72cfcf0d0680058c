#include "paygo/crypto.hpp"

#include <sodium.h>

#include <algorithm>
#include <bit>
#include <cstring>

#include "paygo/error.hpp"

namespace paygo::crypto {

namespace {

void ensure_sodium() {
  static const bool ready = [] {
    if (sodium_init() < 0) throw Error(Errc::Io, "libsodium initialisation failed");
    return true;
  }();
  (void)ready;
}

class SodiumSuite final : public Suite {
 public:
  std::string_view name() const override { return "ed25519-x25519box-sha256"; }
  std::size_t seed_size() const override { return crypto_sign_SEEDBYTES; }

  std::pair<SecretKey, Verkey> derive(ByteView seed) const override {
    ensure_sodium();
    if (seed.size() != crypto_sign_SEEDBYTES) throw Error(Errc::MalformedSeed, "seed must be 32 bytes");
    SecretKey sk{Bytes(crypto_sign_SECRETKEYBYTES)};
    Verkey vk{Bytes(crypto_sign_PUBLICKEYBYTES)};
    crypto_sign_seed_keypair(vk.bytes.data(), sk.bytes.data(), seed.data());
    return {std::move(sk), std::move(vk)};
  }

  Signature sign(const SecretKey& key, ByteView msg) const override {
    Signature sig{Bytes(crypto_sign_BYTES)};
    crypto_sign_detached(sig.bytes.data(), nullptr, msg.data(), msg.size(), key.bytes.data());
    return sig;
  }

  bool verify(const Verkey& key, ByteView msg, const Signature& sig) const override {
    ensure_sodium();
    if (key.bytes.size() != crypto_sign_PUBLICKEYBYTES || sig.bytes.size() != crypto_sign_BYTES)
      return false;
    return crypto_sign_verify_detached(sig.bytes.data(), msg.data(), msg.size(),
                                       key.bytes.data()) == 0;
  }

  Bytes seal(const SecretKey& sender, const Verkey& recipient, ByteView plaintext,
             Rng& rng) const override {
    auto box_pk = to_box_public(recipient);
    auto box_sk = to_box_secret(sender);
    Bytes out(crypto_box_NONCEBYTES + crypto_box_MACBYTES + plaintext.size());
    rng.fill(std::span(out.data(), crypto_box_NONCEBYTES));
    int rc = crypto_box_easy(out.data() + crypto_box_NONCEBYTES, plaintext.data(), plaintext.size(),
                             out.data(), box_pk.data(), box_sk.data());
    sodium_memzero(box_sk.data(), box_sk.size());
    if (rc != 0) throw Error(Errc::MalformedCiphertext, "box construction failed");
    return out;
  }

  Bytes open(const SecretKey& recipient, const Verkey& sender, ByteView ciphertext) const override {
    if (ciphertext.size() < crypto_box_NONCEBYTES + crypto_box_MACBYTES)
      throw Error(Errc::MalformedCiphertext, "ciphertext too short");
    auto box_pk = to_box_public(sender);
    auto box_sk = to_box_secret(recipient);
    Bytes out(ciphertext.size() - crypto_box_NONCEBYTES - crypto_box_MACBYTES);
    int rc = crypto_box_open_easy(out.data(), ciphertext.data() + crypto_box_NONCEBYTES,
                                  ciphertext.size() - crypto_box_NONCEBYTES, ciphertext.data(),
                                  box_pk.data(), box_sk.data());
    sodium_memzero(box_sk.data(), box_sk.size());
    if (rc != 0) throw Error(Errc::AuthFailure, "box authentication failed");
    return out;
  }

 private:
  static std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> to_box_public(const Verkey& vk) {
    ensure_sodium();
    std::array<std::uint8_t, crypto_box_PUBLICKEYBYTES> pk{};
    if (vk.bytes.size() != crypto_sign_PUBLICKEYBYTES ||
        crypto_sign_ed25519_pk_to_curve25519(pk.data(), vk.bytes.data()) != 0)
      throw Error(Errc::MalformedCiphertext, "verkey is not a valid Ed25519 point");
    return pk;
  }

  static std::array<std::uint8_t, crypto_box_SECRETKEYBYTES> to_box_secret(const SecretKey& sk) {
    std::array<std::uint8_t, crypto_box_SECRETKEYBYTES> out{};
    crypto_sign_ed25519_sk_to_curve25519(out.data(), sk.bytes.data());
    return out;
  }
};

}  // namespace

const Suite& default_suite() {
  static const SodiumSuite suite;
  return suite;
}

Digest hash(ByteView msg) {
  ensure_sodium();
  Digest d;
  crypto_hash_sha256(d.bytes.data(), msg.data(), msg.size());
  return d;
}

static_assert(sizeof(crypto_hash_sha256_state) <= 128);

Hasher::Hasher() {
  ensure_sodium();
  crypto_hash_sha256_init(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()));
}

Hasher& Hasher::update(ByteView data) {
  crypto_hash_sha256_update(reinterpret_cast<crypto_hash_sha256_state*>(state_.data()), data.data(),
                            data.size());
  return *this;
}

Digest Hasher::finish() const {
  auto copy = state_;
  Digest d;
  crypto_hash_sha256_final(reinterpret_cast<crypto_hash_sha256_state*>(copy.data()), d.bytes.data());
  return d;
}

bool verify(const Verkey& verkey, ByteView msg, const Signature& sig) {
  return default_suite().verify(verkey, msg, sig);
}

Nonce new_nonce(Rng& rng) {
  Nonce n;
  rng.fill(n.bytes);
  return n;
}

Digest Digest::from_hex(std::string_view hex) {
  auto raw = paygo::from_hex(hex);
  if (raw.size() != kDigestSize) throw Error(Errc::MalformedMessage, "digest must be 32 bytes");
  Digest d;
  std::copy(raw.begin(), raw.end(), d.bytes.begin());
  return d;
}

bool Digest::is_zero() const {
  return std::all_of(bytes.begin(), bytes.end(), [](auto b) { return b == 0; });
}

unsigned Digest::trailing_zero_bits() const {
  unsigned count = 0;
  for (auto it = bytes.rbegin(); it != bytes.rend(); ++it) {
    if (*it == 0) {
      count += 8;
      continue;
    }
    count += static_cast<unsigned>(std::countr_zero(static_cast<unsigned>(*it)));
    break;
  }
  return count;
}

Nonce Nonce::from_hex(std::string_view hex) {
  auto raw = paygo::from_hex(hex);
  if (raw.size() != kNonceSize) throw Error(Errc::MalformedMessage, "nonce must be 16 bytes");
  Nonce n;
  std::copy(raw.begin(), raw.end(), n.bytes.begin());
  return n;
}

KeyStore::KeyStore(const Suite& suite) : suite_(&suite) {}

KeyStore::~KeyStore() {
  for (auto& e : entries_) {
    sodium_memzero(e.seed.data(), e.seed.size());
    sodium_memzero(e.secret.bytes.data(), e.secret.bytes.size());
  }
}

KeyPair KeyStore::generate(ByteView seed) {
  auto [secret, verkey] = suite_->derive(seed);
  entries_.push_back(Entry{Bytes(seed.begin(), seed.end()), std::move(secret), verkey});
  return KeyPair{std::move(verkey), KeyHandle(entries_.size())};
}

KeyPair KeyStore::generate(Rng& rng) {
  Bytes seed(suite_->seed_size());
  rng.fill(seed);
  auto kp = generate(seed);
  sodium_memzero(seed.data(), seed.size());
  return kp;
}

const KeyStore::Entry& KeyStore::entry(KeyHandle handle) const {
  if (!contains(handle)) throw Error(Errc::DanglingHandle, "no key for handle");
  return entries_[handle.id() - 1];
}

bool KeyStore::contains(KeyHandle handle) const {
  return handle.id() >= 1 && handle.id() <= entries_.size();
}

const Verkey& KeyStore::verkey(KeyHandle handle) const { return entry(handle).verkey; }

std::optional<KeyHandle> KeyStore::find(const Verkey& verkey) const {
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].verkey == verkey) return KeyHandle(i + 1);
  return std::nullopt;
}

Signature KeyStore::sign(KeyHandle handle, ByteView msg) const {
  return suite_->sign(entry(handle).secret, msg);
}

Bytes KeyStore::auth_encrypt(KeyHandle sender, const Verkey& recipient, ByteView plaintext,
                             Rng& rng) const {
  return suite_->seal(entry(sender).secret, recipient, plaintext, rng);
}

Bytes KeyStore::auth_decrypt(KeyHandle recipient, const Verkey& sender, ByteView ciphertext) const {
  return suite_->open(entry(recipient).secret, sender, ciphertext);
}

Bytes KeyStore::export_seed(KeyHandle handle, FixtureExport) const { return entry(handle).seed; }

}  // namespace paygo::crypto
