#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paygo/codec.hpp"
#include "paygo/rng.hpp"

namespace paygo::crypto {

inline constexpr std::size_t kDigestSize = 32;
inline constexpr std::size_t kNonceSize = 16;

/// Public verification key. Also the encryption target for authenticated boxes.
struct Verkey {
  Bytes bytes;

  std::string hex() const { return to_hex(bytes); }
  friend bool operator==(const Verkey&, const Verkey&) = default;
  friend auto operator<=>(const Verkey&, const Verkey&) = default;
};

struct Signature {
  Bytes bytes;

  friend bool operator==(const Signature&, const Signature&) = default;
};

struct Digest {
  std::array<std::uint8_t, kDigestSize> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static Digest from_hex(std::string_view hex);
  bool is_zero() const;
  /// Trailing zero bits with the digest read as a big-endian integer.
  unsigned trailing_zero_bits() const;

  friend bool operator==(const Digest&, const Digest&) = default;
  friend auto operator<=>(const Digest&, const Digest&) = default;
};

struct Nonce {
  std::array<std::uint8_t, kNonceSize> bytes{};

  std::string hex() const { return to_hex(bytes); }
  static Nonce from_hex(std::string_view hex);

  friend bool operator==(const Nonce&, const Nonce&) = default;
  friend auto operator<=>(const Nonce&, const Nonce&) = default;
};

/// Opaque reference to a signing key held inside a KeyStore.
class KeyHandle {
 public:
  constexpr KeyHandle() = default;
  constexpr explicit KeyHandle(std::uint64_t id) : id_(id) {}
  constexpr std::uint64_t id() const { return id_; }
  friend constexpr bool operator==(KeyHandle, KeyHandle) = default;
  friend constexpr auto operator<=>(KeyHandle, KeyHandle) = default;

 private:
  std::uint64_t id_ = 0;
};

struct KeyPair {
  Verkey verkey;
  KeyHandle sigkey_handle;
};

/// Secret material as a Suite sees it. Only KeyStore holds these.
struct SecretKey {
  Bytes bytes;
};

/// Substitution point for the cryptographic algorithms. Protocol code only
/// relies on the sign/verify and seal/open contracts.
class Suite {
 public:
  virtual ~Suite() = default;

  virtual std::string_view name() const = 0;
  virtual std::size_t seed_size() const = 0;
  virtual std::pair<SecretKey, Verkey> derive(ByteView seed) const = 0;
  virtual Signature sign(const SecretKey& key, ByteView msg) const = 0;
  virtual bool verify(const Verkey& key, ByteView msg, const Signature& sig) const = 0;
  virtual Bytes seal(const SecretKey& sender, const Verkey& recipient, ByteView plaintext,
                     Rng& rng) const = 0;
  virtual Bytes open(const SecretKey& recipient, const Verkey& sender,
                     ByteView ciphertext) const = 0;
};

/// Ed25519 signatures, X25519/XSalsa20-Poly1305 boxes (keys converted from
/// the Ed25519 pair).
const Suite& default_suite();

Digest hash(ByteView msg);
inline Digest hash(std::string_view msg) { return hash(as_bytes(msg)); }

bool verify(const Verkey& verkey, ByteView msg, const Signature& sig);

/// Incremental form of hash(). Copyable, so a shared prefix can be hashed
/// once and extended many times.
class Hasher {
 public:
  Hasher();
  Hasher& update(ByteView data);
  Digest finish() const;

 private:
  alignas(16) std::array<std::uint8_t, 128> state_;
};

Nonce new_nonce(Rng& rng);

/// Tag type that must be passed to read seed material out of a KeyStore.
struct FixtureExport {
  explicit FixtureExport() = default;
};

/// Owns signing keys and hands out handles. Nothing here returns raw secret
/// key bytes except export_seed, which demands an explicit FixtureExport tag.
class KeyStore {
 public:
  explicit KeyStore(const Suite& suite = default_suite());
  ~KeyStore();
  KeyStore(KeyStore&&) noexcept = default;
  KeyStore& operator=(KeyStore&&) noexcept = default;
  KeyStore(const KeyStore&) = delete;
  KeyStore& operator=(const KeyStore&) = delete;

  /// Throws Errc::MalformedSeed when seed.size() != suite.seed_size().
  KeyPair generate(ByteView seed);
  KeyPair generate(Rng& rng);

  const Verkey& verkey(KeyHandle handle) const;
  std::optional<KeyHandle> find(const Verkey& verkey) const;
  bool contains(KeyHandle handle) const;
  std::size_t size() const { return entries_.size(); }

  Signature sign(KeyHandle handle, ByteView msg) const;
  Bytes auth_encrypt(KeyHandle sender, const Verkey& recipient, ByteView plaintext,
                     Rng& rng) const;
  /// Errc::AuthFailure if the ciphertext was not produced by `sender` for
  /// this recipient (or was altered); Errc::MalformedCiphertext if it cannot
  /// even be parsed.
  Bytes auth_decrypt(KeyHandle recipient, const Verkey& sender, ByteView ciphertext) const;

  Bytes export_seed(KeyHandle handle, FixtureExport) const;
  const Suite& suite() const { return *suite_; }

 private:
  struct Entry {
    Bytes seed;
    SecretKey secret;
    Verkey verkey;
  };
  const Entry& entry(KeyHandle handle) const;

  const Suite* suite_;
  std::vector<Entry> entries_;
};

}  // namespace paygo::crypto
