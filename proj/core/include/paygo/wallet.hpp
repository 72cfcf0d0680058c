#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paygo/crypto.hpp"
#include "paygo/identity_ledger.hpp"
#include "paygo/pairwise_store.hpp"
#include "paygo/rng.hpp"

namespace paygo::wallet {

using Attributes = std::map<std::string, std::string>;

struct DidInfo {
  std::string did;
  crypto::Verkey verkey;
};

/// Issuer-signed attribute bundle. The issuer signs salted per-attribute
/// digests, which is what lets a proof disclose a subset of attributes.
struct Credential {
  identity::SeqNo cred_def_ref = 0;
  std::string issuer_did;
  Attributes attributes;
  std::map<std::string, crypto::Nonce> salts;
  crypto::Digest holder_binding;
  crypto::Signature issuer_signature;

  friend bool operator==(const Credential&, const Credential&) = default;
};

crypto::Digest attribute_digest(std::string_view name, std::string_view value,
                                const crypto::Nonce& salt);

/// Bytes the issuer signs: cred_def_ref, holder binding and the sorted
/// attribute digests.
Bytes credential_payload(identity::SeqNo cred_def_ref, const crypto::Digest& holder_binding,
                         std::vector<crypto::Digest> digests);

struct ProofRequest {
  std::string name;
  std::vector<std::string> requested_attributes;
  std::vector<std::string> accepted_issuers;  // empty: any issuer
  crypto::Nonce request_nonce;

  /// Errc::MalformedRequest when no attribute is requested.
  void validate() const;
  Bytes encode() const;
  static ProofRequest decode(ByteView data);

  friend bool operator==(const ProofRequest&, const ProofRequest&) = default;
};

ProofRequest make_proof_request(std::string name, std::vector<std::string> attributes,
                                std::vector<std::string> accepted_issuers, Rng& rng);

struct Disclosure {
  std::string value;
  crypto::Nonce salt;

  friend bool operator==(const Disclosure&, const Disclosure&) = default;
};

struct Proof {
  std::map<std::string, Disclosure> revealed;
  std::vector<crypto::Digest> undisclosed;  // digests of attributes not revealed
  identity::SeqNo cred_def_ref = 0;
  crypto::Digest holder_binding;
  crypto::Verkey holder_verkey;
  crypto::Signature issuer_signature;
  crypto::Nonce request_nonce;
  crypto::Signature holder_signature;

  Bytes encode() const;
  static Proof decode(ByteView data);

  friend bool operator==(const Proof&, const Proof&) = default;
};

/// What the holder signs: request nonce, cred_def_ref and the revealed values.
Bytes holder_payload(const crypto::Nonce& request_nonce, identity::SeqNo cred_def_ref,
                     const std::map<std::string, Disclosure>& revealed);

/// Edge-agent wallet. Signing keys never leave it except through the
/// explicit fixture export.
class Wallet {
 public:
  Wallet(std::string owner_label, std::uint64_t rng_seed);

  const std::string& label() const { return label_; }

  DidInfo create_did();
  DidInfo create_did(ByteView seed);
  bool has_did(std::string_view did) const;
  bool can_sign(std::string_view did) const;
  const crypto::Verkey& verkey(std::string_view did) const;
  std::optional<std::string> did_for_verkey(const crypto::Verkey& verkey) const;
  std::size_t did_count() const { return dids_.size(); }
  std::vector<DidInfo> dids() const;

  crypto::Signature sign(std::string_view did, ByteView msg) const;
  Bytes auth_encrypt(std::string_view my_did, const crypto::Verkey& their_verkey,
                     ByteView plaintext);
  Bytes auth_decrypt(std::string_view my_did, const crypto::Verkey& their_verkey,
                     ByteView ciphertext) const;
  /// Opaque key reference for APIs that sign with a KeyStore directly.
  crypto::KeyHandle key_handle(std::string_view did) const { return signing_handle(did); }
  const crypto::KeyStore& key_store() const { return keys_; }

  /// Signs with whichever DID key matches `verkey`; Errc::NotIssuer if none.
  crypto::Signature sign_with_verkey(const crypto::Verkey& verkey, ByteView msg) const;

  /// Errc::AlreadyExists on a second call.
  void create_master_secret();
  bool has_master_secret() const { return link_.has_value(); }
  /// Commitment binding credentials to this wallet's master secret.
  crypto::Digest holder_commitment() const;
  const crypto::Verkey& holder_verkey() const;
  crypto::Signature holder_sign(ByteView msg) const;

  void store_credential(Credential credential);
  const std::vector<Credential>& credentials() const { return credentials_; }
  void clear_credentials() { credentials_.clear(); }

  pairwise::PairwiseStore& pairwise() { return pairwise_; }
  const pairwise::PairwiseStore& pairwise() const { return pairwise_; }

  Rng& rng() { return rng_; }

  /// Line-delimited export. Without `include_secrets` only public material
  /// is written and an imported copy can verify but not sign.
  void export_to(std::ostream& out, bool include_secrets = false) const;
  std::string export_text(bool include_secrets = false) const;
  static Wallet import_from(std::istream& in, std::uint64_t rng_seed);
  static Wallet import_text(std::string_view text, std::uint64_t rng_seed);

 private:
  struct DidEntry {
    std::string did;
    crypto::Verkey verkey;
    std::optional<crypto::KeyHandle> handle;
  };
  const DidEntry& entry(std::string_view did) const;
  crypto::KeyHandle signing_handle(std::string_view did) const;
  DidInfo add_key(const crypto::KeyPair& kp);
  void install_master_secret(Bytes secret);

  std::string label_;
  Rng rng_;
  crypto::KeyStore keys_;
  std::vector<DidEntry> dids_;
  Bytes master_secret_;
  std::optional<crypto::KeyPair> link_;
  std::vector<Credential> credentials_;
  pairwise::PairwiseStore pairwise_;
};

/// Errors: UnknownCredDef, SchemaMismatch, NotIssuer.
Credential issue_credential(Wallet& issuer, const identity::IdentityLedger& ledger,
                            identity::SeqNo cred_def_ref, const Attributes& attributes,
                            const crypto::Digest& holder_commitment);

/// Errc::NoMatchingCredential when no stored credential carries every
/// requested attribute from an accepted issuer.
Proof create_proof(const Wallet& holder, const ProofRequest& request);

/// Returns the revealed attributes or throws one of AttributeSetMismatch,
/// NonceMismatch, UnknownCredDef, UntrustedIssuer, BadIssuerSignature,
/// BadHolderSignature.
Attributes verify_proof(const identity::IdentityLedger& ledger, const ProofRequest& request,
                        const Proof& proof);

}  // namespace paygo::wallet
