#include "paygo/wallet.hpp"

#include <algorithm>
#include <istream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "paygo/error.hpp"

namespace paygo::wallet {

namespace {

constexpr std::string_view kAttributeDomain = "paygo.attr.v1";
constexpr std::string_view kCredentialDomain = "paygo.cred.v1";
constexpr std::string_view kHolderDomain = "paygo.holder.v1";
constexpr std::string_view kBindingDomain = "paygo.binding.v1";
constexpr std::string_view kLinkDomain = "paygo.link.v1";

void write_signature(codec::Writer& w, const crypto::Signature& s) { w.bytes(s.bytes); }
void write_nonce(codec::Writer& w, const crypto::Nonce& n) { w.bytes(n.bytes); }
void write_digest(codec::Writer& w, const crypto::Digest& d) { w.bytes(d.bytes); }

crypto::Nonce read_nonce(codec::Reader& r) {
  auto b = r.bytes();
  if (b.size() != crypto::kNonceSize) throw Error(Errc::MalformedMessage, "nonce width");
  crypto::Nonce n;
  std::copy(b.begin(), b.end(), n.bytes.begin());
  return n;
}

crypto::Digest read_digest(codec::Reader& r) {
  auto b = r.bytes();
  if (b.size() != crypto::kDigestSize) throw Error(Errc::MalformedMessage, "digest width");
  crypto::Digest d;
  std::copy(b.begin(), b.end(), d.bytes.begin());
  return d;
}

}  // namespace

crypto::Digest attribute_digest(std::string_view name, std::string_view value,
                                const crypto::Nonce& salt) {
  codec::Writer w;
  w.str(kAttributeDomain).str(name).str(value);
  write_nonce(w, salt);
  return crypto::hash(w.data());
}

Bytes credential_payload(identity::SeqNo cred_def_ref, const crypto::Digest& holder_binding,
                         std::vector<crypto::Digest> digests) {
  std::sort(digests.begin(), digests.end());
  codec::Writer w;
  w.str(kCredentialDomain).u64(cred_def_ref);
  write_digest(w, holder_binding);
  w.u32(static_cast<std::uint32_t>(digests.size()));
  for (const auto& d : digests) write_digest(w, d);
  return std::move(w).take();
}

Bytes holder_payload(const crypto::Nonce& request_nonce, identity::SeqNo cred_def_ref,
                     const std::map<std::string, Disclosure>& revealed) {
  codec::Writer w;
  w.str(kHolderDomain);
  write_nonce(w, request_nonce);
  w.u64(cred_def_ref).u32(static_cast<std::uint32_t>(revealed.size()));
  for (const auto& [name, d] : revealed) {
    w.str(name).str(d.value);
    write_nonce(w, d.salt);
  }
  return std::move(w).take();
}

// ---- ProofRequest / Proof encoding ----------------------------------------

void ProofRequest::validate() const {
  if (requested_attributes.empty())
    throw Error(Errc::MalformedRequest, "proof request asks for no attributes");
  std::set<std::string_view> seen;
  for (const auto& a : requested_attributes)
    if (!seen.insert(a).second) throw Error(Errc::MalformedRequest, "duplicate attribute " + a);
}

Bytes ProofRequest::encode() const {
  codec::Writer w;
  w.str(name).u32(static_cast<std::uint32_t>(requested_attributes.size()));
  for (const auto& a : requested_attributes) w.str(a);
  w.u32(static_cast<std::uint32_t>(accepted_issuers.size()));
  for (const auto& i : accepted_issuers) w.str(i);
  write_nonce(w, request_nonce);
  return std::move(w).take();
}

ProofRequest ProofRequest::decode(ByteView data) {
  codec::Reader r(data);
  ProofRequest req;
  req.name = r.str();
  for (auto n = r.u32(); n > 0; --n) req.requested_attributes.push_back(r.str());
  for (auto n = r.u32(); n > 0; --n) req.accepted_issuers.push_back(r.str());
  req.request_nonce = read_nonce(r);
  r.expect_end();
  return req;
}

ProofRequest make_proof_request(std::string name, std::vector<std::string> attributes,
                                std::vector<std::string> accepted_issuers, Rng& rng) {
  ProofRequest req{std::move(name), std::move(attributes), std::move(accepted_issuers),
                   crypto::new_nonce(rng)};
  req.validate();
  return req;
}

Bytes Proof::encode() const {
  codec::Writer w;
  w.u32(static_cast<std::uint32_t>(revealed.size()));
  for (const auto& [name, d] : revealed) {
    w.str(name).str(d.value);
    write_nonce(w, d.salt);
  }
  w.u32(static_cast<std::uint32_t>(undisclosed.size()));
  for (const auto& d : undisclosed) write_digest(w, d);
  w.u64(cred_def_ref);
  write_digest(w, holder_binding);
  w.bytes(holder_verkey.bytes);
  write_signature(w, issuer_signature);
  write_nonce(w, request_nonce);
  write_signature(w, holder_signature);
  return std::move(w).take();
}

Proof Proof::decode(ByteView data) {
  codec::Reader r(data);
  Proof p;
  for (auto n = r.u32(); n > 0; --n) {
    auto name = r.str();
    Disclosure d;
    d.value = r.str();
    d.salt = read_nonce(r);
    p.revealed.emplace(std::move(name), std::move(d));
  }
  for (auto n = r.u32(); n > 0; --n) p.undisclosed.push_back(read_digest(r));
  p.cred_def_ref = r.u64();
  p.holder_binding = read_digest(r);
  p.holder_verkey.bytes = r.bytes();
  p.issuer_signature.bytes = r.bytes();
  p.request_nonce = read_nonce(r);
  p.holder_signature.bytes = r.bytes();
  r.expect_end();
  return p;
}

// ---- Wallet ----------------------------------------------------------------

Wallet::Wallet(std::string owner_label, std::uint64_t rng_seed)
    : label_(std::move(owner_label)), rng_(rng_seed) {}

DidInfo Wallet::add_key(const crypto::KeyPair& kp) {
  DidEntry e{identity::did_from_verkey(kp.verkey), kp.verkey, kp.sigkey_handle};
  if (has_did(e.did)) throw Error(Errc::AlreadyExists, "did " + e.did + " already in wallet");
  dids_.push_back(e);
  return {e.did, e.verkey};
}

DidInfo Wallet::create_did() { return add_key(keys_.generate(rng_)); }

DidInfo Wallet::create_did(ByteView seed) { return add_key(keys_.generate(seed)); }

const Wallet::DidEntry& Wallet::entry(std::string_view did) const {
  auto it = std::find_if(dids_.begin(), dids_.end(), [&](const auto& e) { return e.did == did; });
  if (it == dids_.end()) throw Error(Errc::UnknownDid, "did " + std::string(did) + " not in wallet");
  return *it;
}

bool Wallet::has_did(std::string_view did) const {
  return std::any_of(dids_.begin(), dids_.end(), [&](const auto& e) { return e.did == did; });
}

bool Wallet::can_sign(std::string_view did) const {
  return has_did(did) && entry(did).handle.has_value();
}

crypto::KeyHandle Wallet::signing_handle(std::string_view did) const {
  const auto& e = entry(did);
  if (!e.handle) throw Error(Errc::NoSigningKey, "wallet holds only the public key of " + e.did);
  return *e.handle;
}

const crypto::Verkey& Wallet::verkey(std::string_view did) const { return entry(did).verkey; }

std::optional<std::string> Wallet::did_for_verkey(const crypto::Verkey& verkey) const {
  for (const auto& e : dids_)
    if (e.verkey == verkey) return e.did;
  return std::nullopt;
}

std::vector<DidInfo> Wallet::dids() const {
  std::vector<DidInfo> out;
  for (const auto& e : dids_) out.push_back({e.did, e.verkey});
  return out;
}

crypto::Signature Wallet::sign(std::string_view did, ByteView msg) const {
  return keys_.sign(signing_handle(did), msg);
}

crypto::Signature Wallet::sign_with_verkey(const crypto::Verkey& verkey, ByteView msg) const {
  auto did = did_for_verkey(verkey);
  if (!did || !can_sign(*did))
    throw Error(Errc::NotIssuer, "wallet does not control verkey " + verkey.hex());
  return sign(*did, msg);
}

Bytes Wallet::auth_encrypt(std::string_view my_did, const crypto::Verkey& their_verkey,
                           ByteView plaintext) {
  return keys_.auth_encrypt(signing_handle(my_did), their_verkey, plaintext, rng_);
}

Bytes Wallet::auth_decrypt(std::string_view my_did, const crypto::Verkey& their_verkey,
                           ByteView ciphertext) const {
  return keys_.auth_decrypt(signing_handle(my_did), their_verkey, ciphertext);
}

void Wallet::install_master_secret(Bytes secret) {
  codec::Writer w;
  w.str(kLinkDomain).bytes(secret);
  auto seed = crypto::hash(w.data());
  link_ = keys_.generate(seed.bytes);
  master_secret_ = std::move(secret);
}

void Wallet::create_master_secret() {
  if (has_master_secret()) throw Error(Errc::AlreadyExists, "wallet already has a master secret");
  Bytes secret(32);
  rng_.fill(secret);
  install_master_secret(std::move(secret));
}

const crypto::Verkey& Wallet::holder_verkey() const {
  if (!link_) throw Error(Errc::NoMasterSecret, "wallet " + label_ + " has no master secret");
  return link_->verkey;
}

crypto::Digest Wallet::holder_commitment() const {
  codec::Writer w;
  w.str(kBindingDomain).bytes(holder_verkey().bytes);
  return crypto::hash(w.data());
}

crypto::Signature Wallet::holder_sign(ByteView msg) const {
  holder_verkey();
  return keys_.sign(link_->sigkey_handle, msg);
}

void Wallet::store_credential(Credential credential) {
  credentials_.push_back(std::move(credential));
}

void Wallet::export_to(std::ostream& out, bool include_secrets) const {
  out << text::join({"WALLET", label_}) << '\n';
  for (const auto& e : dids_) {
    std::vector<std::string> f{"DID", e.did, e.verkey.hex()};
    if (include_secrets && e.handle)
      f.push_back(to_hex(keys_.export_seed(*e.handle, crypto::FixtureExport{})));
    out << text::join(f) << '\n';
  }
  if (include_secrets && link_) out << text::join({"MASTER_SECRET", to_hex(master_secret_)}) << '\n';
  for (const auto& c : credentials_) {
    std::vector<std::string> f{"CRED", std::to_string(c.cred_def_ref), c.issuer_did,
                               c.holder_binding.hex(), to_hex(c.issuer_signature.bytes)};
    for (const auto& [name, value] : c.attributes) {
      f.push_back(name);
      f.push_back(value);
      f.push_back(c.salts.at(name).hex());
    }
    out << text::join(f) << '\n';
  }
  for (const auto& p : pairwise_.records()) {
    out << text::join({"PAIRWISE", p.my_did, p.my_verkey.hex(), p.their_did,
                       p.their_verkey ? p.their_verkey->hex() : "-",
                       fmt::format("{:.9f}", p.peer_location.lat_deg),
                       fmt::format("{:.9f}", p.peer_location.lon_deg),
                       fmt::format("{:.9f}", p.established_at)})
        << '\n';
  }
}

std::string Wallet::export_text(bool include_secrets) const {
  std::ostringstream out;
  export_to(out, include_secrets);
  return out.str();
}

Wallet Wallet::import_from(std::istream& in, std::uint64_t rng_seed) {
  std::string line;
  std::optional<Wallet> w;
  auto to_double = [](const std::string& s) {
    try {
      return std::stod(s);
    } catch (const std::logic_error&) {
      throw Error(Errc::MalformedMessage, "bad number '" + s + "'");
    }
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = text::split(line);
    if (!w) {
      if (f.size() != 2 || f[0] != "WALLET") throw Error(Errc::MalformedMessage, "missing WALLET header");
      w.emplace(f[1], rng_seed);
      continue;
    }
    if (f[0] == "DID" && (f.size() == 3 || f.size() == 4)) {
      crypto::Verkey vk{from_hex(f[2])};
      if (f.size() == 4) {
        auto info = w->create_did(from_hex(f[3]));
        if (info.did != f[1] || info.verkey != vk)
          throw Error(Errc::MalformedMessage, "seed does not reproduce did " + f[1]);
      } else {
        w->dids_.push_back(DidEntry{f[1], vk, std::nullopt});
      }
    } else if (f[0] == "MASTER_SECRET" && f.size() == 2) {
      if (w->has_master_secret()) throw Error(Errc::AlreadyExists, "duplicate master secret");
      w->install_master_secret(from_hex(f[1]));
    } else if (f[0] == "CRED" && f.size() >= 5 && (f.size() - 5) % 3 == 0) {
      Credential c;
      c.cred_def_ref = std::stoull(f[1]);
      c.issuer_did = f[2];
      c.holder_binding = crypto::Digest::from_hex(f[3]);
      c.issuer_signature.bytes = from_hex(f[4]);
      for (std::size_t i = 5; i < f.size(); i += 3) {
        c.attributes[f[i]] = f[i + 1];
        c.salts[f[i]] = crypto::Nonce::from_hex(f[i + 2]);
      }
      w->credentials_.push_back(std::move(c));
    } else if (f[0] == "PAIRWISE" && f.size() == 8) {
      pairwise::PairwiseRecord p;
      p.my_did = f[1];
      p.my_verkey.bytes = from_hex(f[2]);
      p.their_did = f[3];
      if (f[4] != "-") p.their_verkey = crypto::Verkey{from_hex(f[4])};
      p.peer_location = {to_double(f[5]), to_double(f[6])};
      p.established_at = to_double(f[7]);
      w->pairwise_.upsert(std::move(p));
    } else {
      throw Error(Errc::MalformedMessage, "unrecognised wallet line: " + line);
    }
  }
  if (!w) throw Error(Errc::MalformedMessage, "empty wallet export");
  return std::move(*w);
}

Wallet Wallet::import_text(std::string_view text, std::uint64_t rng_seed) {
  std::istringstream in{std::string(text)};
  return import_from(in, rng_seed);
}

// ---- issuance and proofs ---------------------------------------------------

Credential issue_credential(Wallet& issuer, const identity::IdentityLedger& ledger,
                            identity::SeqNo cred_def_ref, const Attributes& attributes,
                            const crypto::Digest& holder_commitment) {
  const identity::CredDefRecord* def = nullptr;
  try {
    def = &ledger.cred_def(cred_def_ref);
  } catch (const Error& e) {
    throw Error(Errc::UnknownCredDef, e.what());
  }
  const auto& schema = ledger.schema(def->schema_ref);

  std::set<std::string> expected(schema.attribute_names.begin(), schema.attribute_names.end());
  std::set<std::string> given;
  for (const auto& [name, value] : attributes) given.insert(name);
  if (expected != given)
    throw Error(Errc::SchemaMismatch, "attributes do not match schema " + schema.name);

  Credential c;
  c.cred_def_ref = cred_def_ref;
  c.issuer_did = def->issuer_did;
  c.attributes = attributes;
  c.holder_binding = holder_commitment;
  std::vector<crypto::Digest> digests;
  for (const auto& [name, value] : attributes) {
    auto salt = crypto::new_nonce(issuer.rng());
    c.salts[name] = salt;
    digests.push_back(attribute_digest(name, value, salt));
  }
  c.issuer_signature = issuer.sign_with_verkey(
      def->issuer_signing_verkey, credential_payload(cred_def_ref, holder_commitment, digests));
  return c;
}

Proof create_proof(const Wallet& holder, const ProofRequest& request) {
  request.validate();
  const auto& creds = holder.credentials();
  auto matches = [&](const Credential& c) {
    if (!request.accepted_issuers.empty() &&
        std::find(request.accepted_issuers.begin(), request.accepted_issuers.end(),
                  c.issuer_did) == request.accepted_issuers.end())
      return false;
    return std::all_of(request.requested_attributes.begin(), request.requested_attributes.end(),
                       [&](const auto& a) { return c.attributes.count(a) > 0; });
  };
  auto it = std::find_if(creds.begin(), creds.end(), matches);
  if (it == creds.end())
    throw Error(Errc::NoMatchingCredential,
                holder.label() + " holds no credential for request '" + request.name + "'");
  const Credential& c = *it;

  Proof p;
  p.cred_def_ref = c.cred_def_ref;
  p.holder_binding = c.holder_binding;
  p.holder_verkey = holder.holder_verkey();
  p.issuer_signature = c.issuer_signature;
  p.request_nonce = request.request_nonce;
  std::set<std::string_view> wanted(request.requested_attributes.begin(),
                                    request.requested_attributes.end());
  for (const auto& [name, value] : c.attributes) {
    const auto& salt = c.salts.at(name);
    if (wanted.count(name))
      p.revealed[name] = Disclosure{value, salt};
    else
      p.undisclosed.push_back(attribute_digest(name, value, salt));
  }
  std::sort(p.undisclosed.begin(), p.undisclosed.end());
  p.holder_signature = holder.holder_sign(holder_payload(p.request_nonce, p.cred_def_ref, p.revealed));
  return p;
}

Attributes verify_proof(const identity::IdentityLedger& ledger, const ProofRequest& request,
                        const Proof& proof) {
  std::set<std::string> requested(request.requested_attributes.begin(),
                                  request.requested_attributes.end());
  std::set<std::string> revealed;
  for (const auto& [name, d] : proof.revealed) revealed.insert(name);
  if (requested != revealed)
    throw Error(Errc::AttributeSetMismatch, "revealed attributes differ from the request");
  if (proof.request_nonce != request.request_nonce)
    throw Error(Errc::NonceMismatch, "proof answers a different request");

  const identity::CredDefRecord* def = nullptr;
  try {
    def = &ledger.cred_def(proof.cred_def_ref);
  } catch (const Error& e) {
    throw Error(Errc::UnknownCredDef, e.what());
  }
  if (!request.accepted_issuers.empty() &&
      std::find(request.accepted_issuers.begin(), request.accepted_issuers.end(),
                def->issuer_did) == request.accepted_issuers.end())
    throw Error(Errc::UntrustedIssuer, "issuer " + def->issuer_did + " is not accepted");

  std::vector<crypto::Digest> digests = proof.undisclosed;
  for (const auto& [name, d] : proof.revealed) digests.push_back(attribute_digest(name, d.value, d.salt));
  if (!crypto::verify(def->issuer_signing_verkey,
                      credential_payload(proof.cred_def_ref, proof.holder_binding, digests),
                      proof.issuer_signature))
    throw Error(Errc::BadIssuerSignature, "issuer signature does not verify");

  codec::Writer binding;
  binding.str(kBindingDomain).bytes(proof.holder_verkey.bytes);
  if (crypto::hash(binding.data()) != proof.holder_binding ||
      !crypto::verify(proof.holder_verkey,
                      holder_payload(proof.request_nonce, proof.cred_def_ref, proof.revealed),
                      proof.holder_signature))
    throw Error(Errc::BadHolderSignature, "holder binding or signature does not verify");

  Attributes out;
  for (const auto& [name, d] : proof.revealed) out[name] = d.value;
  return out;
}

}  // namespace paygo::wallet
