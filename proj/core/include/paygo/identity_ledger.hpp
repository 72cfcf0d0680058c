#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "paygo/crypto.hpp"

namespace paygo::identity {

/// Write-permission hierarchy of the permissioned identity ledger, lowest
/// first. Each role can do everything the roles below it can.
enum class Role : std::uint8_t { IdentityOwner = 0, TrustAnchor = 1, Steward = 2, Trustee = 3 };

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

/// Decentralised identifier derived from a verkey: base58 of its first 16 bytes.
std::string did_from_verkey(const crypto::Verkey& verkey);

using SeqNo = std::uint64_t;

struct NymRecord {
  std::string did;
  crypto::Verkey verkey;
  Role role = Role::IdentityOwner;
  std::string submitter_did;
  SeqNo seq_no = 0;

  friend bool operator==(const NymRecord&, const NymRecord&) = default;
};

struct SchemaRecord {
  std::string name;
  std::string version;
  std::vector<std::string> attribute_names;
  std::string issuer_did;
  SeqNo seq_no = 0;

  friend bool operator==(const SchemaRecord&, const SchemaRecord&) = default;
};

struct CredDefRecord {
  SeqNo schema_ref = 0;
  std::string issuer_did;
  crypto::Verkey issuer_signing_verkey;
  SeqNo seq_no = 0;

  friend bool operator==(const CredDefRecord&, const CredDefRecord&) = default;
};

using Record = std::variant<NymRecord, SchemaRecord, CredDefRecord>;

enum class RecordKind { Nym, Schema, CredDef };
RecordKind kind_of(const Record& record);
SeqNo seq_no_of(const Record& record);

/// Whether a submitter holding `submitter` may write a record of `kind`.
/// For NYMs `target` is the role being granted to another party.
bool may_submit(Role submitter, RecordKind kind, Role target = Role::IdentityOwner);

/// Append-only sequence of role-gated records. Newer NYMs for the same DID
/// supersede older ones in queries; the old records stay in place.
///
/// Single-writer: submissions must be serialised by the owner. snapshot()
/// produces an immutable copy that can be read from other threads.
class IdentityLedger {
 public:
  /// Genesis: one Trustee NYM, self-submitted, at seq_no 1.
  IdentityLedger(std::string genesis_did, crypto::Verkey genesis_verkey);

  /// Appends `record` on behalf of `submitter_did`. The submitter/issuer
  /// field of the record is overwritten with `submitter_did` and seq_no is
  /// assigned. Errors: UnknownSubmitter, PermissionDenied, DanglingReference,
  /// InvalidRecord.
  SeqNo submit(Record record, const std::string& submitter_did);

  /// Highest-seq_no NYM for `did`; Errc::NotFound otherwise.
  const NymRecord& resolve_did(std::string_view did) const;
  /// Errc::OutOfRange unless 1 <= seq_no <= size().
  const Record& resolve_record(SeqNo seq_no) const;

  const SchemaRecord& schema(SeqNo seq_no) const;
  const CredDefRecord& cred_def(SeqNo seq_no) const;

  std::size_t size() const { return records_.size(); }
  const std::vector<Record>& records() const { return records_; }
  std::vector<Record> snapshot() const { return records_; }

  /// One record per line, tab-separated, stable field order:
  ///   NYM      seq did verkey_hex role submitter
  ///   SCHEMA   seq issuer name version attr...
  ///   CRED_DEF seq issuer schema_ref verkey_hex
  void dump(std::ostream& out) const;
  std::string dump() const;
  /// Replays a dump through submit(), so permission rules are re-checked.
  static IdentityLedger load(std::istream& in);
  static IdentityLedger load(std::string_view text);

 private:
  void check_permission(const Record& record, const NymRecord& submitter) const;

  std::vector<Record> records_;
  std::map<std::string, SeqNo, std::less<>> latest_nym_;
};

}  // namespace paygo::identity
