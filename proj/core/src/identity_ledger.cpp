#include "paygo/identity_ledger.hpp"

#include <istream>
#include <optional>
#include <set>
#include <sstream>

#include "paygo/error.hpp"

namespace paygo::identity {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::IdentityOwner: return "IdentityOwner";
    case Role::TrustAnchor: return "TrustAnchor";
    case Role::Steward: return "Steward";
    case Role::Trustee: return "Trustee";
  }
  return "IdentityOwner";
}

Role role_from_string(std::string_view name) {
  for (auto r : {Role::IdentityOwner, Role::TrustAnchor, Role::Steward, Role::Trustee})
    if (to_string(r) == name) return r;
  throw Error(Errc::MalformedMessage, "unknown role '" + std::string(name) + "'");
}

std::string did_from_verkey(const crypto::Verkey& verkey) {
  auto n = std::min<std::size_t>(16, verkey.bytes.size());
  return base58_encode(ByteView(verkey.bytes.data(), n));
}

RecordKind kind_of(const Record& record) {
  return static_cast<RecordKind>(record.index());
}

SeqNo seq_no_of(const Record& record) {
  return std::visit([](const auto& r) { return r.seq_no; }, record);
}

bool may_submit(Role submitter, RecordKind kind, Role target) {
  if (submitter < Role::TrustAnchor) return false;
  if (kind != RecordKind::Nym) return true;
  return submitter == Role::Trustee || target < submitter;
}

IdentityLedger::IdentityLedger(std::string genesis_did, crypto::Verkey genesis_verkey) {
  NymRecord genesis{genesis_did, std::move(genesis_verkey), Role::Trustee, genesis_did, 1};
  latest_nym_[genesis.did] = 1;
  records_.emplace_back(std::move(genesis));
}

void IdentityLedger::check_permission(const Record& record, const NymRecord& submitter) const {
  if (const auto* nym = std::get_if<NymRecord>(&record)) {
    if (nym->did.empty() || nym->verkey.bytes.empty())
      throw Error(Errc::InvalidRecord, "NYM needs a did and a verkey");
    auto existing = latest_nym_.find(nym->did);
    if (existing != latest_nym_.end()) {
      const auto& current = std::get<NymRecord>(records_[existing->second - 1]);
      if (submitter.did == nym->did) {
        // key rotation by the owner; roles only change through a Trustee
        if (nym->role != current.role && submitter.role != Role::Trustee)
          throw Error(Errc::PermissionDenied, "owner may not change its own role");
        return;
      }
      if (submitter.role != Role::Trustee)
        throw Error(Errc::PermissionDenied, "only a Trustee may update another party's NYM");
      return;
    }
    if (!may_submit(submitter.role, RecordKind::Nym, nym->role))
      throw Error(Errc::PermissionDenied,
                  std::string(to_string(submitter.role)) + " may not create a " +
                      std::string(to_string(nym->role)) + " NYM");
    return;
  }
  if (!may_submit(submitter.role, kind_of(record)))
    throw Error(Errc::PermissionDenied, std::string(to_string(submitter.role)) +
                                            " may not publish schemas or credential definitions");
  if (const auto* schema = std::get_if<SchemaRecord>(&record)) {
    if (schema->name.empty() || schema->attribute_names.empty())
      throw Error(Errc::InvalidRecord, "schema needs a name and attributes");
    std::set<std::string_view> seen;
    for (const auto& a : schema->attribute_names)
      if (a.empty() || !seen.insert(a).second)
        throw Error(Errc::InvalidRecord, "schema attribute names must be unique and non-empty");
  }
  if (const auto* def = std::get_if<CredDefRecord>(&record)) {
    if (def->schema_ref == 0 || def->schema_ref > records_.size() ||
        kind_of(records_[def->schema_ref - 1]) != RecordKind::Schema)
      throw Error(Errc::DanglingReference,
                  "schema_ref " + std::to_string(def->schema_ref) + " is not a schema");
    if (def->issuer_signing_verkey.bytes.empty())
      throw Error(Errc::InvalidRecord, "credential definition needs a signing verkey");
  }
}

SeqNo IdentityLedger::submit(Record record, const std::string& submitter_did) {
  auto it = latest_nym_.find(submitter_did);
  if (it == latest_nym_.end())
    throw Error(Errc::UnknownSubmitter, "submitter '" + submitter_did + "' is not on the ledger");
  const auto submitter = std::get<NymRecord>(records_[it->second - 1]);

  std::visit(
      [&](auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, NymRecord>)
          r.submitter_did = submitter_did;
        else
          r.issuer_did = submitter_did;
      },
      record);
  check_permission(record, submitter);

  const SeqNo seq = records_.size() + 1;
  std::visit([seq](auto& r) { r.seq_no = seq; }, record);
  if (const auto* nym = std::get_if<NymRecord>(&record)) latest_nym_[nym->did] = seq;
  records_.push_back(std::move(record));
  return seq;
}

const NymRecord& IdentityLedger::resolve_did(std::string_view did) const {
  auto it = latest_nym_.find(did);
  if (it == latest_nym_.end()) throw Error(Errc::NotFound, "did '" + std::string(did) + "'");
  return std::get<NymRecord>(records_[it->second - 1]);
}

const Record& IdentityLedger::resolve_record(SeqNo seq_no) const {
  if (seq_no == 0 || seq_no > records_.size())
    throw Error(Errc::OutOfRange, "seq_no " + std::to_string(seq_no));
  return records_[seq_no - 1];
}

const SchemaRecord& IdentityLedger::schema(SeqNo seq_no) const {
  const auto* s = std::get_if<SchemaRecord>(&resolve_record(seq_no));
  if (!s) throw Error(Errc::NotFound, "seq_no " + std::to_string(seq_no) + " is not a schema");
  return *s;
}

const CredDefRecord& IdentityLedger::cred_def(SeqNo seq_no) const {
  const auto* d = std::get_if<CredDefRecord>(&resolve_record(seq_no));
  if (!d)
    throw Error(Errc::NotFound,
                "seq_no " + std::to_string(seq_no) + " is not a credential definition");
  return *d;
}

void IdentityLedger::dump(std::ostream& out) const {
  for (const auto& record : records_) {
    std::vector<std::string> f;
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, NymRecord>) {
            f = {"NYM", std::to_string(r.seq_no), r.did, r.verkey.hex(),
                 std::string(to_string(r.role)), r.submitter_did};
          } else if constexpr (std::is_same_v<T, SchemaRecord>) {
            f = {"SCHEMA", std::to_string(r.seq_no), r.issuer_did, r.name, r.version};
            f.insert(f.end(), r.attribute_names.begin(), r.attribute_names.end());
          } else {
            f = {"CRED_DEF", std::to_string(r.seq_no), r.issuer_did, std::to_string(r.schema_ref),
                 r.issuer_signing_verkey.hex()};
          }
        },
        record);
    out << text::join(f) << '\n';
  }
}

std::string IdentityLedger::dump() const {
  std::ostringstream out;
  dump(out);
  return out.str();
}

namespace {

SeqNo parse_seq(const std::string& s) {
  try {
    std::size_t used = 0;
    auto v = std::stoull(s, &used);
    if (used != s.size()) throw Error(Errc::MalformedMessage, "bad seq_no '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw Error(Errc::MalformedMessage, "bad seq_no '" + s + "'");
  }
}

}  // namespace

IdentityLedger IdentityLedger::load(std::istream& in) {
  std::string line;
  std::optional<IdentityLedger> ledger;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = text::split(line);
    auto need = [&](std::size_t n) {
      if (f.size() < n) throw Error(Errc::MalformedMessage, "short ledger line: " + line);
    };
    need(2);
    const SeqNo seq = parse_seq(f[1]);
    const SeqNo expected = ledger ? ledger->size() + 1 : 1;
    if (seq != expected)
      throw Error(Errc::MalformedMessage, "ledger seq_no out of order at " + f[1]);

    Record record;
    std::string submitter;
    if (f[0] == "NYM") {
      need(6);
      record = NymRecord{f[2], crypto::Verkey{from_hex(f[3])}, role_from_string(f[4]), f[5], 0};
      submitter = f[5];
    } else if (f[0] == "SCHEMA") {
      need(5);
      record = SchemaRecord{f[3], f[4], {f.begin() + 5, f.end()}, f[2], 0};
      submitter = f[2];
    } else if (f[0] == "CRED_DEF") {
      need(5);
      record = CredDefRecord{parse_seq(f[3]), f[2], crypto::Verkey{from_hex(f[4])}, 0};
      submitter = f[2];
    } else {
      throw Error(Errc::MalformedMessage, "unknown ledger record '" + f[0] + "'");
    }

    if (!ledger) {
      auto* nym = std::get_if<NymRecord>(&record);
      if (!nym || nym->role != Role::Trustee || nym->submitter_did != nym->did)
        throw Error(Errc::InvalidRecord, "first ledger record must be a self-submitted Trustee NYM");
      ledger.emplace(nym->did, nym->verkey);
      continue;
    }
    ledger->submit(std::move(record), submitter);
  }
  if (!ledger) throw Error(Errc::MalformedMessage, "empty ledger dump");
  return std::move(*ledger);
}

IdentityLedger IdentityLedger::load(std::string_view text) {
  std::istringstream in{std::string(text)};
  return load(in);
}

}  // namespace paygo::identity
