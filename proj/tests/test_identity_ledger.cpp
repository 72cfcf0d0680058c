#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "paygo/crypto.hpp"
#include "paygo/error.hpp"
#include "paygo/identity_ledger.hpp"

using namespace paygo;
using namespace paygo::identity;

namespace {

struct Party {
  std::string did;
  crypto::Verkey verkey;
};

class LedgerTest : public ::testing::Test {
 protected:
  Party make() {
    auto kp = keys_.generate(rng_);
    return {did_from_verkey(kp.verkey), kp.verkey};
  }

  /// Ledger with one party per role, each onboarded by the trustee.
  void SetUp() override {
    trustee_ = make();
    ledger_.emplace(trustee_.did, trustee_.verkey);
    for (auto role : {Role::IdentityOwner, Role::TrustAnchor, Role::Steward}) {
      by_role_[role] = make();
      ledger_->submit(NymRecord{by_role_[role].did, by_role_[role].verkey, role, {}}, trustee_.did);
    }
    by_role_[Role::Trustee] = trustee_;
  }

  Errc submit_error(Record r, const std::string& submitter) {
    try {
      ledger_->submit(std::move(r), submitter);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;  // sentinel for "accepted"
  }

  Rng rng_{42};
  crypto::KeyStore keys_;
  Party trustee_;
  std::optional<IdentityLedger> ledger_;
  std::map<Role, Party> by_role_;
};

}  // namespace

TEST(Role, NamesRoundTrip) {
  for (auto r : {Role::IdentityOwner, Role::TrustAnchor, Role::Steward, Role::Trustee})
    EXPECT_EQ(role_from_string(to_string(r)), r);
}

TEST_F(LedgerTest, GenesisIsSeqOne) {
  IdentityLedger fresh(trustee_.did, trustee_.verkey);
  EXPECT_EQ(fresh.size(), 1u);
  const auto& g = std::get<NymRecord>(fresh.resolve_record(1));
  EXPECT_EQ(g.role, Role::Trustee);
  EXPECT_EQ(g.did, trustee_.did);
  EXPECT_THROW(fresh.resolve_record(0), Error);
  EXPECT_THROW(fresh.resolve_record(2), Error);
}

TEST_F(LedgerTest, StewardOnboardsTrustAnchor) {
  auto p = make();
  EXPECT_NO_THROW(ledger_->submit(NymRecord{p.did, p.verkey, Role::TrustAnchor, {}},
                                  by_role_[Role::Steward].did));
  EXPECT_EQ(ledger_->resolve_did(p.did).role, Role::TrustAnchor);
  EXPECT_EQ(ledger_->resolve_did(p.did).submitter_did, by_role_[Role::Steward].did);
}

TEST_F(LedgerTest, IdentityOwnerCannotOnboard) {
  auto p = make();
  EXPECT_EQ(submit_error(NymRecord{p.did, p.verkey, Role::IdentityOwner, {}},
                         by_role_[Role::IdentityOwner].did),
            Errc::PermissionDenied);
}

TEST_F(LedgerTest, UnknownSubmitter) {
  auto p = make();
  EXPECT_EQ(submit_error(NymRecord{p.did, p.verkey, Role::IdentityOwner, {}}, "nobody"),
            Errc::UnknownSubmitter);
}

TEST_F(LedgerTest, CredDefNeedsExistingSchema) {
  const auto& ta = by_role_[Role::TrustAnchor];
  EXPECT_EQ(submit_error(CredDefRecord{99, {}, ta.verkey, 0}, ta.did), Errc::DanglingReference);
  // seq 2 exists but is a NYM, not a schema
  EXPECT_EQ(submit_error(CredDefRecord{2, {}, ta.verkey, 0}, ta.did), Errc::DanglingReference);
  auto s = ledger_->submit(SchemaRecord{"Tolling Charge", "1.0", {"name"}, {}, 0}, ta.did);
  EXPECT_NO_THROW(ledger_->submit(CredDefRecord{s, {}, ta.verkey, 0}, ta.did));
}

TEST_F(LedgerTest, InvalidRecords) {
  const auto& ta = by_role_[Role::TrustAnchor];
  EXPECT_EQ(submit_error(SchemaRecord{"", "1", {"a"}, {}, 0}, ta.did), Errc::InvalidRecord);
  EXPECT_EQ(submit_error(SchemaRecord{"x", "1", {}, {}, 0}, ta.did), Errc::InvalidRecord);
  EXPECT_EQ(submit_error(SchemaRecord{"x", "1", {"a", "a"}, {}, 0}, ta.did), Errc::InvalidRecord);
  EXPECT_EQ(submit_error(NymRecord{"", ta.verkey, Role::IdentityOwner, {}}, ta.did),
            Errc::InvalidRecord);
}

TEST_F(LedgerTest, SupersessionReturnsLatest) {
  auto p = make();
  const auto first = ledger_->submit(NymRecord{p.did, p.verkey, Role::IdentityOwner, {}}, trustee_.did);
  for (int i = 0; i < 5; ++i)
    ledger_->submit(SchemaRecord{"s" + std::to_string(i), "1", {"a"}, {}, 0},
                    by_role_[Role::TrustAnchor].did);
  auto rotated = make();
  const auto second = ledger_->submit(NymRecord{p.did, rotated.verkey, Role::IdentityOwner, {}}, p.did);
  EXPECT_LT(first, second);
  EXPECT_EQ(ledger_->resolve_did(p.did).seq_no, second);
  EXPECT_EQ(ledger_->resolve_did(p.did).verkey, rotated.verkey);
  // the superseded record is still there
  EXPECT_EQ(std::get<NymRecord>(ledger_->resolve_record(first)).verkey, p.verkey);
  EXPECT_THROW(ledger_->resolve_did("unknown"), Error);
}

TEST_F(LedgerTest, SupersessionMatchesFullScan) {
  std::vector<Party> parties;
  for (int i = 0; i < 8; ++i) {
    parties.push_back(make());
    ledger_->submit(NymRecord{parties.back().did, parties.back().verkey, Role::IdentityOwner, {}},
                    trustee_.did);
  }
  for (int i = 0; i < 60; ++i) {
    auto& p = parties[rng_.below(parties.size())];
    auto rotated = make();
    ledger_->submit(NymRecord{p.did, rotated.verkey, Role::IdentityOwner, {}}, p.did);
    p.verkey = rotated.verkey;
  }
  for (const auto& p : parties) {
    SeqNo best = 0;
    for (const auto& r : ledger_->records())
      if (auto* n = std::get_if<NymRecord>(&r); n && n->did == p.did) best = std::max(best, n->seq_no);
    EXPECT_EQ(ledger_->resolve_did(p.did).seq_no, best);
    EXPECT_EQ(ledger_->resolve_did(p.did).verkey, p.verkey);
  }
}

TEST_F(LedgerTest, SeqNumbersIncreaseAndReplayMatches) {
  std::vector<SeqNo> assigned;
  const auto& ta = by_role_[Role::TrustAnchor];
  for (int i = 0; i < 10; ++i)
    assigned.push_back(ledger_->submit(SchemaRecord{"s" + std::to_string(i), "1", {"a"}, {}, 0}, ta.did));
  for (std::size_t i = 1; i < assigned.size(); ++i) EXPECT_EQ(assigned[i], assigned[i - 1] + 1);
  EXPECT_EQ(std::get<SchemaRecord>(ledger_->resolve_record(ledger_->size())).name, "s9");
  for (SeqNo s = 1; s <= ledger_->size(); ++s) EXPECT_EQ(seq_no_of(ledger_->resolve_record(s)), s);
}

TEST_F(LedgerTest, AppendOnlyPrefix) {
  const auto before = ledger_->snapshot();
  ledger_->submit(SchemaRecord{"later", "1", {"a"}, {}, 0}, by_role_[Role::TrustAnchor].did);
  const auto after = ledger_->snapshot();
  ASSERT_EQ(after.size(), before.size() + 1);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(after[i], before[i]);

  IdentityLedger a = IdentityLedger::load(ledger_->dump());
  EXPECT_EQ(a.records(), ledger_->records());
}

TEST_F(LedgerTest, OwnerMayRotateKeyButNotRole) {
  const auto& io = by_role_[Role::IdentityOwner];
  EXPECT_EQ(submit_error(NymRecord{io.did, io.verkey, Role::Trustee, {}}, io.did),
            Errc::PermissionDenied);
  EXPECT_EQ(submit_error(NymRecord{io.did, io.verkey, Role::IdentityOwner, {}},
                         by_role_[Role::Steward].did),
            Errc::PermissionDenied);
  EXPECT_EQ(submit_error(NymRecord{io.did, io.verkey, Role::TrustAnchor, {}}, trustee_.did), Errc::Io);
}

// Declared hierarchy, written out by hand: who may write what.
TEST_F(LedgerTest, PermissionMatrixMatchesHierarchy) {
  const std::vector<Role> roles{Role::IdentityOwner, Role::TrustAnchor, Role::Steward, Role::Trustee};
  // expected[submitter][target] for new NYMs
  const std::map<Role, std::map<Role, bool>> nym{
      {Role::IdentityOwner, {{Role::IdentityOwner, false}, {Role::TrustAnchor, false}, {Role::Steward, false}, {Role::Trustee, false}}},
      {Role::TrustAnchor, {{Role::IdentityOwner, true}, {Role::TrustAnchor, false}, {Role::Steward, false}, {Role::Trustee, false}}},
      {Role::Steward, {{Role::IdentityOwner, true}, {Role::TrustAnchor, true}, {Role::Steward, false}, {Role::Trustee, false}}},
      {Role::Trustee, {{Role::IdentityOwner, true}, {Role::TrustAnchor, true}, {Role::Steward, true}, {Role::Trustee, true}}},
  };
  const std::map<Role, bool> publish{{Role::IdentityOwner, false}, {Role::TrustAnchor, true},
                                     {Role::Steward, true}, {Role::Trustee, true}};

  for (auto submitter : roles) {
    const auto& who = by_role_[submitter];
    for (auto target : roles) {
      auto p = make();
      const bool ok = submit_error(NymRecord{p.did, p.verkey, target, {}}, who.did) == Errc::Io;
      EXPECT_EQ(ok, nym.at(submitter).at(target))
          << to_string(submitter) << " -> NYM " << to_string(target);
      EXPECT_EQ(may_submit(submitter, RecordKind::Nym, target), nym.at(submitter).at(target));
    }
    const auto schema_err = submit_error(SchemaRecord{"s", "1", {"a"}, {}, 0}, who.did);
    EXPECT_EQ(schema_err == Errc::Io, publish.at(submitter)) << to_string(submitter) << " schema";
    // a schema published by the trustee to reference
    const auto ref = ledger_->submit(SchemaRecord{"ref", "1", {"a"}, {}, 0}, trustee_.did);
    const auto def_err = submit_error(CredDefRecord{ref, {}, who.verkey, 0}, who.did);
    EXPECT_EQ(def_err == Errc::Io, publish.at(submitter)) << to_string(submitter) << " cred def";
    if (!publish.at(submitter)) {
      EXPECT_EQ(schema_err, Errc::PermissionDenied);
      EXPECT_EQ(def_err, Errc::PermissionDenied);
    }
  }
}

TEST_F(LedgerTest, DumpLoadRoundTrip) {
  const auto& ta = by_role_[Role::TrustAnchor];
  auto s = ledger_->submit(SchemaRecord{"Client Identification", "1.0",
                                        {"name", "vat_number", "vehicle_plate"}, {}, 0},
                           ta.did);
  ledger_->submit(CredDefRecord{s, {}, ta.verkey, 0}, ta.did);
  const auto text = ledger_->dump();
  auto copy = IdentityLedger::load(text);
  EXPECT_EQ(copy.dump(), text);
  EXPECT_EQ(copy.cred_def(s + 1).schema_ref, s);
  EXPECT_EQ(copy.schema(s).attribute_names.size(), 3u);
}

TEST_F(LedgerTest, LoadRechecksPermissions) {
  auto text = ledger_->dump();
  // forge a line claiming the identity owner created a steward
  const auto& io = by_role_[Role::IdentityOwner];
  auto p = make();
  text += "NYM\t" + std::to_string(ledger_->size() + 1) + "\t" + p.did + "\t" + p.verkey.hex() +
          "\tSteward\t" + io.did + "\n";
  try {
    IdentityLedger::load(text);
    FAIL() << "forged dump accepted";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::PermissionDenied);
  }
}
