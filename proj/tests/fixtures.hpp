#pragma once

#include <optional>
#include <string>
#include <vector>

#include "paygo/identity_ledger.hpp"
#include "paygo/wallet.hpp"

namespace paygo::testing {

/// A trustee-rooted ledger with one TrustAnchor issuer that has published
/// a schema and a credential definition for it.
struct Registry {
  wallet::Wallet trustee;
  wallet::Wallet issuer;
  std::string trustee_did;
  std::string issuer_did;
  std::optional<identity::IdentityLedger> ledger;
  identity::SeqNo schema = 0;
  identity::SeqNo cred_def = 0;

  Registry(std::uint64_t seed, const std::string& schema_name, std::vector<std::string> attributes)
      : trustee("trustee", seed), issuer("issuer", seed + 1) {
    auto t = trustee.create_did();
    trustee_did = t.did;
    ledger.emplace(t.did, t.verkey);
    auto i = issuer.create_did();
    issuer_did = i.did;
    ledger->submit(identity::NymRecord{i.did, i.verkey, identity::Role::TrustAnchor, {}, 0}, t.did);
    schema = publish_schema(schema_name, std::move(attributes));
    cred_def = ledger->submit(identity::CredDefRecord{schema, {}, i.verkey, 0}, i.did);
  }

  identity::SeqNo publish_schema(const std::string& name, std::vector<std::string> attributes) {
    return ledger->submit(identity::SchemaRecord{name, "1.0", std::move(attributes), {}, 0},
                          issuer_did);
  }

  /// Credential for `holder` (which must have a master secret) under cred_def.
  wallet::Credential issue(wallet::Wallet& holder, const wallet::Attributes& attrs) {
    return wallet::issue_credential(issuer, *ledger, cred_def, attrs, holder.holder_commitment());
  }
};

}  // namespace paygo::testing
