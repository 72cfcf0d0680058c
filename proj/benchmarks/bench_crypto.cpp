#include <benchmark/benchmark.h>

#include "paygo/crypto.hpp"
#include "paygo/identity_ledger.hpp"
#include "paygo/wallet.hpp"

using namespace paygo;

static void BM_Sign(benchmark::State& state) {
  crypto::KeyStore keys;
  Rng rng(1);
  auto kp = keys.generate(rng);
  Bytes msg(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(keys.sign(kp.sigkey_handle, msg));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sign)->Arg(64)->Arg(1024);

static void BM_Verify(benchmark::State& state) {
  crypto::KeyStore keys;
  Rng rng(1);
  auto kp = keys.generate(rng);
  Bytes msg(64, 0x5a);
  auto sig = keys.sign(kp.sigkey_handle, msg);
  for (auto _ : state) benchmark::DoNotOptimize(crypto::verify(kp.verkey, msg, sig));
}
BENCHMARK(BM_Verify);

namespace {

// Issuer, holder and one credential; the cost being measured is the proof.
struct ProofSetup {
  wallet::Wallet trustee{"trustee", 1};
  wallet::Wallet issuer{"issuer", 2};
  wallet::Wallet holder{"holder", 3};
  std::optional<identity::IdentityLedger> ledger;
  std::string issuer_did;
  Rng rng{4};

  ProofSetup() {
    auto t = trustee.create_did();
    ledger.emplace(t.did, t.verkey);
    auto i = issuer.create_did();
    issuer_did = i.did;
    ledger->submit(identity::NymRecord{i.did, i.verkey, identity::Role::TrustAnchor, {}, 0}, t.did);
    auto schema = ledger->submit(
        identity::SchemaRecord{"Client Identification", "1.0", {"name", "vat_number", "vehicle_plate"}, {}, 0},
        i.did);
    auto def = ledger->submit(identity::CredDefRecord{schema, {}, i.verkey, 0}, i.did);
    holder.create_master_secret();
    holder.store_credential(wallet::issue_credential(
        issuer, *ledger, def,
        {{"name", "Ana Silva"}, {"vat_number", "PT123456789"}, {"vehicle_plate", "AA-00-BB"}},
        holder.holder_commitment()));
  }

  wallet::ProofRequest request() {
    return wallet::make_proof_request("Client Identification", {"name", "vat_number", "vehicle_plate"},
                                      {issuer_did}, rng);
  }
};

}  // namespace

static void BM_CreateProof(benchmark::State& state) {
  ProofSetup s;
  auto req = s.request();
  for (auto _ : state) benchmark::DoNotOptimize(wallet::create_proof(s.holder, req));
}
BENCHMARK(BM_CreateProof);

static void BM_VerifyProof(benchmark::State& state) {
  ProofSetup s;
  auto req = s.request();
  auto proof = wallet::create_proof(s.holder, req);
  for (auto _ : state) benchmark::DoNotOptimize(wallet::verify_proof(*s.ledger, req, proof));
}
BENCHMARK(BM_VerifyProof);
