// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <unistd.h>

#include <fmt/core.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "paygo/error.hpp"
#include "paygo/harness.hpp"
#include "paygo/tangle.hpp"
#include "paygo/tolling.hpp"
#include "paygo/wallet.hpp"
#include "tangle_oracle.hpp"

using namespace paygo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail.clear();
      pass = false;
      if (detail.size() < 400) detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * want; }

// ---- 1 ----------------------------------------------------------------------

Outcome window_length() {
  Outcome o;
  const double w = harness::window(600, 130);
  o.detail = fmt::format("window(600 m, 130 km/h) = {:.4f} s", w);
  o.require(std::abs(w - 33.23) <= 0.05, o.detail);
  return o;
}

// ---- 2 to 4 share one calibrated batch ---------------------------------------

struct Batch {
  harness::FeasibilityReport report;
  std::vector<double> totals;
  std::size_t trials = 0;
};

Batch calibrated_batch() {
  harness::ScenarioConfig cfg;  // 1000 trials, seed 1, calibrated
  auto run = harness::run_trials(cfg);
  Batch b{harness::feasibility_report(run.samples, harness::window(cfg.comm_range_m, cfg.speed_kmh)),
          {}, cfg.trials};
  for (const auto& s : run.samples)
    if (s.phase == "total") b.totals.push_back(s.elapsed_s);
  return b;
}

Outcome check_means(const Batch& b, const std::vector<std::pair<std::string, double>>& targets) {
  Outcome o;
  std::string detail;
  for (const auto& [phase, want] : targets) {
    const auto& st = b.report.stats(phase);
    detail += fmt::format("{}{} {:.1f} ms (target {:.1f}, n={})", detail.empty() ? "" : ", ", phase,
                          st.mean * 1e3, want * 1e3, st.count);
    o.require(st.count == b.trials, phase + " missing samples");
    o.require(within(st.mean, want, 0.05), phase + " off target");
  }
  if (o.pass) o.detail = detail;
  else o.detail += " | " + detail;
  return o;
}

Outcome total_and_window(const Batch& b) {
  Outcome o = check_means(b, {{"total", 2.6}});
  std::size_t inside = 0;
  for (double t : b.totals) inside += t <= 33.2 ? 1 : 0;
  o.require(b.totals.size() == b.trials, "missing totals");
  o.require(inside == b.totals.size(), fmt::format("{} of {} within 33.2 s", inside, b.totals.size()));
  if (o.pass)
    o.detail += fmt::format(", {}/{} trials within 33.2 s, margin {:.2f} s", inside, b.totals.size(),
                            b.report.margin_s);
  return o;
}

// ---- 5 ----------------------------------------------------------------------

Outcome live_pow() {
  Outcome o;
  Rng rng(2024);
  std::string detail;
  for (unsigned d : {8u, 12u, 16u}) {
    const int runs = 500;
    double attempts = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < runs; ++i) {
      tangle::TangleTx draft;
      draft.address = tangle::Address(fmt::format("acc-{}", rng()));
      draft.timestamp_us = static_cast<std::int64_t>(rng.below(1u << 30));
      const auto r = tangle::do_pow(draft, d);
      draft.pow_nonce = r.nonce;
      draft.difficulty = d;
      draft.id = draft.compute_id();
      o.require(tangle::pow_valid(draft), fmt::format("d={} nonce does not validate", d));
      attempts += static_cast<double>(r.attempts);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const double mean = attempts / runs, want = std::ldexp(1.0, static_cast<int>(d));
    o.require(within(mean, want, 0.25), fmt::format("d={} mean attempts {:.0f} vs {:.0f}", d, mean, want));
    detail += fmt::format("{}d={}: {:.0f} attempts (2^d={:.0f}, {:.2f} ms/run)", detail.empty() ? "" : ", ",
                          d, mean, want, wall / runs * 1e3);
  }
  if (o.pass) o.detail = fmt::format("500 runs each; {}", detail);
  return o;
}

// ---- 6 ----------------------------------------------------------------------

Outcome tangle_invariants() {
  Outcome o;
  Rng rng(6);
  crypto::KeyStore keys;
  std::vector<crypto::KeyPair> kps;
  std::vector<tangle::Address> addrs;
  tangle::TangleState::Allocations alloc;
  for (int i = 0; i < 12; ++i) {
    kps.push_back(keys.generate(rng));
    addrs.push_back(tangle::Address::from_verkey(kps.back().verkey));
    if (i < 8) alloc[addrs.back()] = 5000;
  }
  auto s = tangle::TangleState::genesis(alloc);
  std::map<tangle::Address, tangle::Amount> mirror(alloc.begin(), alloc.end());
  std::set<tangle::TxId> tips{s.genesis_id()};
  tangle::Amount supply = 0;
  for (const auto& [a, v] : alloc) supply += v;

  int attaches = 0, refused = 0;
  for (int i = 0; attaches < 10000 && o.pass; ++i) {
    const auto from = rng.below(addrs.size()), to = rng.below(addrs.size());
    const tangle::Amount have = s.balance(addrs[from]);
    // roughly one in ten asks for more than the sender holds
    const tangle::Amount amount =
        rng.below(10) == 0 ? have + 1 + static_cast<tangle::Amount>(rng.below(20))
                           : 1 + static_cast<tangle::Amount>(rng.below(40));
    auto bundle = tangle::build_value_bundle(keys, kps[from].sigkey_handle, addrs[from], addrs[to],
                                             amount, crypto::new_nonce(rng), i);
    if (amount > have) {
      const auto before = s.size();
      bool threw = false;
      try {
        s.attach_bundle(bundle, 4, rng);
      } catch (const Error& e) {
        threw = e.code() == Errc::InsufficientBalance;
      }
      o.require(threw && s.size() == before, fmt::format("overdraft {} accepted", i));
      ++refused;
      continue;
    }
    const auto attached = s.attach_bundle(bundle, 4, rng);
    ++attaches;
    mirror[addrs[from]] -= amount;
    mirror[addrs[to]] += amount;

    tangle::Amount sum = 0;
    for (const auto& t : attached.transactions) {
      sum += t.value;
      o.require(!t.trunk.is_zero() && !t.branch.is_zero() && s.contains(t.trunk) && s.contains(t.branch),
                fmt::format("attach {}: outdegree", i));
      o.require(tangle::pow_valid(s.tx(t.id)), fmt::format("attach {}: pow", i));
      tips.insert(t.id);
    }
    for (const auto& t : attached.transactions) {
      tips.erase(t.trunk);
      tips.erase(t.branch);
    }
    o.require(sum == 0, fmt::format("attach {}: bundle sum {}", i, sum));
    o.require(tips == s.tips(), fmt::format("attach {}: tip set", i));
    o.require(s.balance(addrs[from]) == mirror[addrs[from]] && s.balance(addrs[to]) == mirror[addrs[to]],
              fmt::format("attach {}: balances", i));
    o.require(s.total_supply() == supply, fmt::format("attach {}: supply", i));

    if (attaches % 1000 == 0) {
      const auto v = testing::tangle_violations(s, alloc);
      o.require(v.empty(), fmt::format("full check at {}: {}", i, v.empty() ? "" : v.front()));
      o.require(testing::brute_force_tips(s) == s.tips(), fmt::format("brute-force tips at {}", i));
    }
  }
  const auto v = testing::tangle_violations(s, alloc);
  o.require(v.empty(), "final full check: " + (v.empty() ? std::string() : v.front()));
  if (o.pass)
    o.detail = fmt::format("{} attaches + {} refused overdrafts, {} vertices, 0 violations", attaches,
                           refused, s.size());
  return o;
}

// ---- 7 ----------------------------------------------------------------------

void flip(std::span<std::uint8_t> bytes, Rng& rng) { bytes[rng.below(bytes.size())] ^= 1 + rng.below(255); }

Outcome credentials_and_permissions() {
  Outcome o;
  const std::vector<std::string> schema{"name", "vat_number", "vehicle_plate"};
  testing::Registry reg(700, "Client Identification", schema);
  const auto other_def = reg.ledger->submit(
      identity::CredDefRecord{reg.schema, {}, reg.ledger->resolve_did(reg.issuer_did).verkey, 0}, reg.issuer_did);
  Rng rng(7);

  using Mutation = std::function<void(wallet::Proof&)>;
  const std::vector<Mutation> mutations{
      [&](wallet::Proof& p) { std::next(p.revealed.begin(), rng.below(p.revealed.size()))->second.value += "x"; },
      [&](wallet::Proof& p) { flip(std::next(p.revealed.begin(), rng.below(p.revealed.size()))->second.salt.bytes, rng); },
      [&](wallet::Proof& p) { p.revealed.erase(std::next(p.revealed.begin(), rng.below(p.revealed.size()))); },
      [&](wallet::Proof& p) { p.revealed["axle_count"] = {"2", crypto::new_nonce(rng)}; },
      [&](wallet::Proof& p) {
        if (p.undisclosed.empty()) p.undisclosed.push_back(crypto::hash(std::string_view("extra")));
        else flip(p.undisclosed[rng.below(p.undisclosed.size())].bytes, rng);
      },
      [&](wallet::Proof& p) { p.cred_def_ref = rng.below(2) ? other_def : 9999; },
      [&](wallet::Proof& p) { flip(p.holder_binding.bytes, rng); },
      [&](wallet::Proof& p) { flip(p.holder_verkey.bytes, rng); },
      [&](wallet::Proof& p) { flip(p.issuer_signature.bytes, rng); },
      [&](wallet::Proof& p) { flip(p.request_nonce.bytes, rng); },
      [&](wallet::Proof& p) { flip(p.holder_signature.bytes, rng); },
  };

  int accepted = 0, rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    wallet::Wallet holder("holder", 10000 + i);
    holder.create_master_secret();
    const wallet::Attributes attrs{{"name", fmt::format("Driver {}", rng.below(1000000))},
                                   {"vat_number", fmt::format("PT{:09}", rng.below(1000000000))},
                                   {"vehicle_plate", fmt::format("{:02}-XY-{:02}", rng.below(100), rng.below(100))}};
    holder.store_credential(reg.issue(holder, attrs));
    std::vector<std::string> subset;
    while (subset.empty())
      for (const auto& a : schema)
        if (rng.below(2)) subset.push_back(a);
    auto req = wallet::make_proof_request("Client Identification", subset, {reg.issuer_did}, rng);
    const auto proof = wallet::create_proof(holder, req);
    try {
      auto got = wallet::verify_proof(*reg.ledger, req, proof);
      wallet::Attributes want;
      for (const auto& a : subset) want[a] = attrs.at(a);
      o.require(got == want, fmt::format("round trip {} disclosed the wrong set", i));
      ++accepted;
    } catch (const Error& e) {
      o.require(false, fmt::format("round trip {} rejected: {}", i, to_string(e.code())));
    }

    auto bad = proof;
    mutations[static_cast<std::size_t>(i) % mutations.size()](bad);
    bool threw = false;
    try {
      wallet::verify_proof(*reg.ledger, req, bad);
    } catch (const Error&) {
      threw = true;
    }
    o.require(threw, fmt::format("mutation {} (kind {}) accepted", i, i % mutations.size()));
    rejected += threw ? 1 : 0;
  }

  // Permission matrix: nym[submitter][target], then schema / cred def publishing.
  using identity::Role;
  const std::vector<Role> roles{Role::IdentityOwner, Role::TrustAnchor, Role::Steward, Role::Trustee};
  const std::map<Role, std::set<Role>> may_onboard{
      {Role::IdentityOwner, {}},
      {Role::TrustAnchor, {Role::IdentityOwner}},
      {Role::Steward, {Role::IdentityOwner, Role::TrustAnchor}},
      {Role::Trustee, {Role::IdentityOwner, Role::TrustAnchor, Role::Steward, Role::Trustee}}};
  crypto::KeyStore keys;
  auto fresh = [&] {
    auto kp = keys.generate(rng);
    return std::pair{identity::did_from_verkey(kp.verkey), kp.verkey};
  };
  const auto [tdid, tvk] = fresh();
  identity::IdentityLedger ledger(tdid, tvk);
  std::map<Role, std::string> member{{Role::Trustee, tdid}};
  for (auto r : {Role::IdentityOwner, Role::TrustAnchor, Role::Steward}) {
    auto [d, vk] = fresh();
    ledger.submit(identity::NymRecord{d, vk, r, {}, 0}, tdid);
    member[r] = d;
  }
  auto accepted_by = [&](identity::Record rec, const std::string& who) {
    try {
      ledger.submit(std::move(rec), who);
      return true;
    } catch (const Error& e) {
      o.require(e.code() == Errc::PermissionDenied, "unexpected " + std::string(to_string(e.code())));
      return false;
    }
  };
  int cells = 0;
  for (auto sub : roles) {
    for (auto target : roles) {
      auto [d, vk] = fresh();
      const bool want = may_onboard.at(sub).count(target) > 0;
      o.require(accepted_by(identity::NymRecord{d, vk, target, {}, 0}, member[sub]) == want,
                fmt::format("{} -> NYM {}", to_string(sub), to_string(target)));
      ++cells;
    }
    const bool publisher = sub != Role::IdentityOwner;
    o.require(accepted_by(identity::SchemaRecord{"s", "1", {"a"}, {}, 0}, member[sub]) == publisher,
              fmt::format("{} schema", to_string(sub)));
    const auto ref = ledger.submit(identity::SchemaRecord{"ref", "1", {"a"}, {}, 0}, tdid);
    o.require(accepted_by(identity::CredDefRecord{ref, {}, tvk, 0}, member[sub]) == publisher,
              fmt::format("{} cred def", to_string(sub)));
    cells += 2;
  }
  if (o.pass)
    o.detail = fmt::format("{} round trips accepted, {} mutations rejected, {} permission cells hold",
                           accepted, rejected, cells);
  return o;
}

// ---- 8 ----------------------------------------------------------------------

std::string transcript_problem(const tolling::SessionTranscript& t) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(t.to_json_line());
  } catch (const std::exception& e) {
    return std::string("json: ") + e.what();
  }
  for (const char* k : {"session_id", "direction", "channel", "status", "phases", "steps", "payment",
                        "settled_at", "enforcement", "events", "messages", "message_count"})
    if (!j.contains(k)) return std::string("missing key ") + k;
  if (t.phases.empty() || t.phases.back().name != "settlement") return "no settlement phase";
  double last = 0.0;
  for (const auto& p : t.phases) {
    if (p.end < p.start || p.start < last - 1e-9) return "phase order at " + p.name;
    last = p.end;
  }
  const bool settled = t.status == tolling::Status::Settled;
  if (settled != t.settled_at.has_value()) return "settled_at inconsistent";
  if (settled == t.enforcement.has_value()) return "enforcement record inconsistent";
  if (t.phases.back().outcome != (settled ? "settled" : "enforcement")) return "settlement outcome";
  if (t.enforcement && (t.enforcement->reason.empty() || t.enforcement->session_ref.empty()))
    return "enforcement record incomplete";
  std::size_t count = 0;
  for (const auto& [k, n] : t.messages) count += n;
  if (count != t.message_count) return "message count";
  return {};
}

Outcome fault_matrix() {
  Outcome o;
  struct Case {
    std::string name;
    tolling::ProvisionOptions opts;
    tolling::Faults faults;
    std::optional<tolling::Status> expect;  // nullopt: either terminal state
  };
  std::vector<Case> cases;
  {
    Case c{"no credential", {}, {}, tolling::Status::Enforcement};
    c.opts.user_has_credential = false;
    cases.push_back(c);
  }
  {
    Case c{"bad nonce", {}, {}, tolling::Status::Enforcement};
    c.faults.wrong_payment_nonce = true;
    cases.push_back(c);
  }
  {
    Case c{"insufficient balance", {}, {}, tolling::Status::Enforcement};
    c.opts.user_balance = 3;
    cases.push_back(c);
  }
  {
    Case c{"unresponsive peer", {}, {}, std::nullopt};
    c.opts.known_relationship = true;
    c.faults.unresponsive_peer = true;
    cases.push_back(c);
  }
  {
    Case c{"tampered channel", {}, {}, std::nullopt};
    c.faults.tamper_channel_message = 0;
    cases.push_back(c);
  }
  {
    Case c{"wrong amount", {}, {}, tolling::Status::Enforcement};
    c.faults.wrong_payment_amount = true;
    cases.push_back(c);
  }
  {
    Case c{"wrong address", {}, {}, tolling::Status::Enforcement};
    c.faults.wrong_payment_address = true;
    cases.push_back(c);
  }

  const tolling::SessionConfig cfg;
  std::string detail;
  for (auto& c : cases) {
    std::map<std::string, int> ends;
    for (std::uint64_t seed = 1; seed <= 200; ++seed) {
      if (c.faults.tamper_channel_message) c.faults.tamper_channel_message = static_cast<unsigned>(seed % 4);
      auto world = tolling::provision(c.opts, seed);
      const auto t = tolling::run_toll_session(world, cfg, seed * 7919, c.faults);
      ++ends[std::string(to_string(t.status))];
      const auto problem = transcript_problem(t);
      o.require(problem.empty(), fmt::format("{} seed {}: {}", c.name, seed, problem));
      if (c.expect)
        o.require(t.status == *c.expect, fmt::format("{} seed {} ended {}", c.name, seed, to_string(t.status)));
    }
    detail += fmt::format("{}{}: {} Settled / {} Enforcement", detail.empty() ? "" : ", ", c.name,
                          ends["Settled"], ends["Enforcement"]);
  }
  if (o.pass) o.detail = detail;
  return o;
}

// ---- 9 ----------------------------------------------------------------------

std::map<std::string, std::string> read_dir(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::ifstream in(e.path(), std::ios::binary);
    out[e.path().filename().string()] = std::string(std::istreambuf_iterator<char>(in), {});
  }
  return out;
}

Outcome reproducible_outputs() {
  Outcome o;
  harness::ScenarioConfig cfg;
  cfg.trials = 100;
  cfg.seed = 77;
  const auto base = fs::temp_directory_path() / fmt::format("paygo_acceptance_{}", ::getpid());
  std::vector<std::map<std::string, std::string>> files;
  for (int i = 0; i < 2; ++i) {
    const auto dir = base / std::to_string(i);
    fs::remove_all(dir);
    auto run = harness::run_trials(cfg);
    write_outputs(dir, cfg, run, harness::feasibility_report(run.samples, harness::window(600, 130)));
    files.push_back(read_dir(dir));
  }
  fs::remove_all(base);
  o.require(files[0].size() == files[1].size() && files[0].size() >= 14, "file sets differ");
  std::size_t bytes = 0;
  for (const auto& [name, content] : files[0]) {
    auto it = files[1].find(name);
    o.require(it != files[1].end() && it->second == content, name + " differs");
    bytes += content.size();
  }
  if (o.pass) o.detail = fmt::format("{} files, {} bytes identical across two runs", files[0].size(), bytes);
  return o;
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](int n, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << ": " << o.detail << std::endl;
    failed += o.pass ? 0 : 1;
  };

  report(1, window_length);
  std::optional<Batch> batch;
  try {
    batch = calibrated_batch();
  } catch (const std::exception& e) {
    std::cout << "calibrated batch failed: " << e.what() << std::endl;
  }
  auto with_batch = [&](auto fn) {
    return [&, fn]() -> Outcome {
      if (!batch) return {false, "no calibrated batch"};
      return fn(*batch);
    };
  };
  report(2, with_batch([](const Batch& b) {
           return check_means(b, {{"credential_total", 1.0903}, {"handshake", 0.1194},
                                  {"gantry_proof", 0.4670}, {"user_proof", 0.4659}});
         }));
  report(3, with_batch([](const Batch& b) {
           return check_means(b, {{"tip_selection", 0.43}, {"pow", 1.02}, {"broadcast", 0.06},
                                  {"payment_total", 1.51}});
         }));
  report(4, with_batch(total_and_window));
  report(5, live_pow);
  report(6, tangle_invariants);
  report(7, credentials_and_permissions);
  report(8, fault_matrix);
  report(9, reproducible_outputs);
  return failed == 0 ? 0 : 1;
}
