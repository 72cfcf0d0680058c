#include <set>

#include <gtest/gtest.h>
#include <json.hpp>

#include "paygo/error.hpp"
#include "paygo/tolling.hpp"

using namespace paygo;
using namespace paygo::tolling;

namespace {

template <typename Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

bool has_event(const SessionTranscript& t, std::string_view needle) {
  for (const auto& e : t.events)
    if (e.find(needle) != std::string::npos) return true;
  return false;
}

void expect_monotone(const SessionTranscript& t) {
  double last = 0.0;
  for (const auto& p : t.phases) {
    EXPECT_GE(p.start, last - 1e-12) << p.name;
    EXPECT_GE(p.end, p.start) << p.name;
    last = p.end;
  }
}

SessionTranscript session(const ProvisionOptions& opts, const Faults& faults = {},
                          std::uint64_t seed = 1, SessionConfig cfg = {}) {
  auto world = provision(opts, seed);
  return run_toll_session(world, cfg, seed + 1000, faults);
}

}  // namespace

TEST(RateTable, Lookup) {
  RateTable t({{"light", 5}, {"heavy", 12}});
  EXPECT_EQ(t.at("heavy"), 12);
  EXPECT_EQ(code_of([&] { t.at("tractor"); }), Errc::UnknownVehicleClass);
  EXPECT_EQ(code_of([] { RateTable({{"light", 0}}); }), Errc::InvalidConfig);
}

TEST(Messages, EncodingRoundTrips) {
  Announcement a{"A1-km-212", {40.6405, -8.6538}, 1.0};
  auto back = Announcement::decode(a.encode());
  EXPECT_EQ(back.gantry_label, a.gantry_label);
  EXPECT_EQ(back.location, a.location);

  Rng rng(1);
  auto req = request_payment("light", RateTable({{"light", 5}}), tangle::Address("addr"), rng);
  EXPECT_EQ(req.amount, 5);
  EXPECT_EQ(PaymentRequest::decode(req.encode()), req);
  EXPECT_THROW(PaymentRequest::decode(Bytes{1}), Error);
}

TEST(Localization, FormatParse) {
  pairwise::GeoPoint p{40.6405, -8.6538};
  EXPECT_EQ(format_localization(p), "40.640500,-8.653800");
  EXPECT_EQ(parse_localization("40.640500,-8.653800"), p);
  EXPECT_EQ(code_of([] { parse_localization("somewhere"); }), Errc::LocationMismatch);
}

TEST(Session, HonestPathSettles) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    auto t = session({}, {}, seed);
    ASSERT_EQ(t.status, Status::Settled) << seed;
    EXPECT_EQ(t.channel, "new");
    EXPECT_EQ(t.message_count, 9u);
    EXPECT_EQ(t.messages.at("bundle_broadcast"), 1u);
    EXPECT_EQ(t.user_attributes.at("vehicle_plate"), "AA-00-BB");
    EXPECT_EQ(t.gantry_attributes.at("identifier"), "GNT-0212");
    EXPECT_FALSE(t.enforcement);
    EXPECT_TRUE(t.events.empty());
    expect_monotone(t);

    std::vector<std::string> names;
    for (const auto& p : t.phases) names.push_back(p.name);
    EXPECT_EQ(names, (std::vector<std::string>{"trigger", "channel", "gantry_proof", "user_proof",
                                               "payment_request", "payment_attach", "settlement"}));
    for (const char* s : {"tip_selection", "pow", "broadcast"}) EXPECT_TRUE(t.phase(s)) << s;
  }
}

TEST(Session, PaymentMovesBalance) {
  auto world = provision({}, 3);
  run_toll_session(world, {}, 4);
  EXPECT_EQ(world.user_node.balance(world.user_address), 995);
  EXPECT_EQ(world.operator_node.balance(world.pay_to), world.user_node.balance(world.pay_to));
}

TEST(Session, NoCredentialDeclinesAndEnforces) {
  ProvisionOptions o;
  o.user_has_credential = false;
  auto t = session(o);
  EXPECT_EQ(t.status, Status::Enforcement);
  ASSERT_TRUE(t.enforcement);
  EXPECT_EQ(t.enforcement->plate, "");
  EXPECT_FALSE(t.enforcement->payment_nonce);
  EXPECT_NEAR(t.enforcement->deadline_missed_at, 60.0, 1e-9);
  EXPECT_EQ(t.phase("user_proof")->outcome, "declined");
  EXPECT_EQ(t.messages.count("proof_decline"), 1u);
}

TEST(Session, PaymentTripleFaultsEnforceWithPlate) {
  for (int which = 0; which < 3; ++which) {
    Faults f;
    f.wrong_payment_nonce = which == 0;
    f.wrong_payment_amount = which == 1;
    f.wrong_payment_address = which == 2;
    auto t = session({}, f, 5 + which);
    EXPECT_EQ(t.status, Status::Enforcement) << which;
    ASSERT_TRUE(t.enforcement);
    EXPECT_EQ(t.enforcement->plate, "AA-00-BB");
    ASSERT_TRUE(t.payment);
    EXPECT_EQ(t.enforcement->payment_nonce, t.payment->payment_nonce);
    EXPECT_NEAR(t.enforcement->deadline_missed_at, t.phase("payment_request")->start + 60.0, 1e-9);
    EXPECT_EQ(t.enforcement->session_ref, "A1-km-212/0");
  }
}

TEST(Session, InsufficientBalanceEnforces) {
  ProvisionOptions o;
  o.user_balance = 2;
  auto t = session(o);
  EXPECT_EQ(t.status, Status::Enforcement);
  EXPECT_TRUE(has_event(t, "InsufficientBalance"));
  EXPECT_EQ(t.messages.count("bundle_broadcast"), 0u);
}

TEST(Session, UnknownVehicleClassNeverRequestsPayment) {
  SessionConfig cfg;
  cfg.vehicle_class = "tractor";
  auto t = session({}, {}, 1, cfg);
  EXPECT_EQ(t.status, Status::Enforcement);
  EXPECT_FALSE(t.payment);
  EXPECT_TRUE(has_event(t, "UnknownVehicleClass"));
}

TEST(Session, SelfIssuedGantryCredentialAborts) {
  ProvisionOptions o;
  o.gantry_self_issued = true;
  auto t = session(o);
  EXPECT_EQ(t.status, Status::Enforcement);
  EXPECT_EQ(t.phase("gantry_proof")->outcome, "UntrustedIssuer");
  EXPECT_TRUE(t.user_attributes.empty());
}

TEST(Session, DisplacedGantryAborts) {
  ProvisionOptions o;
  o.gantry_location_offset_m = 500;
  auto t = session(o);
  EXPECT_EQ(t.status, Status::Enforcement);
  EXPECT_EQ(t.phase("gantry_proof")->outcome, "LocationMismatch");

  o.gantry_location_offset_m = 50;  // inside epsilon
  EXPECT_EQ(session(o).status, Status::Settled);
}

TEST(Session, KnownRelationshipIsReusedWithoutNewDids) {
  ProvisionOptions o;
  o.known_relationship = true;
  auto world = provision(o, 9);
  const auto user_dids = world.user.did_count(), gantry_dids = world.gantry.did_count();
  auto t = run_toll_session(world, {}, 10);
  EXPECT_EQ(t.status, Status::Settled);
  EXPECT_EQ(t.channel, "reused");
  EXPECT_EQ(t.messages.count("conn_request"), 0u);
  EXPECT_EQ(t.messages.at("echo"), 2u);
  EXPECT_EQ(world.user.did_count(), user_dids);
  EXPECT_EQ(world.gantry.did_count(), gantry_dids);
}

TEST(Session, SecondPassReusesFirstPassRelationship) {
  auto world = provision({}, 11);
  EXPECT_EQ(run_toll_session(world, {}, 1).channel, "new");
  const auto dids = world.user.did_count();
  auto t = run_toll_session(world, {}, 2);
  EXPECT_EQ(t.channel, "reused");
  EXPECT_EQ(t.status, Status::Settled);
  EXPECT_EQ(t.session_id, 1u);
  EXPECT_EQ(world.user.did_count(), dids);
}

TEST(Session, UnresponsivePeerFallsBackToHandshake) {
  ProvisionOptions o;
  o.known_relationship = true;
  Faults f;
  f.unresponsive_peer = true;
  auto t = session(o, f);
  EXPECT_EQ(t.status, Status::Settled);
  EXPECT_EQ(t.channel, "new");
  EXPECT_TRUE(has_event(t, "falling back"));
  EXPECT_EQ(t.messages.at("conn_request"), 1u);
}

TEST(Session, TamperedChannelMessageNeverSettlesSilently) {
  for (unsigned n = 0; n < 4; ++n) {
    Faults f;
    f.tamper_channel_message = n;
    auto t = session({}, f, 20 + n);
    EXPECT_EQ(t.status, Status::Enforcement) << n;
    EXPECT_TRUE(has_event(t, "tampered")) << n;
    ASSERT_TRUE(t.enforcement);
  }
}

TEST(Session, PaymentNoncesAreDistinct) {
  auto world = provision({}, 12);
  std::set<crypto::Nonce> nonces;
  for (int i = 0; i < 1000; ++i) {
    Rng rng(static_cast<std::uint64_t>(i));
    nonces.insert(request_payment("light", RateTable({{"light", 5}}), world.pay_to, rng).payment_nonce);
  }
  EXPECT_EQ(nonces.size(), 1000u);
}

TEST(Settlement, RequiresFullTriple) {
  auto world = provision({}, 13);
  Rng rng(1);
  auto req = request_payment("light", RateTable({{"light", 5}}), world.pay_to, rng);
  execute_payment(world.user, world.user_payment_did, world.operator_node, req, 4, rng);
  EXPECT_TRUE(payment_settled(world.operator_node, req));
  auto r = req;
  r.amount = 6;
  EXPECT_FALSE(payment_settled(world.operator_node, r));
  r = req;
  r.payment_nonce.bytes[3] ^= 1;
  EXPECT_FALSE(payment_settled(world.operator_node, r));
  r = req;
  r.pay_to = world.user_address;
  EXPECT_FALSE(payment_settled(world.operator_node, r));
}

TEST(Settlement, InsufficientBalanceThrows) {
  ProvisionOptions o;
  o.user_balance = 4;
  auto world = provision(o, 14);
  Rng rng(1);
  auto req = request_payment("light", RateTable({{"light", 5}}), world.pay_to, rng);
  EXPECT_EQ(code_of([&] { build_payment(world.user, world.user_payment_did, world.user_node, req); }),
            Errc::InsufficientBalance);
}

TEST(Transcript, JsonIsWellFormed) {
  ProvisionOptions o;
  o.user_has_credential = false;
  for (const auto& t : {session({}), session(o)}) {
    auto j = nlohmann::json::parse(t.to_json_line());
    EXPECT_EQ(j["status"], std::string(to_string(t.status)));
    EXPECT_EQ(j["phases"].size(), t.phases.size());
    EXPECT_EQ(j["message_count"], t.message_count);
    EXPECT_EQ(j["enforcement"].is_null(), !t.enforcement);
    EXPECT_EQ(t.to_json_line().find('\n'), std::string::npos);
  }
}

TEST(Transcript, SameSeedSameTranscript) {
  EXPECT_EQ(session({}, {}, 42).to_json_line(), session({}, {}, 42).to_json_line());
  EXPECT_NE(session({}, {}, 42).to_json_line(), session({}, {}, 43).to_json_line());
}
