#include <gtest/gtest.h>

#include "cpsnet/adversary.hpp"
#include "cpsnet/harness.hpp"

using namespace cpsnet;
using namespace cpsnet::adv;
using json = nlohmann::json;

namespace {

const std::string kFixtures = CPSNET_FIXTURE_DIR;

ScenarioConfig fixture(const std::string& name) { return load_config(kFixtures + "/" + name + ".yaml"); }

std::vector<json> of_type(const std::vector<json>& records, const std::string& type) {
  std::vector<json> out;
  for (const auto& r : records) {
    if (r.at("type") == type) out.push_back(r);
  }
  return out;
}

net::Packet sensor_packet(const FlowKey& f, std::uint16_t txn, std::uint16_t reg) {
  scada::ScadaFrame frame;
  frame.transaction_id = txn;
  frame.function = scada::Function::ReadHoldingRegistersResponse;
  frame.register_values = {reg};
  net::Packet p;
  p.src = f.src;
  p.dst = f.dst;
  p.proto = f.proto;
  p.payload = scada::encode_frame(frame);
  return p;
}

scada::ScadaFrame decode(const net::Packet& p) { return std::get<scada::ScadaFrame>(scada::decode_frame(p.payload)); }

// Mean windowed statistic over steps [from, to).
double mean_g(const std::vector<json>& records, std::uint64_t from, std::uint64_t to) {
  double s = 0;
  int n = 0;
  for (const auto& r : of_type(records, "step")) {
    const auto k = r.at("k").get<std::uint64_t>();
    if (k >= from && k < to && !r.at("g").is_null()) {
      s += r.at("g").get<double>();
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

}  // namespace

TEST(Replay, SubstitutesRecordingCyclically) {
  const FlowKey f{NodeId{0}, NodeId{1}, net::Proto::Scada};
  ReplayInterceptor r(f, 0, 50 * 10, 1000 * 10, false);
  for (std::uint16_t k = 0; k < 50; ++k) {
    auto p = sensor_packet(f, k, static_cast<std::uint16_t>(1000 + k));
    EXPECT_EQ(r.on_packet(p, NodeId{5}, k * 10u), net::InterceptResult::Pass);
    EXPECT_EQ(decode(p).register_values[0], 1000 + k);
  }
  EXPECT_EQ(r.recording_size(), 50u);
  for (std::uint16_t k = 50; k < 170; ++k) {
    auto p = sensor_packet(f, k, 7);
    r.on_packet(p, NodeId{5}, k * 10u);
    const auto frame = decode(p);
    EXPECT_EQ(frame.register_values[0], 1000 + (k - 50) % 50);
    EXPECT_EQ(frame.transaction_id, k);
  }
  EXPECT_EQ(r.log().modified, 120u);
}

TEST(Replay, PreservedIdsRepeat) {
  const FlowKey f{NodeId{0}, NodeId{1}, net::Proto::Scada};
  ReplayInterceptor r(f, 0, 100, 1000, true);
  auto a = sensor_packet(f, 3, 1);
  r.on_packet(a, NodeId{5}, 10);
  auto b = sensor_packet(f, 40, 2);
  r.on_packet(b, NodeId{5}, 200);
  EXPECT_EQ(decode(b).transaction_id, 3);
}

TEST(Replay, OtherFlowsUntouched) {
  const FlowKey f{NodeId{0}, NodeId{1}, net::Proto::Scada};
  ReplayInterceptor r(f, 0, 100, 1000, false);
  auto a = sensor_packet(f, 3, 1);
  r.on_packet(a, NodeId{5}, 10);
  auto other = sensor_packet({NodeId{2}, NodeId{1}, net::Proto::Scada}, 9, 9);
  const auto before = other.payload;
  r.on_packet(other, NodeId{5}, 200);
  EXPECT_EQ(other.payload, before);
}

TEST(Replay, EmptyRecordingDrops) {
  const FlowKey f{NodeId{0}, NodeId{1}, net::Proto::Scada};
  ReplayInterceptor r(f, 100, 100, 1000, false);
  auto p = sensor_packet(f, 1, 1);
  EXPECT_EQ(r.on_packet(p, NodeId{5}, 150), net::InterceptResult::Drop);
}

TEST(Fdi, BiasAndClamp) {
  const FlowKey f{NodeId{0}, NodeId{1}, net::Proto::Scada};
  const scada::RegisterCodec codec;
  FdiInterceptor fdi(f, 0, 100, {0.5}, codec);
  auto p = sensor_packet(f, 1, 0x8000);
  fdi.on_packet(p, NodeId{5}, 10);
  EXPECT_EQ(decode(p).register_values[0], 0x8000 + 500);
  FdiInterceptor big(f, 0, 100, {100.0}, codec);
  auto q = sensor_packet(f, 1, 0x8000);
  big.on_packet(q, NodeId{5}, 10);
  EXPECT_EQ(decode(q).register_values[0], 0xFFFF);
  EXPECT_EQ(big.log().clamped, 1u);
  auto late = sensor_packet(f, 1, 0x8000);
  fdi.on_packet(late, NodeId{5}, 200);
  EXPECT_EQ(decode(late).register_values[0], 0x8000);
}

TEST(IdentityAttacks, TrafficUnchanged) {
  auto base = fixture("clean");
  const auto baseline = run_scenario(base);
  std::vector<AttackSpec> identities;
  AttackSpec fdi;
  fdi.kind = AttackKind::Fdi;
  fdi.locus = "s2";
  fdi.start = 2 * kMicrosPerSecond;
  fdi.stop = 8 * kMicrosPerSecond;
  fdi.bias = {0.0};
  identities.push_back(fdi);
  AttackSpec mitm = fdi;
  mitm.kind = AttackKind::Mitm;
  mitm.locus = "s3";
  mitm.scale = 1.0;
  identities.push_back(mitm);
  AttackSpec dos = fdi;
  dos.kind = AttackKind::Dos;
  dos.locus = "atk";
  dos.target = "ctrl";
  dos.rate_pps = 0.0;
  identities.push_back(dos);
  for (const auto& spec : identities) {
    auto cfg = base;
    cfg.attacks = {spec};
    EXPECT_TRUE(spec.is_identity());
    const auto run = run_scenario(cfg);
    EXPECT_EQ(to_jsonl(of_type(run.records, "step")), to_jsonl(of_type(baseline.records, "step"))) << to_string(spec.kind);
    EXPECT_EQ(of_type(run.records, "counters"), of_type(baseline.records, "counters")) << to_string(spec.kind);
  }
}

TEST(Fdi, LargeBiasTriggersEnvelopeEvidence) {
  auto cfg = fixture("fdi");
  cfg.attacks.front().bias = {10.0};
  const auto run = run_scenario(cfg);
  const auto verdicts = of_type(run.records, "verdict");
  ASSERT_FALSE(verdicts.empty());
  EXPECT_GT(verdicts.front().at("suspicion").get<std::uint64_t>(), 0u);
  EXPECT_EQ(verdicts.front().at("verdict"), "attack");
  EXPECT_TRUE(run.summary.at("audit_ok").get<bool>());
}

TEST(Fdi, ModerateBiasRaisesStatistic) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto cfg = fixture("fdi");
    cfg.seed = seed;
    auto clean = cfg;
    clean.attacks.clear();
    const auto a = run_scenario(cfg);
    const auto b = run_scenario(clean);
    EXPECT_GT(mean_g(a.records, 500, 560), mean_g(b.records, 500, 560) + 1.0) << seed;
  }
}

TEST(Mitm, NulledActuationAlarmsQuickly) {
  int hit = 0;
  const int runs = 20;
  for (int seed = 1; seed <= runs; ++seed) {
    auto cfg = fixture("default");
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.duration = 4 * kMicrosPerSecond;
    AttackSpec m;
    m.kind = AttackKind::Mitm;
    m.locus = "s3";
    m.start = 2 * kMicrosPerSecond;
    m.stop = 4 * kMicrosPerSecond;
    m.scale = 0.0;
    cfg.attacks = {m};
    const auto run = run_scenario(cfg);
    for (const auto& r : of_type(run.records, "step")) {
      const auto k = r.at("k").get<std::uint64_t>();
      if (k >= 200 && k <= 250 && r.at("alarm").get<bool>()) {
        ++hit;
        break;
      }
    }
  }
  EXPECT_GE(hit, 19);
}

TEST(Mitm, ConfinedWindowRecovers) {
  auto cfg = fixture("mitm");
  cfg.attacks.front().stop = 6 * kMicrosPerSecond;
  const auto run = run_scenario(cfg);
  const double tau = run.summary.at("tau").get<double>();
  const int window = cfg.controller.window;
  for (const auto& r : of_type(run.records, "step")) {
    const auto k = r.at("k").get<std::uint64_t>();
    if (k > 600 + 2 * static_cast<std::uint64_t>(window) && !r.at("g").is_null()) {
      EXPECT_LT(r.at("g").get<double>(), tau) << k;
    }
  }
}

TEST(Dos, ZeroRateSendsNothing) {
  Simulator sim;
  net::Topology t;
  auto h = t.add_host("h");
  auto s = t.add_switch("s");
  t.add_link(h, s, 1, 1000000);
  net::Network net(sim, t, 1);
  FloodSource f(net, sim, h, h, 0, kMicrosPerSecond, 0.0, 100);
  f.arm();
  sim.run_until(2 * kMicrosPerSecond);
  EXPECT_EQ(net.counters().injected, 0u);
  EXPECT_EQ(f.log().injected, 0u);
}

TEST(Dos, RateAndWindow) {
  Simulator sim;
  net::Topology t;
  auto h = t.add_host("h");
  auto s = t.add_switch("s");
  t.add_link(h, s, 1, 1000000000);
  net::Network net(sim, t, 1);
  FloodSource f(net, sim, h, h, 100000, 1100000, 100.0, 10);
  f.arm();
  sim.run_until(2 * kMicrosPerSecond);
  EXPECT_EQ(f.log().injected, 101u);
}
