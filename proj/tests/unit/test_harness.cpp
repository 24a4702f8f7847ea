#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cpsnet/harness.hpp"

using namespace cpsnet;
using json = nlohmann::json;

namespace {

const std::string kFixtures = CPSNET_FIXTURE_DIR;

ScenarioConfig fixture(const std::string& name) { return load_config(kFixtures + "/" + name + ".yaml"); }

std::size_t count_type(const std::vector<json>& records, const std::string& type) {
  std::size_t n = 0;
  for (const auto& r : records) n += r.at("type") == type;
  return n;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST(Harness, SameSeedSameBytes) {
  auto cfg = fixture("replay");
  const auto dir = std::filesystem::temp_directory_path() / "cpsnet-harness-det";
  std::filesystem::remove_all(dir);
  RunOptions a{(dir / "a").string(), true}, b{(dir / "b").string(), true};
  run_scenario(cfg, a);
  run_scenario(cfg, b);
  for (const char* f : {"steps.jsonl", "summary.json", "trace.log"}) {
    const auto x = slurp(dir / "a" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(dir / "b" / f)) << f;
  }
  std::filesystem::remove_all(dir);
}

TEST(Harness, SeedChangesNoise) {
  auto cfg = fixture("clean");
  const auto a = run_scenario(cfg);
  cfg.seed += 1;
  const auto b = run_scenario(cfg);
  EXPECT_NE(a.summary.at("control_cost"), b.summary.at("control_cost"));
}

TEST(Harness, DefaultFixtureCalibration) {
  const auto run = run_scenario(fixture("default"));
  const double far = run.summary.at("false_alarm_rate").get<double>();
  EXPECT_NEAR(far, 0.05, 0.02);
  EXPECT_EQ(run.summary.at("scored_steps").get<std::uint64_t>(), 9990u);
  EXPECT_EQ(count_type(run.records, "transition"), 0u);
  EXPECT_EQ(run.exit_code, ExitCode::Ok);
}

TEST(Harness, ReplayIsDetectedAndMitigated) {
  const auto run = run_scenario(fixture("replay"));
  EXPECT_FALSE(run.summary.at("detection_latency_steps").is_null());
  EXPECT_FALSE(run.summary.at("time_to_mitigate_us").is_null());
  EXPECT_LE(run.summary.at("time_to_mitigate_us").get<SimTime>(), 10 * kMicrosPerMilli);
  EXPECT_EQ(run.summary.at("verdict_confusion").at("predicted"), "attack");
  EXPECT_TRUE(run.summary.at("audit_ok").get<bool>());
}

TEST(Harness, PreservedIdsEndInSinkhole) {
  auto cfg = fixture("replay");
  cfg.attacks.front().preserve_transaction_ids = true;
  const auto run = run_scenario(cfg);
  bool attack = false, malicious = false;
  for (const auto& r : run.records) {
    if (r.at("type") == "verdict" && r.at("verdict") == "attack") attack = true;
    if (r.at("type") == "transition" && r.at("flow") == "plant->ctrl/scada" && r.at("to") == "malicious") malicious = true;
  }
  EXPECT_TRUE(attack);
  EXPECT_TRUE(malicious);
  EXPECT_GT(run.summary.at("packets_sinkholed").get<std::uint64_t>(), 0u);
  EXPECT_TRUE(run.summary.at("audits").at("mitigation_completeness").get<bool>());
}

TEST(Harness, FaultIsRecognised) {
  const auto run = run_scenario(fixture("fault"));
  EXPECT_EQ(run.summary.at("first_verdict"), "fault");
  EXPECT_EQ(count_type(run.records, "transition"), 0u);
  bool rerouted = false;
  for (const auto& r : run.records) {
    if (r.at("type") == "ack_sent" && r.at("action") == "rerouted-fault") rerouted = true;
  }
  EXPECT_TRUE(rerouted);
}

TEST(Harness, AckPairingOnEveryFixture) {
  for (const char* name : {"replay", "mitm", "fault", "dos"}) {
    const auto run = run_scenario(fixture(name));
    std::size_t transitions = 0, transition_acks = 0;
    std::uint64_t last_seq = 0;
    for (const auto& r : run.records) {
      if (r.at("type") == "transition") ++transitions;
      if (r.at("type") == "ack_sent" && r.at("transition").get<bool>()) ++transition_acks;
      if (r.at("type") == "ack") {
        const auto seq = r.at("seq").get<std::uint64_t>();
        EXPECT_GT(seq, last_seq) << name;
        last_seq = seq;
      }
    }
    EXPECT_EQ(transitions, transition_acks) << name;
    EXPECT_TRUE(run.summary.at("audit_ok").get<bool>()) << name;
  }
}

TEST(Harness, SummaryRecomputesFromRecords) {
  const auto run = run_scenario(fixture("dos"));
  EXPECT_EQ(summarize(parse_jsonl(to_jsonl(run.records))), run.summary);
}

TEST(Harness, DivergenceExitCode) {
  // Cutting both routes between plant and controller leaves an unstable plant in open loop.
  auto cfg = fixture("clean");
  cfg.plant.model.A(0, 0) = 1.2;
  cfg.plant.divergence_bound = 50.0;
  cfg.faults = {FaultSpec{"s2", "s3", kMicrosPerSecond, std::nullopt}, FaultSpec{"s5", "s6", kMicrosPerSecond, std::nullopt}};
  const auto run = run_scenario(cfg);
  EXPECT_EQ(run.exit_code, ExitCode::Divergence);
  EXPECT_TRUE(run.summary.at("diverged").get<bool>());
}

TEST(Compare, Reflexive) {
  const auto run = run_scenario(fixture("replay"));
  const auto report = compare_runs(run.summary, run.summary);
  for (const auto& [k, v] : report.at("metrics").items()) {
    if (v.contains("delta")) {
      EXPECT_EQ(v.at("delta").get<double>(), 0.0) << k;
      EXPECT_EQ(v.at("sign"), "0") << k;
    } else {
      EXPECT_FALSE(v.at("changed").get<bool>()) << k;
    }
  }
}

TEST(Compare, FloodRaisesDelay) {
  auto cfg = fixture("dos");
  auto base = cfg;
  base.attacks.clear();
  const auto report = compare_runs(run_scenario(base).summary, run_scenario(cfg).summary);
  EXPECT_GT(report.at("metrics").at("mean_sensor_delay_us").at("delta").get<double>(), 0.0);
}

TEST(Compare, RejectsMismatchedRuns) {
  const auto a = run_scenario(fixture("clean")).summary;
  auto b = a;
  b["topology_digest"] = "other";
  EXPECT_THROW(compare_runs(a, b), CompareError);
  b = a;
  b.erase("alerts");
  EXPECT_THROW(compare_runs(a, b), CompareError);
}

TEST(Batch, OrderedBySeedAndThreadIndependent) {
  auto cfg = fixture("clean");
  cfg.duration = 2 * kMicrosPerSecond;
  const auto one = run_batch(cfg, 4, 1);
  const auto four = run_batch(cfg, 4, 4);
  EXPECT_EQ(one.aggregate, four.aggregate);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(one.runs[i].summary.at("seed").get<std::uint64_t>(), cfg.seed + i);
    EXPECT_EQ(one.runs[i].summary, four.runs[i].summary);
  }
}

TEST(Wilson, KnownInterval) {
  const auto w = wilson_interval(9, 10);
  EXPECT_DOUBLE_EQ(w.estimate, 0.9);
  EXPECT_NEAR(w.low, 0.5958, 1e-4);
  EXPECT_NEAR(w.high, 0.9821, 1e-4);
  const auto z = wilson_interval(0, 0);
  EXPECT_EQ(z.low, 0.0);
  EXPECT_EQ(z.high, 1.0);
}

TEST(Harness, DoubleIntegratorStaysNominal) {
  double far_sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto cfg = fixture("double_integrator");
    cfg.seed = seed;
    const auto run = run_scenario(cfg);
    EXPECT_EQ(run.exit_code, ExitCode::Ok) << seed;
    EXPECT_EQ(run.summary.at("alerts").get<std::uint64_t>(), 0u) << seed;
    far_sum += run.summary.at("false_alarm_rate").get<double>();
  }
  EXPECT_NEAR(far_sum / 10, 0.05, 0.02);
}
