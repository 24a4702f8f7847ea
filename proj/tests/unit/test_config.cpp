#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <sstream>

#include "cpsnet/harness.hpp"

using namespace cpsnet;
using Kind = ScenarioConfigError::Kind;

namespace {

const std::string kFixtures = CPSNET_FIXTURE_DIR;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string default_text() { return slurp(kFixtures + "/default.yaml"); }

// Load a mutated copy of the default fixture and return the error it raises.
ScenarioConfigError load_error(const std::string& text) {
  try {
    load_config_string(text, "mutated.yaml");
  } catch (const ScenarioConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "config loaded without error";
  return ScenarioConfigError(Kind::Io, "");
}

std::string replace_once(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  if (at != std::string::npos) text.replace(at, from.size(), to);
  return text;
}

}  // namespace

TEST(Config, AllFixturesLoad) {
  for (const char* name : {"default", "clean", "replay", "replay_nowm", "mitm", "fdi", "fault", "dos", "double_integrator"}) {
    EXPECT_NO_THROW(load_config(kFixtures + "/" + std::string(name) + ".yaml")) << name;
  }
}

TEST(Config, DefaultFixtureValues) {
  const auto cfg = load_config(kFixtures + "/default.yaml");
  EXPECT_EQ(cfg.steps(), 10000u);
  EXPECT_NEAR(cfg.resolved_tau(), 18.307, 1e-3);
  EXPECT_EQ(cfg.build_topology().switches().size(), 6u);
  EXPECT_TRUE(cfg.attacks.empty());
}

TEST(Config, NegativeBandwidthNamesKey) {
  const auto e = load_error(replace_once(default_text(), "{a: s1, b: s2, latency_us: 1000, bandwidth_bps: 1000000}",
                                         "{a: s1, b: s2, latency_us: 1000, bandwidth_bps: -5}"));
  EXPECT_EQ(e.kind(), Kind::Schema);
  EXPECT_NE(std::string(e.what()).find("topology.links[0].bandwidth_bps"), std::string::npos) << e.what();
  EXPECT_NE(std::string(e.what()).find("line"), std::string::npos) << e.what();
}

TEST(Config, TypoKeyRejected) {
  const auto e = load_error(replace_once(default_text(), "bandwidth_bps: 1000000}", "bandwith: 1000000}"));
  EXPECT_EQ(e.kind(), Kind::Schema);
  EXPECT_NE(std::string(e.what()).find("bandwith"), std::string::npos) << e.what();
}

TEST(Config, DisconnectedTopology) {
  auto text = replace_once(default_text(), "    - {a: s3, b: s6, latency_us: 1000, bandwidth_bps: 1000000}\n", "");
  text = replace_once(text, "    - {a: s5, b: s6, latency_us: 1200, bandwidth_bps: 1000000}\n", "");
  const auto e = load_error(text);
  EXPECT_EQ(e.kind(), Kind::Topology);
  EXPECT_NE(std::string(e.what()).find("disconnected"), std::string::npos) << e.what();
}

TEST(Config, UnstabilizablePair) {
  auto text = replace_once(default_text(), "  A: [[0.9]]\n  B: [[1.0]]", "  A: [[1.5]]\n  B: [[0.0]]");
  const auto e = load_error(text);
  EXPECT_EQ(e.kind(), Kind::Model);
  EXPECT_NE(std::string(e.what()).find("unstabilizable"), std::string::npos) << e.what();
}

TEST(Config, DimensionMismatch) {
  const auto e = load_error(replace_once(default_text(), "  C: [[1.0]]", "  C: [[1.0, 2.0]]"));
  EXPECT_EQ(e.kind(), Kind::Model);
}

TEST(Config, MissingFile) {
  try {
    load_config(kFixtures + "/does-not-exist.yaml");
    FAIL();
  } catch (const ScenarioConfigError& e) {
    EXPECT_EQ(e.kind(), Kind::Io);
  }
}

TEST(Config, UnknownAttackLocus) {
  auto text = default_text() + "attacks:\n  - {kind: replay, locus: s9, start_us: 1000000, stop_us: 2000000, record_us: 500000}\n";
  const auto e = load_error(text);
  EXPECT_EQ(e.kind(), Kind::Topology);
}

TEST(Config, ExplicitTauOverridesPercentile) {
  auto text = replace_once(default_text(), "  tau_percentile: 0.95", "  tau: 12.5");
  EXPECT_DOUBLE_EQ(load_config_string(text).resolved_tau(), 12.5);
}
