#include <gtest/gtest.h>

#include "cpsnet/paths.hpp"
#include "path_oracle.hpp"

using namespace cpsnet;
using namespace cpsnet::pn;

namespace cpsnet::net {
void PrintTo(const NodeId& id, std::ostream* os) { *os << "#" << id.value; }
}  // namespace cpsnet::net

namespace {

struct Diamond {
  net::Topology topo;
  NodeId s1, s2, s3, s4;
  Diamond() {
    s1 = topo.add_switch("S1");
    s2 = topo.add_switch("S2");
    s3 = topo.add_switch("S3");
    s4 = topo.add_switch("S4");
    topo.add_link(s1, s2, 1000, 1000000);
    topo.add_link(s2, s4, 1000, 1000000);
    topo.add_link(s1, s3, 5000, 1000000);
    topo.add_link(s3, s4, 5000, 1000000);
  }
};

void expect_matches_oracle(const net::Topology& topo, int k, const std::set<LinkId>& excluded = {}) {
  const auto table = compute_paths(topo, k, excluded);
  for (NodeId a : topo.switches()) {
    for (NodeId b : topo.switches()) {
      const auto expected = oracle::top_k_paths(topo, a, b, k, excluded);
      const auto& got = table.paths(a, b);
      ASSERT_EQ(got.size(), expected.size()) << topo.name(a) << "->" << topo.name(b);
      for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].hops, expected[i].hops);
        EXPECT_EQ(got[i].latency, expected[i].latency);
      }
    }
  }
}

}  // namespace

TEST(Paths, DiamondRanking) {
  Diamond d;
  const auto t = compute_paths(d.topo, 2);
  const auto& p = t.paths(d.s1, d.s4);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].hops, (std::vector<NodeId>{d.s1, d.s2, d.s4}));
  EXPECT_EQ(p[0].latency, 2000u);
  EXPECT_EQ(p[1].hops, (std::vector<NodeId>{d.s1, d.s3, d.s4}));
  EXPECT_EQ(p[1].latency, 10000u);
  EXPECT_DOUBLE_EQ(p[0].qos_score, 1.0 / 2000.0);
  expect_matches_oracle(d.topo, 2);
  expect_matches_oracle(d.topo, 5);
}

TEST(Paths, SingleLinkPair) {
  net::Topology t;
  auto a = t.add_switch("a");
  auto b = t.add_switch("b");
  t.add_link(a, b, 10, 1);
  EXPECT_EQ(compute_paths(t, 3).paths(a, b).size(), 1u);
}

TEST(Paths, FewerHopsBreakLatencyTies) {
  net::Topology t;
  auto a = t.add_switch("a");
  auto b = t.add_switch("b");
  auto c = t.add_switch("c");
  t.add_link(a, b, 1000, 1);
  t.add_link(b, c, 1000, 1);
  t.add_link(a, c, 2000, 1);
  const auto table = compute_paths(t, 2);
  const auto& p = table.paths(a, c);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0].hops, (std::vector<NodeId>{a, c}));
  EXPECT_EQ(p[1].hops, (std::vector<NodeId>{a, b, c}));
}

TEST(Paths, DisconnectedPairIsEmpty) {
  net::Topology t;
  auto a = t.add_switch("a");
  auto b = t.add_switch("b");
  auto c = t.add_switch("c");
  const auto l = t.add_link(a, b, 1, 1);
  t.add_link(b, c, 1, 1);
  EXPECT_TRUE(compute_paths(t, 2, {l}).paths(a, c).empty());
  EXPECT_EQ(compute_paths(t, 2, {l}).paths(b, c).size(), 1u);
}

TEST(Paths, LabelsStableAcrossRecompute) {
  Diamond d;
  LabelAllocator labels;
  const auto before = compute_paths(d.topo, 2, {}, {}, &labels);
  const auto after = compute_paths(d.topo, 2, {*d.topo.link_between(d.s1, d.s2)}, {}, &labels);
  const auto& b = before.paths(d.s1, d.s4);
  const auto& a = after.paths(d.s1, d.s4);
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].label, b[1].label);
  EXPECT_EQ(before.by_label(b[0].label)->hops, b[0].hops);
}

TEST(Paths, ClassEligibility) {
  Diamond d;
  const auto t = compute_paths(d.topo, 2, {}, PathRoles{d.s3, d.s4});
  const auto& p = t.paths(d.s1, d.s4);
  EXPECT_FALSE(p[0].class_eligibility.count(TrafficClass::Suspicious));
  EXPECT_TRUE(p[1].class_eligibility.count(TrafficClass::Suspicious));
  EXPECT_TRUE(p[0].class_eligibility.count(TrafficClass::Malicious));
  EXPECT_TRUE(t.paths(d.s1, d.s2)[0].class_eligibility.count(TrafficClass::Legitimate));
  EXPECT_FALSE(t.paths(d.s1, d.s2)[0].class_eligibility.count(TrafficClass::Malicious));
}

TEST(Paths, RandomGraphsMatchOracle) {
  RngStream rng(5150, "paths-test");
  for (int trial = 0; trial < 40; ++trial) {
    net::Topology t;
    const int n = 3 + trial % 6;
    std::vector<NodeId> s;
    for (int i = 0; i < n; ++i) s.push_back(t.add_switch("s" + std::to_string(i)));
    for (int i = 1; i < n; ++i) {
      t.add_link(s[static_cast<std::size_t>(i)], s[rng.engine()() % static_cast<std::size_t>(i)],
                 100 * (1 + rng.engine()() % 4), 1000000);
    }
    for (int e = 0; e < n; ++e) {
      auto a = s[rng.engine()() % s.size()];
      auto b = s[rng.engine()() % s.size()];
      if (a == b || t.link_between(a, b)) continue;
      t.add_link(a, b, 100 * (1 + rng.engine()() % 4), 1000000);
    }
    for (int k : {1, 2, 3, 6}) expect_matches_oracle(t, k);
  }
}
