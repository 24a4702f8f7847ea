#include <gtest/gtest.h>

#include <sstream>

#include "cpsnet/rng.hpp"
#include "cpsnet/sim.hpp"

using namespace cpsnet;

TEST(Simulator, SingleEventAdvancesClock) {
  Simulator sim;
  SimTime seen = 0;
  sim.schedule(5, "t", "e", [&] { seen = sim.now(); });
  EXPECT_EQ(sim.run_until(10), 1u);
  EXPECT_EQ(seen, 5u);
}

TEST(Simulator, EqualTimesDequeueInInsertionOrder) {
  Simulator sim;
  std::string order;
  sim.schedule(5, "t", "e1", [&] { order += "1"; });
  sim.schedule(5, "t", "e2", [&] { order += "2"; });
  sim.run_until(5);
  EXPECT_EQ(order, "12");
}

TEST(Simulator, SchedulingInThePastThrows) {
  Simulator sim;
  sim.schedule(7, "t", "e", [] {});
  sim.run_until(7);
  EXPECT_THROW(sim.schedule(3, "t", "late", [] {}), SchedulingError);
}

TEST(Simulator, EmptyRunSetsClock) {
  Simulator sim;
  EXPECT_EQ(sim.run_until(100), 0u);
  EXPECT_EQ(sim.now(), 100u);
}

TEST(Simulator, RunUntilIsInclusive) {
  Simulator sim;
  for (SimTime t : {1, 2, 3}) sim.schedule(t, "t", "e", [] {});
  EXPECT_EQ(sim.run_until(2), 2u);
  EXPECT_EQ(sim.pending(), 1u);
}

TEST(Simulator, PeriodicSelfReschedule) {
  Simulator sim;
  int fired = 0;
  std::function<void()> tick = [&] {
    ++fired;
    if (sim.now() + 10 <= 100) sim.schedule(sim.now() + 10, "t", "tick", tick);
  };
  sim.schedule(10, "t", "tick", tick);
  sim.run_until(100);
  EXPECT_EQ(fired, 10);
}

TEST(Simulator, DequeueOrderIsMonotone) {
  Simulator sim;
  sim.set_audit(true);
  RngStream rng(3, "sim-test");
  for (int i = 0; i < 2000; ++i) {
    const auto t = static_cast<SimTime>(rng.uniform() * 50);
    sim.schedule(t, "t", "e", [&sim, &rng] {
      if (rng.uniform() < 0.3) sim.schedule(sim.now() + static_cast<SimTime>(rng.uniform() * 5), "t", "child", [] {});
    });
  }
  sim.run_until(1000);
  const auto& log = sim.dequeue_log();
  for (std::size_t i = 1; i < log.size(); ++i) {
    EXPECT_TRUE(log[i - 1].first < log[i].first ||
                (log[i - 1].first == log[i].first && log[i - 1].second < log[i].second));
  }
}

TEST(Simulator, TraceLines) {
  Simulator sim;
  sim.set_tracing(true);
  sim.schedule(4, "plant", "step", [] {});
  sim.run_until(10);
  std::ostringstream out;
  sim.write_trace(out);
  EXPECT_EQ(out.str(), "4 0 plant step\n");
}

TEST(RngStream, StreamsDependOnlyOnSeedAndId) {
  RngStream a(42, "plant/process");
  RngStream b(42, "plant/process");
  RngStream c(42, "plant/measurement");
  EXPECT_EQ(a.seed(), b.seed());
  EXPECT_NE(a.seed(), c.seed());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.standard_normal(), b.standard_normal());
}

TEST(RngStream, Fnv1aKnownValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}
