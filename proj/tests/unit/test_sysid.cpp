#include <gtest/gtest.h>

#include "cpsnet/sysid.hpp"

using namespace cpsnet;
using namespace cpsnet::pn;

namespace {

std::vector<IoPair> simulate(double a, double b, double w, double v, std::size_t n, bool constant_u,
                             std::uint64_t seed) {
  RngStream pw(seed, "w"), mv(seed, "v"), ex(seed, "u");
  std::vector<IoPair> out;
  double x = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double u = constant_u ? 1.0 : ex.standard_normal();
    const double y = x + std::sqrt(v) * mv.standard_normal();
    out.push_back({Vector::Constant(1, u), Vector::Constant(1, y)});
    x = a * x + b * u + std::sqrt(w) * pw.standard_normal();
  }
  return out;
}

}  // namespace

TEST(SysId, NoiseFreeExact) {
  const auto data = simulate(0.9, 1.0, 0.0, 0.0, 200, false, 1);
  const auto r = identify_behavior(std::span<const IoPair>(data));
  ASSERT_TRUE(std::holds_alternative<BehaviorEstimate>(r));
  const auto& est = std::get<BehaviorEstimate>(r);
  EXPECT_NEAR(est.Ahat(0, 0), 0.9, 1e-6);
  EXPECT_NEAR(est.Bhat(0, 0), 1.0, 1e-6);
  EXPECT_NEAR(est.residual_norm, 0.0, 1e-9);
}

TEST(SysId, NoisyWithinTolerance) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = simulate(0.9, 1.0, 0.01, 0.01, 1000, false, seed);
    const auto r = identify_behavior(std::span<const IoPair>(data));
    ASSERT_TRUE(std::holds_alternative<BehaviorEstimate>(r));
    const auto& est = std::get<BehaviorEstimate>(r);
    EXPECT_NEAR(est.Ahat(0, 0), 0.9, 0.05) << seed;
    EXPECT_NEAR(est.Bhat(0, 0), 1.0, 0.05) << seed;
    EXPECT_GT(est.max_stderr, 0.0);
    EXPECT_LT(est.max_stderr, 0.01);
  }
}

TEST(SysId, ConstantInputIsInsufficientExcitation) {
  const auto data = simulate(0.9, 1.0, 0.0, 0.0, 500, true, 1);
  const auto r = identify_behavior(std::span<const IoPair>(data));
  ASSERT_TRUE(std::holds_alternative<SysIdError>(r));
  EXPECT_EQ(std::get<SysIdError>(r).kind, SysIdErrorKind::InsufficientExcitation);
}

TEST(SysId, TooFewSamples) {
  const auto data = simulate(0.9, 1.0, 0.0, 0.0, 20, false, 1);
  const auto r = identify_behavior(std::span<const IoPair>(data));
  ASSERT_TRUE(std::holds_alternative<SysIdError>(r));
  EXPECT_EQ(std::get<SysIdError>(r).kind, SysIdErrorKind::InsufficientSamples);
}

TEST(SysId, DeviationInOutputCoordinates) {
  StateSpaceModel m = StateSpaceModel::scalar(0.9, 1.0, 2.0, 0.0, 1.0);
  BehaviorEstimate est;
  est.Ahat = Matrix::Constant(1, 1, 0.95);
  est.Bhat = Matrix::Constant(1, 1, 1.8);
  const auto d = behavior_deviation(est, m);
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 0.2, 1e-12);
  m.C = Matrix::Ones(1, 2);
  m.A = Matrix::Identity(2, 2);
  m.B = Matrix::Ones(2, 1);
  EXPECT_FALSE(behavior_deviation(est, m));
}
