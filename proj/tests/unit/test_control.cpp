#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>

#include "cpsnet/chi2.hpp"
#include "cpsnet/control.hpp"
#include "cpsnet/errors.hpp"

using namespace cpsnet;

namespace {

const double kGolden = (1.0 + std::sqrt(5.0)) / 2.0;

// Textbook Riccati recursion, iterated a fixed number of times.
Matrix riccati_oracle(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R, int iters) {
  Matrix P = Q;
  for (int i = 0; i < iters; ++i) {
    const Matrix G = (R + B.transpose() * P * B).inverse();
    P = Q + A.transpose() * P * A - A.transpose() * P * B * G * B.transpose() * P * A;
  }
  return (R + B.transpose() * P * B).inverse() * B.transpose() * P * A;
}

Matrix random_matrix(RngStream& rng, int r, int c) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < c; ++j) m(i, j) = rng.standard_normal();
  }
  return m;
}

}  // namespace

TEST(Lqr, ScalarGoldenRatio) {
  const Matrix one = Matrix::Ones(1, 1);
  double p = 1.0;
  for (int i = 0; i < 1000; ++i) p = 1.0 + p - (p * p) / (1.0 + p);
  const Matrix L = lqr_gain(one, one, one, one);
  EXPECT_NEAR(p, kGolden, 1e-9);
  EXPECT_NEAR(L(0, 0), p / (1.0 + p), 1e-9);
  EXPECT_NEAR(L(0, 0), 0.618034, 1e-6);
}

TEST(Lqr, ZeroStateCostGivesZeroGain) {
  const Matrix L = lqr_gain(Matrix::Constant(1, 1, 0.5), Matrix::Ones(1, 1), Matrix::Zero(1, 1),
                            Matrix::Ones(1, 1));
  EXPECT_NEAR(L(0, 0), 0.0, 1e-12);
}

TEST(Lqr, ScalarMatchesIterationOracle) {
  const Matrix A = Matrix::Constant(1, 1, 0.9), one = Matrix::Ones(1, 1);
  EXPECT_NEAR(lqr_gain(A, one, one, one)(0, 0), riccati_oracle(A, one, one, one, 10000)(0, 0), 1e-9);
}

TEST(Lqr, RandomInstancesMatchLongHorizon) {
  RngStream rng(2024, "lqr-test");
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + trial % 2;
    const int m = 1 + trial % 2;
    Matrix A = random_matrix(rng, n, n);
    A *= 0.95 / std::max(spectral_radius(A), 0.5);
    const Matrix B = random_matrix(rng, n, m);
    const Matrix Qh = random_matrix(rng, n, n);
    const Matrix Q = Qh * Qh.transpose() + Matrix::Identity(n, n);
    const Matrix R = Matrix::Identity(m, m);
    const Matrix L = lqr_gain(A, B, Q, R);
    EXPECT_LT((L - riccati_oracle(A, B, Q, R, 20000)).cwiseAbs().maxCoeff(), 1e-9) << "trial " << trial;
    EXPECT_LT(spectral_radius(A - B * L), 1.0);
  }
}

TEST(Lqr, UnstabilizablePairRejected) {
  Matrix A(2, 2);
  A << 1.2, 0, 0, 0.5;
  Matrix B(2, 1);
  B << 0, 1;
  EXPECT_THROW(lqr_gain(A, B, Matrix::Identity(2, 2), Matrix::Ones(1, 1)), ConfigError);
}

TEST(Kalman, PerfectModelZeroResidual) {
  const auto m = StateSpaceModel::scalar(0.9, 1.0, 1.0, 0.0, 0.01);
  Estimate est{Vector::Constant(1, 1.0), Matrix::Zero(1, 1), 0};
  double x = 1.0;
  for (int k = 0; k < 50; ++k) {
    const double u = std::sin(k);
    x = 0.9 * x + u;
    const auto r = kalman_step(m, est, Vector::Constant(1, u), Vector::Constant(1, x));
    EXPECT_NEAR(r.residual(0), 0.0, 1e-12);
    est = r.estimate;
  }
}

TEST(Kalman, ScalarGoldenCovariance) {
  const auto m = StateSpaceModel::scalar(1.0, 1.0, 1.0, 1.0, 1.0);
  Estimate est{Vector::Zero(1), Matrix::Ones(1, 1), 0};
  KalmanResult r;
  for (int k = 0; k < 200; ++k) {
    r = kalman_step(m, est, Vector::Zero(1), Vector::Zero(1));
    est = r.estimate;
  }
  EXPECT_NEAR(r.P_pred(0, 0), kGolden, 1e-6);
  EXPECT_NEAR(r.gain(0, 0), 0.618034, 1e-6);
}

TEST(Kalman, RandomTwoStateMatchesRecursion) {
  RngStream rng(99, "kalman-test");
  StateSpaceModel m;
  m.A = random_matrix(rng, 2, 2);
  m.A *= 0.9 / spectral_radius(m.A);
  m.B = random_matrix(rng, 2, 1);
  m.C = random_matrix(rng, 1, 2);
  const Matrix wh = random_matrix(rng, 2, 2);
  m.W = wh * wh.transpose() * 0.1;
  m.V = Matrix::Constant(1, 1, 0.2);
  Matrix P = Matrix::Identity(2, 2);
  Estimate est{Vector::Zero(2), P, 0};
  for (int k = 0; k < 1000; ++k) {
    const Matrix Pp = m.A * P * m.A.transpose() + m.W;
    const Matrix K = Pp * m.C.transpose() * (m.C * Pp * m.C.transpose() + m.V).inverse();
    P = (Matrix::Identity(2, 2) - K * m.C) * Pp;
    est = kalman_step(m, est, Vector::Zero(1), Vector::Constant(1, rng.standard_normal())).estimate;
  }
  EXPECT_LT((est.P - P).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Kalman, PredictOnlyGrowsCovariance) {
  const auto m = StateSpaceModel::scalar(0.9, 1.0, 1.0, 0.5, 0.1);
  const Estimate est{Vector::Constant(1, 2.0), Matrix::Constant(1, 1, 1.0), 3};
  const auto p = kalman_predict(m, est, Vector::Constant(1, 1.0));
  EXPECT_DOUBLE_EQ(p.xhat(0), 2.8);
  EXPECT_DOUBLE_EQ(p.P(0, 0), 0.81 + 0.5);
  EXPECT_EQ(p.k, 4u);
}

TEST(Watermark, DisabledPassesThrough) {
  RngStream rng(1, "wm");
  const auto w = watermark_input(Vector::Constant(1, 3.2), Matrix::Zero(1, 1), rng);
  EXPECT_EQ(w.u(0), 3.2);
  EXPECT_EQ(w.delta(0), 0.0);
}

TEST(Watermark, SampleVariance) {
  RngStream rng(8, "wm");
  const GaussianSampler s(Matrix::Constant(1, 1, 0.25));
  const int n = 100000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double d = watermark_input(Vector::Zero(1), s, rng).delta(0);
    sum += d;
    sq += d * d;
  }
  const double mean = sum / n;
  EXPECT_NEAR(sq / n - mean * mean, 0.25, 0.01);
}

TEST(Watermark, ReproducibleUnderSeed) {
  RngStream a(77, "controller/watermark"), b(77, "controller/watermark");
  const Matrix Qw = Matrix::Constant(1, 1, 0.25);
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(watermark_input(Vector::Zero(1), Qw, a).delta(0), watermark_input(Vector::Zero(1), Qw, b).delta(0));
  }
}

TEST(Chi2Detect, ZeroResiduals) {
  std::vector<Vector> r(10, Vector::Zero(1));
  std::vector<Matrix> S(10, Matrix::Ones(1, 1));
  const auto d = chi2_detect(r, S, 10, 18.307);
  EXPECT_EQ(d.g, 0.0);
  EXPECT_FALSE(d.alarm);
  EXPECT_TRUE(d.warm);
}

TEST(Chi2Detect, ScalarArithmetic) {
  std::vector<Vector> r{Vector::Constant(1, 2.0)};
  std::vector<Matrix> S{Matrix::Constant(1, 1, 4.0)};
  EXPECT_DOUBLE_EQ(chi2_detect(r, S, 1, 10.0).g, 1.0);
}

TEST(Chi2Detect, StreamingMatchesBatch) {
  RngStream rng(4, "det");
  Chi2Detector det(5, 11.07);
  std::vector<Vector> rs;
  std::vector<Matrix> Ss;
  for (int k = 0; k < 40; ++k) {
    rs.push_back(Vector::Constant(1, rng.standard_normal() * 2));
    Ss.push_back(Matrix::Constant(1, 1, 1.0 + rng.uniform()));
    const auto s = det.update(rs.back(), Ss.back());
    const auto b = chi2_detect(rs, Ss, 5, 11.07);
    EXPECT_EQ(s.warm, b.warm);
    if (s.warm) {
      EXPECT_NEAR(s.g, b.g, 1e-12);
      EXPECT_EQ(s.alarm, b.alarm);
    }
  }
}

TEST(Chi2Quantile, MatchesBoost) {
  for (double dof : {1.0, 2.0, 5.0, 10.0, 20.0, 50.0}) {
    const boost::math::chi_squared_distribution<double> dist(dof);
    for (double p : {0.01, 0.5, 0.9, 0.95, 0.99, 0.9999}) {
      const double ref = boost::math::quantile(dist, p);
      EXPECT_NEAR(chi2_quantile(p, dof), ref, 1e-8 * std::max(1.0, ref)) << dof << " " << p;
      EXPECT_NEAR(chi2_cdf(ref, dof), p, 1e-10);
    }
  }
  EXPECT_NEAR(chi2_quantile(0.95, 10.0), 18.307, 1e-3);
}

TEST(Supervisor, RisingEdge) {
  Supervisor s(1);
  EXPECT_FALSE(s.tick(false, 0, 1));
  EXPECT_FALSE(s.tick(false, 0, 2));
  const auto a = s.tick(true, 20, 3);
  ASSERT_TRUE(a);
  EXPECT_EQ(a->kind, AlertKind::PhysicalAnomaly);
  EXPECT_EQ(a->step, 3u);
}

TEST(Supervisor, EdgeTriggered) {
  Supervisor s(1);
  ASSERT_TRUE(s.tick(true, 20, 1));
  for (std::uint64_t k = 2; k < 5; ++k) EXPECT_FALSE(s.tick(true, 20, k));
}

TEST(Supervisor, HysteresisSuppressesChatter) {
  Supervisor s(3);
  for (std::uint64_t k = 0; k < 100; ++k) EXPECT_FALSE(s.tick(k % 2 == 0, 0, k));
}

TEST(Supervisor, ClearsAfterQuietRun) {
  Supervisor s(2);
  s.tick(true, 0, 0);
  ASSERT_TRUE(s.tick(true, 0, 1));
  EXPECT_FALSE(s.tick(false, 0, 2));
  const auto c = s.tick(false, 0, 3);
  ASSERT_TRUE(c);
  EXPECT_EQ(c->kind, AlertKind::Cleared);
  EXPECT_FALSE(s.raised());
}

TEST(ControllerTick, RegulationFixedPoint) {
  const Estimate est{Vector::Constant(1, 0.5), Matrix::Ones(1, 1), 0};
  EXPECT_DOUBLE_EQ(controller_tick(est, Matrix::Constant(1, 1, 0.618), Vector::Constant(1, 0.5))(0), 0.0);
}

TEST(ControllerTick, Arithmetic) {
  const Estimate est{Vector::Constant(1, 1.0), Matrix::Ones(1, 1), 0};
  EXPECT_DOUBLE_EQ(controller_tick(est, Matrix::Constant(1, 1, 0.618), Vector::Zero(1))(0), -0.618);
}

TEST(ControllerTick, NoiseFreeLoopConverges) {
  const auto m = StateSpaceModel::scalar(0.9, 1.0, 1.0, 0.0, 0.01);
  const Matrix L = lqr_gain(m.A, m.B, Matrix::Ones(1, 1), Matrix::Ones(1, 1));
  Estimate est{Vector::Constant(1, 1.0), Matrix::Zero(1, 1), 0};
  double x = 1.0;
  Vector u = Vector::Zero(1);
  int reached = -1;
  for (int k = 0; k < 200; ++k) {
    u = controller_tick(est, L, Vector::Zero(1));
    x = 0.9 * x + u(0);
    est = kalman_step(m, est, u, Vector::Constant(1, x)).estimate;
    if (std::abs(x) < 1e-6) {
      reached = k;
      break;
    }
  }
  EXPECT_GE(reached, 0);
}
