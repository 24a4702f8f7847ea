#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <string>

#include "cpsnet/plant.hpp"
#include "cpsnet/sim.hpp"

namespace cpsnet {

struct ControllerConfig {
  Matrix Q;   // n x n state weight
  Matrix R;   // m x m input weight
  Matrix Qw;  // m x m watermark covariance; zero disables the watermark
  int detector_window = 10;
  double detector_threshold = 18.307;
  int hysteresis = 3;
  SimTime control_period = 10 * kMicrosPerMilli;

  void validate(const StateSpaceModel& model) const;
};

struct Estimate {
  Vector xhat;
  Matrix P;
  std::uint64_t k = 0;
};

enum class AlertKind { PhysicalAnomaly, Cleared };

std::string to_string(AlertKind kind);

struct AlertSignal {
  AlertKind kind = AlertKind::PhysicalAnomaly;
  double statistic = 0.0;
  std::uint64_t step = 0;
  std::string flow_hint;
};

/// Infinite-horizon discrete LQR gain from iterating the Riccati recursion to
/// its fixed point. Throws ConfigError if the iteration does not settle or
/// the closed loop A - B L is not stable.
Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                int max_iterations = 100000);

struct KalmanResult {
  Estimate estimate;
  Vector residual;
  Matrix S;       // innovation covariance
  Matrix P_pred;  // prior covariance
  Matrix gain;
};

/// Time update only (no measurement arrived).
Estimate kalman_predict(const StateSpaceModel& model, const Estimate& est, const Vector& u_prev);

/// Predict with u_prev then correct with y. Throws ConfigError if S is singular.
KalmanResult kalman_step(const StateSpaceModel& model, const Estimate& est, const Vector& u_prev,
                         const Vector& y);

struct WatermarkedInput {
  Vector u;
  Vector delta;
};

/// u = u* + delta with delta ~ N(0, Qw). Qw == 0 returns u* untouched and
/// consumes no random draws.
WatermarkedInput watermark_input(const Vector& u_star, const GaussianSampler& watermark,
                                 RngStream& rng);
WatermarkedInput watermark_input(const Vector& u_star, const Matrix& Qw, RngStream& rng);

struct DetectorResult {
  bool alarm = false;
  double g = 0.0;
  bool warm = false;  // false until `window` residuals have been seen
};

/// Windowed normalized-innovation statistic over the last `window` entries of
/// the residual and covariance sequences.
DetectorResult chi2_detect(std::span<const Vector> residuals, std::span<const Matrix> S,
                           int window, double threshold);

/// Streaming form of chi2_detect.
class Chi2Detector {
 public:
  Chi2Detector(int window, double threshold);
  DetectorResult update(const Vector& residual, const Matrix& S);
  int window() const { return window_; }
  double threshold() const { return threshold_; }

 private:
  int window_;
  double threshold_;
  std::deque<double> terms_;
};

/// Edge-triggered alert logic with hysteresis: an alert is raised after
/// `hysteresis` consecutive alarms and cleared after as many quiet steps.
class Supervisor {
 public:
  explicit Supervisor(int hysteresis, std::string flow_hint = {});
  std::optional<AlertSignal> tick(bool alarm, double statistic, std::uint64_t step);
  bool raised() const { return raised_; }

 private:
  int hysteresis_;
  std::string flow_hint_;
  bool raised_ = false;
  int run_ = 0;
};

/// u* = -L (xhat - reference)
Vector controller_tick(const Estimate& est, const Matrix& L, const Vector& reference);

}  // namespace cpsnet
