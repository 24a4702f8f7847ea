#include "cpsnet/control.hpp"

#include <cmath>
#include <sstream>

#include "cpsnet/errors.hpp"

namespace cpsnet {

std::string to_string(AlertKind kind) {
  return kind == AlertKind::PhysicalAnomaly ? "physical-anomaly" : "cleared";
}

void ControllerConfig::validate(const StateSpaceModel& model) const {
  const auto n = model.n();
  const auto m = model.m();
  if (Q.rows() != n || Q.cols() != n || !is_psd(Q)) {
    throw ConfigError("controller Q must be a symmetric PSD " + std::to_string(n) + "x" +
                      std::to_string(n) + " matrix");
  }
  if (R.rows() != m || R.cols() != m || !is_pd(R)) {
    throw ConfigError("controller R must be a symmetric PD " + std::to_string(m) + "x" +
                      std::to_string(m) + " matrix");
  }
  if (Qw.rows() != m || Qw.cols() != m || !is_psd(Qw)) {
    throw ConfigError("watermark covariance Qw must be a symmetric PSD " + std::to_string(m) +
                      "x" + std::to_string(m) + " matrix");
  }
  if (detector_window < 1) throw ConfigError("detector window must be >= 1");
  if (!(detector_threshold > 0.0)) throw ConfigError("detector threshold must be positive");
  if (hysteresis < 1) throw ConfigError("hysteresis must be >= 1");
  if (control_period == 0) throw ConfigError("control period must be positive");
}

Matrix lqr_gain(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R,
                int max_iterations) {
  Matrix P = Q;
  bool converged = false;
  for (int it = 0; it < max_iterations; ++it) {
    const Matrix BtP = B.transpose() * P;
    const Matrix gain = (R + BtP * B).ldlt().solve(BtP * A);
    Matrix next = Q + A.transpose() * P * A - A.transpose() * P * B * gain;
    next = 0.5 * (next + next.transpose());
    if (!next.allFinite() || next.cwiseAbs().maxCoeff() > 1e15) break;
    const double scale = std::max(1.0, next.cwiseAbs().maxCoeff());
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (change <= 1e-14 * scale) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "Riccati iteration did not converge: (A, B) pair with A=\n"
        << A << "\nB=\n"
        << B << "\nis not stabilizable";
    throw ConfigError(msg.str());
  }
  const Matrix BtP = B.transpose() * P;
  Matrix L = (R + BtP * B).ldlt().solve(BtP * A);
  if (spectral_radius(A - B * L) >= 1.0) {
    throw ConfigError("LQR closed loop A - B L is not stable");
  }
  return L;
}

Estimate kalman_predict(const StateSpaceModel& model, const Estimate& est, const Vector& u_prev) {
  Estimate out;
  out.k = est.k + 1;
  out.xhat = model.A * est.xhat + model.B * u_prev;
  out.P = model.A * est.P * model.A.transpose() + model.W;
  out.P = 0.5 * (out.P + out.P.transpose());
  return out;
}

KalmanResult kalman_step(const StateSpaceModel& model, const Estimate& est, const Vector& u_prev,
                         const Vector& y) {
  const Estimate prior = kalman_predict(model, est, u_prev);
  KalmanResult res;
  res.P_pred = prior.P;
  res.S = model.C * prior.P * model.C.transpose() + model.V;
  res.S = 0.5 * (res.S + res.S.transpose());
  Eigen::LLT<Matrix> llt(res.S);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("innovation covariance is singular; V must be positive definite");
  }
  res.residual = y - model.C * prior.xhat;
  // K = P C^T S^-1, solved as S K^T = C P.
  res.gain = llt.solve(model.C * prior.P).transpose();
  res.estimate.k = prior.k;
  res.estimate.xhat = prior.xhat + res.gain * res.residual;
  const auto n = model.n();
  const Matrix I_KC = Matrix::Identity(n, n) - res.gain * model.C;
  // Joseph form keeps P PSD under rounding.
  res.estimate.P = I_KC * prior.P * I_KC.transpose() + res.gain * model.V * res.gain.transpose();
  res.estimate.P = 0.5 * (res.estimate.P + res.estimate.P.transpose());
  return res;
}

WatermarkedInput watermark_input(const Vector& u_star, const GaussianSampler& watermark,
                                 RngStream& rng) {
  WatermarkedInput out;
  if (watermark.degenerate()) {
    out.u = u_star;
    out.delta = Vector::Zero(u_star.size());
    return out;
  }
  out.delta = watermark.draw(rng);
  out.u = u_star + out.delta;
  return out;
}

WatermarkedInput watermark_input(const Vector& u_star, const Matrix& Qw, RngStream& rng) {
  return watermark_input(u_star, GaussianSampler(Qw), rng);
}

namespace {

double normalized_term(const Vector& r, const Matrix& S) {
  Eigen::LLT<Matrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw ConfigError("singular innovation covariance in detector window");
  }
  return r.dot(llt.solve(r));
}

}  // namespace

DetectorResult chi2_detect(std::span<const Vector> residuals, std::span<const Matrix> S,
                           int window, double threshold) {
  if (residuals.size() != S.size()) throw ConfigError("residual and covariance sequences differ in length");
  DetectorResult out;
  const auto w = static_cast<std::size_t>(window);
  const std::size_t begin = residuals.size() > w ? residuals.size() - w : 0;
  for (std::size_t i = begin; i < residuals.size(); ++i) out.g += normalized_term(residuals[i], S[i]);
  out.warm = residuals.size() >= w;
  out.alarm = out.warm && out.g > threshold;
  return out;
}

Chi2Detector::Chi2Detector(int window, double threshold) : window_(window), threshold_(threshold) {
  if (window < 1) throw ConfigError("detector window must be >= 1");
  if (!(threshold > 0.0)) throw ConfigError("detector threshold must be positive");
}

DetectorResult Chi2Detector::update(const Vector& residual, const Matrix& S) {
  terms_.push_back(normalized_term(residual, S));
  if (terms_.size() > static_cast<std::size_t>(window_)) terms_.pop_front();
  DetectorResult out;
  for (double t : terms_) out.g += t;
  out.warm = terms_.size() == static_cast<std::size_t>(window_);
  out.alarm = out.warm && out.g > threshold_;
  return out;
}

Supervisor::Supervisor(int hysteresis, std::string flow_hint)
    : hysteresis_(hysteresis), flow_hint_(std::move(flow_hint)) {
  if (hysteresis < 1) throw ConfigError("hysteresis must be >= 1");
}

std::optional<AlertSignal> Supervisor::tick(bool alarm, double statistic, std::uint64_t step) {
  // run_ counts consecutive steps disagreeing with the current alert state.
  if (alarm != raised_) {
    ++run_;
  } else {
    run_ = 0;
  }
  if (run_ < hysteresis_) return std::nullopt;
  run_ = 0;
  raised_ = !raised_;
  return AlertSignal{raised_ ? AlertKind::PhysicalAnomaly : AlertKind::Cleared, statistic, step,
                     flow_hint_};
}

Vector controller_tick(const Estimate& est, const Matrix& L, const Vector& reference) {
  return -L * (est.xhat - reference);
}

}  // namespace cpsnet
