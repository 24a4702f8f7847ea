#include "cpsnet/plant.hpp"

#include <cmath>
#include <sstream>

#include "cpsnet/errors.hpp"

namespace cpsnet {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream s;
  s << m.rows() << "x" << m.cols();
  return s.str();
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream s;
    s << "matrix " << name << " is " << dims(m) << ", expected " << rows << "x" << cols;
    throw ConfigError(s.str());
  }
}

}  // namespace

bool is_symmetric(const Matrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_psd(const Matrix& m, double tol) {
  if (!is_symmetric(m)) return false;
  if (m.size() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

bool is_pd(const Matrix& m) {
  if (!is_symmetric(m)) return false;
  Eigen::LLT<Matrix> llt(m);
  return llt.info() == Eigen::Success;
}

double spectral_radius(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void StateSpaceModel::validate() const {
  const auto nn = A.rows();
  if (nn == 0) throw ConfigError("plant matrix A is empty");
  require_shape(A, nn, nn, "A");
  if (B.rows() != nn || B.cols() == 0) {
    throw ConfigError("matrix B is " + dims(B) + ", expected " + std::to_string(nn) + "xm");
  }
  if (C.cols() != nn || C.rows() == 0) {
    throw ConfigError("matrix C is " + dims(C) + ", expected px" + std::to_string(nn));
  }
  require_shape(W, nn, nn, "W");
  require_shape(V, C.rows(), C.rows(), "V");
  if (!is_psd(W)) throw ConfigError("process noise covariance W is not symmetric PSD");
  if (!is_pd(V)) throw ConfigError("measurement noise covariance V is not symmetric PD");
}

StateSpaceModel StateSpaceModel::scalar(double a, double b, double c, double w, double v) {
  StateSpaceModel m;
  m.A = Matrix::Constant(1, 1, a);
  m.B = Matrix::Constant(1, 1, b);
  m.C = Matrix::Constant(1, 1, c);
  m.W = Matrix::Constant(1, 1, w);
  m.V = Matrix::Constant(1, 1, v);
  return m;
}

GaussianSampler::GaussianSampler(const Matrix& cov) {
  if (!is_symmetric(cov)) throw ConfigError("covariance is not symmetric");
  const auto d = cov.rows();
  factor_ = Matrix::Zero(d, d);
  if (d == 0 || cov.isZero(0.0)) {
    zero_ = true;
    return;
  }
  Eigen::LDLT<Matrix> ldlt(cov);
  if (ldlt.info() != Eigen::Success) throw ConfigError("covariance factorization failed");
  Vector diag = ldlt.vectorD();
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < d; ++i) {
    if (diag(i) < -1e-10 * scale) throw ConfigError("covariance is not positive semidefinite");
    diag(i) = std::sqrt(std::max(0.0, diag(i)));
  }
  Matrix lower = ldlt.matrixL();
  Matrix scaled = lower * diag.asDiagonal();
  factor_ = ldlt.transpositionsP().transpose() * scaled;
  zero_ = false;
}

Vector GaussianSampler::draw(RngStream& rng) const {
  const auto d = factor_.rows();
  if (zero_) return Vector::Zero(d);
  Vector z(d);
  for (Eigen::Index i = 0; i < d; ++i) z(i) = rng.standard_normal();
  return factor_ * z;
}

Vector sample_gaussian(const Matrix& cov, RngStream& rng) { return GaussianSampler(cov).draw(rng); }

PlantOutput plant_step(const StateSpaceModel& model, const PlantState& state, const Vector& u,
                       RngStream& process_rng, RngStream& measurement_rng,
                       double divergence_bound) {
  if (u.size() != model.m()) {
    throw ConfigError("input has dimension " + std::to_string(u.size()) + ", plant expects " +
                      std::to_string(model.m()));
  }
  if (state.x.size() != model.n()) {
    throw ConfigError("state has dimension " + std::to_string(state.x.size()) +
                      ", plant expects " + std::to_string(model.n()));
  }
  PlantOutput out;
  out.state.k = state.k + 1;
  out.state.x = model.A * state.x + model.B * u + sample_gaussian(model.W, process_rng);
  if (!out.state.x.allFinite() || out.state.x.norm() > divergence_bound) {
    throw DivergenceError("plant state diverged at step " + std::to_string(out.state.k),
                          out.state.k);
  }
  out.y = model.C * out.state.x + sample_gaussian(model.V, measurement_rng);
  return out;
}

}  // namespace cpsnet
