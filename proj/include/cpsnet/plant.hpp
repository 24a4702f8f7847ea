#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "cpsnet/rng.hpp"

namespace cpsnet {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Discrete-time linear plant x+ = A x + B u + w, y = C x + v.
struct StateSpaceModel {
  Matrix A;  // n x n
  Matrix B;  // n x m
  Matrix C;  // p x n
  Matrix W;  // n x n process noise covariance, PSD
  Matrix V;  // p x p measurement noise covariance, PD

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  Eigen::Index p() const { return C.rows(); }

  /// Throws ConfigError on any dimension or covariance violation.
  void validate() const;

  static StateSpaceModel scalar(double a, double b, double c, double w, double v);
};

struct PlantState {
  Vector x;
  std::uint64_t k = 0;
};

struct PlantOutput {
  PlantState state;
  Vector y;
};

/// One plant update. The measurement reports the post-step state.
/// Throws ConfigError on a wrong input size and DivergenceError when the new
/// state is non-finite or its norm exceeds `divergence_bound`.
PlantOutput plant_step(const StateSpaceModel& model, const PlantState& state, const Vector& u,
                       RngStream& process_rng, RngStream& measurement_rng,
                       double divergence_bound = 1e6);

/// Draw from N(0, cov). Uses a pivoted LDLT factorization so singular PSD
/// matrices are accepted; throws ConfigError when cov is not symmetric PSD.
Vector sample_gaussian(const Matrix& cov, RngStream& rng);

/// Reusable sampler that factors the covariance once.
class GaussianSampler {
 public:
  GaussianSampler() = default;
  explicit GaussianSampler(const Matrix& cov);
  Vector draw(RngStream& rng) const;
  Eigen::Index dim() const { return factor_.rows(); }
  bool degenerate() const { return zero_; }

 private:
  Matrix factor_;  // cov = factor * factor^T
  bool zero_ = true;
};

double spectral_radius(const Matrix& m);
bool is_symmetric(const Matrix& m, double tol = 1e-9);
bool is_psd(const Matrix& m, double tol = 1e-10);
bool is_pd(const Matrix& m);

}  // namespace cpsnet
