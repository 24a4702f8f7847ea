#include "cpsnet/sysid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace cpsnet::pn {

SysIdResult identify_behavior(std::span<const IoTransition> rows, std::size_t min_samples,
                              double max_condition) {
  if (rows.size() < min_samples || rows.empty()) {
    return SysIdError{SysIdErrorKind::InsufficientSamples,
                      "need " + std::to_string(min_samples) + " samples, have " + std::to_string(rows.size())};
  }
  const auto p = rows.front().y.size();
  const auto m = rows.front().u.size();
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix phi(n, p + m);
  Matrix target(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    phi.row(i).head(p) = r.y.transpose();
    phi.row(i).tail(m) = r.u.transpose();
    target.row(i) = r.y_next.transpose();
  }
  Eigen::JacobiSVD<Matrix> svd(phi, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smax = sv.maxCoeff();
  const double smin = sv.minCoeff();
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition)) {
    return SysIdError{SysIdErrorKind::InsufficientExcitation,
                      "regressor condition number " + std::to_string(cond) + " exceeds " +
                          std::to_string(max_condition)};
  }
  // A constant input is absorbed by the output columns; demand that it varies.
  const Matrix u_centered = phi.rightCols(m).rowwise() - phi.rightCols(m).colwise().mean();
  const double u_spread = Eigen::JacobiSVD<Matrix>(u_centered).singularValues().minCoeff();
  if (!(u_spread * max_condition > smax)) {
    return SysIdError{SysIdErrorKind::InsufficientExcitation, "input does not vary over the sample window"};
  }
  const Matrix theta = svd.solve(target);  // (p+m) x p
  BehaviorEstimate est;
  est.Ahat = theta.topRows(p).transpose();
  est.Bhat = theta.bottomRows(m).transpose();
  est.sample_count = rows.size();
  const Matrix resid = target - phi * theta;
  est.residual_norm = resid.norm();
  est.condition = cond;
  const auto dof = static_cast<double>(std::max<Eigen::Index>(1, n - static_cast<Eigen::Index>(p + m)));
  const Vector inv_s2 = sv.array().square().inverse().matrix();
  const Vector gram_inv_diag = (svd.matrixV().array().square().matrix() * inv_s2);
  const double sigma2 = resid.colwise().squaredNorm().maxCoeff() / dof;
  est.max_stderr = std::sqrt(sigma2 * gram_inv_diag.maxCoeff());
  return est;
}

SysIdResult identify_behavior(std::span<const IoPair> sequence, std::size_t min_samples,
                              double max_condition) {
  std::vector<IoTransition> rows;
  for (std::size_t i = 0; i + 1 < sequence.size(); ++i) {
    rows.push_back(IoTransition{sequence[i].y, sequence[i].u, sequence[i + 1].y});
  }
  return identify_behavior(rows, min_samples, max_condition);
}

std::optional<double> behavior_deviation(const BehaviorEstimate& est, const StateSpaceModel& nominal) {
  if (nominal.C.rows() != nominal.C.cols()) return std::nullopt;
  Eigen::FullPivLU<Matrix> lu(nominal.C);
  if (!lu.isInvertible()) return std::nullopt;
  const Matrix a_out = nominal.C * nominal.A * lu.inverse();
  const Matrix b_out = nominal.C * nominal.B;
  if (a_out.rows() != est.Ahat.rows() || b_out.cols() != est.Bhat.cols()) return std::nullopt;
  return std::max((est.Ahat - a_out).cwiseAbs().maxCoeff(), (est.Bhat - b_out).cwiseAbs().maxCoeff());
}

}  // namespace cpsnet::pn
