#pragma once

namespace cpsnet {

/// Regularized lower incomplete gamma function P(a, x).
double regularized_gamma_p(double a, double x);

/// CDF of the chi-square distribution with `dof` degrees of freedom.
double chi2_cdf(double x, double dof);

/// Quantile (inverse CDF) of chi-square; prob in (0, 1).
double chi2_quantile(double prob, double dof);

}  // namespace cpsnet
