#pragma once

#include "condcov/common.hpp"

namespace condcov {

/// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double regularized_gamma_p(double a, double x);

/// CDF of the chi-square distribution with dof degrees of freedom.
double chi2_cdf(Index dof, double x);

/// Quantile of the chi-square distribution (inverse CDF), q in (0, 1).
double chi2_quantile(Index dof, double q);

/// Standard normal CDF.
double normal_cdf(double x);

}  // namespace condcov
