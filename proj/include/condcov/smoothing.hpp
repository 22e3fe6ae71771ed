#pragma once

#include <cmath>
#include <vector>

#include "condcov/common.hpp"
#include "condcov/errors.hpp"
#include "condcov/kernel.hpp"

namespace condcov::detail {

// Kernel profile without the 1/h scale. Ratio estimators divide numerator
// by denominator, so the scale cancels; dropping it keeps the equal-weight
// sentinel (h = inf) exact instead of a 0/0 limit.
template <class Scalar>
Scalar kernel_profile(Scalar u, Scalar h) {
  if (std::isinf(h)) return Scalar(kInvSqrt2Pi);
  return gaussian_kernel(u / h);
}

// Weight-mass floor for an evaluation with n observations, in profile units:
// sum_i K_h(z_i - z) >= n * K_h(3h) * eps  <=>  sum_i phi(u_i) >= n * phi(3) * eps.
inline double weight_floor(double n) {
  constexpr double eps_mass = 1e-8;
  return n * gaussian_kernel(3.0) * eps_mass;
}

// Beyond this many bandwidths the Gaussian profile underflows to zero.
inline constexpr double kKernelCutoff = 40.0;

// Observations sharing a confounder value collapse into one group carrying
// the multiplicity and the per-column sums. Kernel sums over groups are
// exact for ratio estimators and fast on gridded data.
struct GroupedData {
  Vector z;       // distinct values, ascending
  Vector count;   // multiplicity per group
  Matrix sums;    // group-wise column sums of the attached row values

  Index groups() const { return z.size(); }
  double total() const { return count.sum(); }
};

GroupedData group_by_z(const Vector& z, const Matrix& rows);

struct SmoothedSums {
  Vector numerators;  // sum_g w_g * sums(g, c) for each requested column
  double weight = 0.0;  // sum_g w_g * count_g
};

// Kernel-weighted sums at z0 with bandwidth h over the given columns.
// Throws SparseRegionError when the weight mass falls below the floor.
SmoothedSums smoothed_sums(const GroupedData& g, double z0, double h,
                           const std::vector<Index>& columns);

// Same, subtracting one excluded observation's contribution (leave-one-out).
// `excluded` holds that observation's value for each requested column.
SmoothedSums smoothed_sums_excluding(const GroupedData& g, double z0, double h,
                                     const std::vector<Index>& columns,
                                     double z_excluded, const Vector& excluded);

}  // namespace condcov::detail
