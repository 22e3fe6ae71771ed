#pragma once

#include <cmath>
#include <limits>

#include "condcov/errors.hpp"

namespace condcov {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Unit Gaussian density, the base kernel K(u).
template <class Scalar>
Scalar gaussian_kernel(Scalar u) {
  return Scalar(kInvSqrt2Pi) * std::exp(Scalar(-0.5) * u * u);
}

/// Bandwidth-scaled kernel K_h(u) = K(u/h) / h.
///
/// An infinite bandwidth is the equal-weight sentinel: every observation
/// receives the same weight, so ratio estimators reduce to their marginal
/// (pooled) form. We return K(0) in that case; the constant cancels.
template <class Scalar>
Scalar scaled_kernel(Scalar u, Scalar h) {
  if (std::isinf(h)) return Scalar(kInvSqrt2Pi);
  return gaussian_kernel(u / h) / h;
}

enum class KernelFamily { gaussian };

struct KernelSpec {
  KernelFamily family = KernelFamily::gaussian;
  double bandwidth = 1.0;

  KernelSpec() = default;
  explicit KernelSpec(double h) : bandwidth(h) {
    if (!(h > 0.0)) throw ParameterError("kernel bandwidth must be positive");
  }
};

/// Bandwidth-scaled weight K_h(u). Symmetric in u, maximal at u = 0.
inline double kernel_weight(const KernelSpec& spec, double u) {
  if (!(spec.bandwidth > 0.0))
    throw ParameterError("kernel bandwidth must be positive");
  return scaled_kernel(u, spec.bandwidth);
}

}  // namespace condcov
