#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condcov/common.hpp"
#include "condcov/smoothing.hpp"

namespace condcov {

enum class MeanKind { kernel, bilinear, constant };

std::string to_string(MeanKind kind);
MeanKind mean_kind_from_string(const std::string& name);

/// Conditional-mean model m(z) for a p-channel output vector.
///
/// Three kinds: a Nadaraya-Watson kernel regression with per-channel
/// bandwidths, a continuous bilinear (breakpoint) regression, and a
/// constant per-channel level. Models are immutable after fitting and
/// evaluation is pure.
class MeanModel {
 public:
  MeanModel() = default;

  static MeanModel fit_kernel(const Matrix& X, const Vector& z,
                              const Vector& bandwidths);
  static MeanModel fit_kernel(const Matrix& X, const Vector& z, double bandwidth);
  static MeanModel fit_bilinear(const Matrix& X, const Vector& z,
                                double breakpoint);
  static MeanModel fit_constant(const Matrix& X, const Vector& z);

  /// Fixed constant mean (not fitted from data), e.g. a known zero mean.
  static MeanModel constant_values(Vector values, Interval validity);

  /// Bilinear model rebuilt from stored coefficients (3 x p: level at the
  /// breakpoint, slope below, slope above). Not fitted from data, so
  /// leave-one-out values are unavailable.
  static MeanModel bilinear_from_coefficients(double breakpoint,
                                              Matrix coefficients,
                                              Interval validity);

  MeanKind kind() const { return kind_; }
  Index dims() const { return dims_; }
  Interval validity() const { return validity_; }
  void set_clamp_policy(ClampPolicy policy) { clamp_ = policy; }
  ClampPolicy clamp_policy() const { return clamp_; }

  const Vector& bandwidths() const { return bandwidths_; }  // kernel kind
  double breakpoint() const { return breakpoint_; }         // bilinear kind
  /// bilinear: 3 x p rows (level at breakpoint, slope below, slope above);
  /// constant: 1 x p.
  const Matrix& coefficients() const { return coefficients_; }

  Vector operator()(double z) const;
  double eval_channel(double z, Index channel) const;

  /// Leave-one-out fitted values at the training points: row i holds
  /// m_{-i}(z_i), the model evaluated with observation i excluded (kernel
  /// sums with its weight zeroed; exact downdate for parametric kinds).
  Matrix loo_fitted_values() const;

  bool fitted_from_data() const { return fitted_from_data_; }
  Index train_size() const { return train_z_.size(); }
  const Vector& train_z() const { return train_z_; }
  const Matrix& train_x() const { return train_x_; }

 private:
  double resolve(double z) const;  // clamp policy

  MeanKind kind_ = MeanKind::constant;
  Index dims_ = 0;
  Interval validity_;
  ClampPolicy clamp_ = ClampPolicy::clamp_warn;
  bool fitted_from_data_ = false;

  Vector bandwidths_;     // kernel: one per channel
  double breakpoint_ = 0.0;
  Matrix coefficients_;

  Vector train_z_;
  Matrix train_x_;
  detail::GroupedData grouped_;  // kernel kind
  Vector hat_diag_;              // bilinear kind

  detail::WarnOnce clamp_warned_;
};

/// How to build a mean model, for stages that refit on subsets (bandwidth
/// tuning, leave-one-out diagnostics).
struct MeanRecipe {
  MeanKind kind = MeanKind::kernel;
  double kernel_bandwidth = 1.0;
  Vector kernel_bandwidths;  // per channel; overrides the scalar when set
  double breakpoint = 2.0;
  std::optional<Vector> fixed_values;  // constant kind without fitting

  MeanModel fit(const Matrix& X, const Vector& z) const;
};

}  // namespace condcov
