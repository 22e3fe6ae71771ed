#pragma once

#include <vector>

#include "condcov/common.hpp"
#include "condcov/mean.hpp"
#include "condcov/smoothing.hpp"

namespace condcov {

/// Symmetric matrix of positive bandwidths h_jk, one per covariance entry.
/// +inf entries select the equal-weight (marginal) estimator.
class BandwidthMatrix {
 public:
  BandwidthMatrix() = default;
  explicit BandwidthMatrix(Matrix H);
  static BandwidthMatrix global(Index p, double h);

  Index dims() const { return H_.rows(); }
  double operator()(Index j, Index k) const { return H_(j, k); }
  const Matrix& matrix() const { return H_; }
  void set(Index j, Index k, double h);

 private:
  Matrix H_;
};

enum class PsdPolicy { clip_eigen, jitter };

/// Projects a symmetric matrix onto the PSD cone. clip_eigen zeroes negative
/// eigenvalues (nearest PSD matrix in Frobenius norm); jitter shifts the
/// spectrum up to lambda_floor when the smallest eigenvalue falls below it.
/// Inputs already satisfying the policy are returned unchanged.
Matrix repair_psd(const Matrix& S, PsdPolicy policy, double lambda_floor = 0.0);

/// Squared Mahalanobis distance dev' * cov^{-1} * dev through a symmetric
/// eigendecomposition. When the condition number exceeds 1e12 (or the matrix
/// is not positive definite) a jitter of 1e-10 * trace / p is added first.
double squared_mahalanobis(const Vector& deviation, const Matrix& cov);

/// Kernel estimator of the conditional covariance matrix of the outputs
/// given the confounder. Fitting snapshots the residuals x_i - m(z_i); each
/// entry (j, k) is then a kernel-weighted average of residual products with
/// its own bandwidth h_jk.
class CondCovModel {
 public:
  CondCovModel() = default;

  static CondCovModel fit(const Matrix& X, const Vector& z, MeanModel mean,
                          BandwidthMatrix bandwidths);

  Index dims() const { return bandwidths_.dims(); }
  Interval validity() const { return validity_; }
  const MeanModel& mean() const { return mean_; }
  const BandwidthMatrix& bandwidths() const { return bandwidths_; }
  const Matrix& residuals() const { return residuals_; }
  const Vector& train_z() const { return train_z_; }

  void set_clamp_policy(ClampPolicy policy) { clamp_ = policy; }
  void set_psd_policy(PsdPolicy policy) { psd_ = policy; }
  PsdPolicy psd_policy() const { return psd_; }

  /// Raw per-entry estimate: symmetric, entry (j, k) smoothed with h_jk.
  /// Per-entry bandwidths can make it indefinite.
  Matrix eval_cov(double z) const;

  /// Raw estimate with the PSD policy applied when the smallest eigenvalue
  /// falls below -1e-10 * trace. This is what diagnostics and PCA consume.
  Matrix eval_repaired(double z) const;

  /// Correlation matrix rho_jk = sigma_jk / (sigma_j sigma_k), clipped to
  /// [-1, 1], unit diagonal.
  Matrix eval_corr(double z) const;

  /// Leave-one-out estimate at the training point i: the covariance at z_i
  /// with observation i's kernel weight zeroed (raw entries).
  Matrix loo_eval(Index i) const;

 private:
  double resolve(double z) const;
  Matrix assemble(const std::function<detail::SmoothedSums(
                      double h, const std::vector<Index>&)>& smoother) const;

  BandwidthMatrix bandwidths_;
  MeanModel mean_;
  Interval validity_;
  ClampPolicy clamp_ = ClampPolicy::clamp_warn;
  PsdPolicy psd_ = PsdPolicy::clip_eigen;

  Vector train_z_;
  Matrix residuals_;         // n x p snapshot fixed at fit time
  Matrix products_;          // n x p(p+1)/2 packed upper-triangle products
  detail::GroupedData grouped_;  // grouped packed products

  detail::WarnOnce clamp_warned_;
};

}  // namespace condcov
