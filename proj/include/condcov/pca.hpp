#pragma once

#include <vector>

#include "condcov/covariance.hpp"

namespace condcov {

/// Eigendecomposition of the conditional covariance at one confounder
/// value: eigenvalues descending, eigenvector columns orthonormal with the
/// largest-magnitude entry made positive.
struct CondEigenDecomp {
  double z = 0.0;
  Vector eigenvalues;
  Matrix components;  // column j = eigenvector of eigenvalue j
};

/// Decomposition of an explicitly given symmetric PSD matrix.
CondEigenDecomp eigen_decomp(const Matrix& sigma, double z);

/// Decomposition of the (repaired) conditional covariance at z.
CondEigenDecomp cond_eigen(const CondCovModel& cov, double z);

/// Standardized conditional component scores: for each row,
/// s_i = Lambda(z_i)^{-1/2} A(z_i)' (x_i - m(z_i)) with the decomposition
/// evaluated at that row's own confounder value. `components` selects a
/// subset (all p when empty).
Matrix cond_scores(const Matrix& X, const Vector& z, const MeanModel& mean,
                   const CondCovModel& cov,
                   const std::vector<Index>& components = {});

/// Inverse transform: x_i = m(z_i) + A(z_i) Lambda(z_i)^{1/2} s_i with the
/// scores of `removed` components zeroed. `scores` must hold all p columns.
Matrix reconstruct(const Matrix& scores, const Vector& z, const MeanModel& mean,
                   const CondCovModel& cov,
                   const std::vector<Index>& removed = {});

struct ScoreBinStats {
  double z_lo = 0.0, z_hi = 0.0;
  Index count = 0;
  Vector mean;
  Vector sd;
  Matrix corr;  // NaN where undefined (zero spread)
};

struct ScoreDiagnostics {
  std::vector<ScoreBinStats> bins;
  /// Per column: sup_x |empirical CDF - standard normal CDF|.
  Vector normality_gap;
};

/// Per-bin means, spreads, and pairwise correlations of score columns plus
/// a global normality comparison. Bins are equal-count in z; bins with
/// fewer than 30 rows are merged into their neighbour.
ScoreDiagnostics score_diagnostics(const Matrix& scores, const Vector& z,
                                   int bins);

}  // namespace condcov
