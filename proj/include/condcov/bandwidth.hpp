#pragma once

#include <string>
#include <vector>

#include "condcov/covariance.hpp"
#include "condcov/dataset.hpp"
#include "condcov/mean.hpp"

namespace condcov {

/// Validation loss over a candidate bandwidth grid for one tuned scalar.
struct LossCurve {
  std::string target;  // "mean_k", "cov_j_k" (1-based), or "cov_global"
  Vector candidates;   // ascending; +inf sentinel = marginal estimator
  Vector losses;
  Index argmin = -1;   // ties broken toward larger h; -1 until computed

  double selected() const { return candidates[argmin]; }
};

/// Q_mk(h): squared error of the kernel mean of channel k, fit on train with
/// bandwidth h, summed over the validation rows. Validation points outside
/// the train coverage are clamped by default; the error policy throws
/// instead.
double mean_loss(const AlignedDataset& train, const AlignedDataset& validation,
                 Index channel, double h,
                 ClampPolicy clamp = ClampPolicy::clamp_warn);

/// Q_sigma_jk(h): squared gap between validation residual products and the
/// conditional covariance entry fit on train with bandwidth h. Residuals on
/// both sides use the supplied mean model (fit on train beforehand).
double cov_loss(const AlignedDataset& train, const AlignedDataset& validation,
                Index j, Index k, double h, const MeanModel& mean,
                ClampPolicy clamp = ClampPolicy::clamp_warn);

/// Q_Sigma(h) computed in one pass over full matrices; equals the sum of
/// cov_loss over all ordered entry pairs.
double cov_loss_matrix(const AlignedDataset& train,
                       const AlignedDataset& validation, double h,
                       const MeanModel& mean);

enum class TuneTarget { mean_per_channel, cov_per_pair, cov_global };

struct TuneResult {
  std::vector<LossCurve> curves;
  Vector mean_bandwidths;         // mean_per_channel
  BandwidthMatrix cov_bandwidths; // cov targets
};

/// Grid search over candidate bandwidths with holdout or K-fold validation
/// per the split plan. Losses are averaged over folds; the selected h is the
/// argmin with ties broken toward the larger (smoother) candidate.
TuneResult tune(const AlignedDataset& data, const SplitPlan& plan,
                const Vector& grid, TuneTarget target,
                const MeanRecipe& mean_recipe, std::uint64_t seed);

}  // namespace condcov
