#pragma once

#include <optional>
#include <string>
#include <vector>

#include "condcov/bandwidth.hpp"
#include "condcov/dataset.hpp"

namespace condcov {

/// Logistic transition between two plateaus: `high` for z well below the
/// center, `low` well above it (steepness > 0).
struct LogisticCurve {
  double low = 0.0;
  double high = 1.0;
  double center = 0.0;
  double steepness = 1.0;

  double operator()(double z) const {
    return low + (high - low) / (1.0 + std::exp(steepness * (z - center)));
  }
};

enum class CorrKind { constant, linear, logistic };

/// One pair's correlation as a function of the confounder.
struct CorrFunc {
  CorrKind kind = CorrKind::constant;
  double c = 0.5;           // constant
  double c0 = 0.0, slope = 0.0;  // linear: c0 + slope * z
  LogisticCurve curve;      // logistic

  static CorrFunc constant(double value);
  static CorrFunc linear(double intercept, double slope);
  static CorrFunc logistic(double low, double high, double center,
                           double steepness);

  double operator()(double z) const;
};

/// Retention probability: pi_low at z_low, rising linearly to 1 at z_high,
/// 1 beyond. Applied to grid values in [z_low, z_high).
struct ThinningSchedule {
  double pi_low = 0.1;
  double z_low = -5.0;
  double z_high = 5.0;

  double operator()(double z) const {
    if (z >= z_high) return 1.0;
    if (z <= z_low) return pi_low;
    return pi_low + (1.0 - pi_low) * (z - z_low) / (z_high - z_low);
  }
};

/// Three-channel conditionally Gaussian generator: zero mean, one shared
/// variance curve, per-pair correlation functions, confounder values on an
/// equidistant grid with n replicates each and optional cold-side thinning.
struct ScenarioSpec {
  double z_min = -5.0;
  double z_max = 20.0;
  double z_step = 0.1;
  int replicates = 100;  // rows per retained grid value

  LogisticCurve variance{0.5, 1.5, 0.0, 1.0};  // sigma^2(z), shared by channels
  CorrFunc rho12, rho13, rho23;

  std::optional<ThinningSchedule> thinning = ThinningSchedule{};
  bool thin_rows = false;  // drop individual rows instead of grid values

  Index grid_size() const;
  double grid_z(Index g) const { return z_min + static_cast<double>(g) * z_step; }

  /// Checks PSD of the correlation matrix on the full grid plus parameter
  /// ranges; throws ParameterError on violation.
  void validate() const;
};

/// Named presets: "constant" (z-independent covariance), "linear",
/// "logistic", and "mixed" (one pair per family, as a combined study).
ScenarioSpec scenario_preset(const std::string& name, int replicates);

Matrix truth_corr(const ScenarioSpec& spec, double z);
Matrix truth_cov(const ScenarioSpec& spec, double z);

/// Draws one dataset. Deterministic: every grid value owns a generator
/// keyed by (seed, run, grid index), so results do not depend on iteration
/// or thread order.
AlignedDataset sample(const ScenarioSpec& spec, std::uint64_t seed,
                      std::uint64_t run = 0);

struct MonteCarloConfig {
  Vector curve_bandwidths;  // fit estimate curves at these h (inf allowed)
  Vector tune_grid;         // nonempty: tune covariance bandwidths per run
  TuneTarget tune_target = TuneTarget::cov_per_pair;
  SplitPlan plan;           // split used for tuning
  double eval_step = 0.5;   // evaluation grid resolution
};

struct MonteCarloRun {
  std::vector<Matrix> variances;     // per curve bandwidth: p x G
  std::vector<Matrix> correlations;  // per curve bandwidth: 3 x G (12, 13, 23)
  std::vector<LossCurve> loss_curves;
  BandwidthMatrix selected;          // tuned bandwidths (when tuning)
};

struct MonteCarloResult {
  Vector eval_z;
  Vector curve_bandwidths;
  std::vector<MonteCarloRun> runs;
  std::vector<Matrix> mean_variance, sd_variance;        // per h: p x G
  std::vector<Matrix> mean_correlation, sd_correlation;  // per h: 3 x G
};

/// Repeated sampling + estimation with the mean hard-wired to zero; per-run
/// curves on the evaluation grid, pointwise mean/spread across runs, and
/// per-run loss curves / tuned bandwidths when a tuning grid is configured.
MonteCarloResult monte_carlo(const ScenarioSpec& spec, int runs,
                             const MonteCarloConfig& config,
                             std::uint64_t seed);

}  // namespace condcov
