#pragma once

#include <string>
#include <vector>

#include "condcov/covariance.hpp"
#include "condcov/dataset.hpp"
#include "condcov/numeric.hpp"

namespace condcov {

/// Confounder-correction regime for the Mahalanobis diagnostic:
///   none      - marginal mean and marginal covariance
///   mean_only - conditional mean, marginal covariance of its residuals
///               (the partial covariance of the subtraction method)
///   full      - conditional mean and conditional covariance
enum class Regime { none, mean_only, full };

std::string to_string(Regime regime);
Regime regime_from_string(const std::string& name);

struct DetectorOptions {
  Regime regime = Regime::full;
  MeanRecipe mean;                 // used by mean_only and full
  BandwidthMatrix cov_bandwidths;  // used by full
  double quantile = 0.99;
};

/// Frozen models plus the chi-square alarm threshold.
struct Detector {
  Regime regime = Regime::full;
  MeanModel mean;
  CondCovModel cov;
  double threshold = 0.0;
  Index dof = 0;
};

Detector fit_detector(const AlignedDataset& data, const DetectorOptions& options);

/// Squared (conditional) Mahalanobis distance of x at confounder value z.
double cmd(const Vector& x, double z, const MeanModel& mean,
           const CondCovModel& cov);
double cmd(const Vector& x, double z, const Detector& detector);

enum class Phase { I, II };

struct DiagnosticPoint {
  double timestamp = 0.0;
  double z = 0.0;
  double d2 = 0.0;
  bool alarm = false;
  Phase phase = Phase::I;
};

struct DiagnosticSeries {
  std::vector<DiagnosticPoint> points;
  double threshold = 0.0;
  Index dof = 0;
};

/// Phase I calibration: the squared distance of every reference row with
/// that row excluded from the estimates (kernel weights zeroed; exact
/// downdates for marginal and parametric-mean quantities).
DiagnosticSeries phase1_loo(const AlignedDataset& data,
                            const DetectorOptions& options);

/// Phase II monitoring against frozen Phase I models; no refitting.
DiagnosticSeries monitor(const AlignedDataset& phase2, const Detector& frozen);

struct AlarmReport {
  double z_split = 0.0;
  Index n = 0, n_below = 0, n_above = 0;
  Index alarms = 0, alarms_below = 0, alarms_above = 0;
  double rate_overall = 0.0, rate_below = 0.0, rate_above = 0.0;
};

AlarmReport alarm_report(const DiagnosticSeries& series, double z_split);

}  // namespace condcov
