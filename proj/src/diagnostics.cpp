#include "condcov/diagnostics.hpp"

#include <cmath>
#include <limits>

namespace condcov {

std::string to_string(Regime regime) {
  switch (regime) {
    case Regime::none: return "none";
    case Regime::mean_only: return "mean";
    case Regime::full: return "full";
  }
  return "full";
}

Regime regime_from_string(const std::string& name) {
  if (name == "none") return Regime::none;
  if (name == "mean" || name == "mean_only") return Regime::mean_only;
  if (name == "full") return Regime::full;
  throw ParameterError("unknown regime: " + name);
}

Detector fit_detector(const AlignedDataset& data, const DetectorOptions& options) {
  data.validate();
  const Index p = data.dims();
  constexpr double inf = std::numeric_limits<double>::infinity();

  Detector det;
  det.regime = options.regime;
  det.dof = p;
  det.threshold = chi2_quantile(p, options.quantile);

  switch (options.regime) {
    case Regime::none:
      det.mean = MeanModel::fit_constant(data.X, data.z);
      det.cov = CondCovModel::fit(data.X, data.z, det.mean,
                                  BandwidthMatrix::global(p, inf));
      break;
    case Regime::mean_only:
      det.mean = options.mean.fit(data.X, data.z);
      det.cov = CondCovModel::fit(data.X, data.z, det.mean,
                                  BandwidthMatrix::global(p, inf));
      break;
    case Regime::full: {
      if (options.cov_bandwidths.dims() != p)
        throw ShapeError("covariance bandwidths do not match channel count");
      det.mean = options.mean.fit(data.X, data.z);
      det.cov = CondCovModel::fit(data.X, data.z, det.mean,
                                  options.cov_bandwidths);
      break;
    }
  }
  return det;
}

double cmd(const Vector& x, double z, const MeanModel& mean,
           const CondCovModel& cov) {
  if (x.size() != mean.dims() || x.size() != cov.dims())
    throw ShapeError("observation does not match the fitted models");
  const Vector deviation = x - mean(z);
  return squared_mahalanobis(deviation, cov.eval_repaired(z));
}

double cmd(const Vector& x, double z, const Detector& detector) {
  return cmd(x, z, detector.mean, detector.cov);
}

DiagnosticSeries phase1_loo(const AlignedDataset& data,
                            const DetectorOptions& options) {
  const Detector det = fit_detector(data, options);
  const Index n = data.rows();

  DiagnosticSeries series;
  series.threshold = det.threshold;
  series.dof = det.dof;
  series.points.reserve(static_cast<size_t>(n));

  if (options.regime == Regime::none) {
    // Classical Hotelling leave-one-out via exact downdates of the
    // marginal mean and (centred, divide-by-count) covariance.
    const Vector sum_x = data.X.colwise().sum().transpose();
    const Matrix sum_xx = data.X.transpose() * data.X;
    for (Index i = 0; i < n; ++i) {
      const Vector xi = data.X.row(i).transpose();
      const Vector mean_i = (sum_x - xi) / static_cast<double>(n - 1);
      Matrix cov_i = (sum_xx - xi * xi.transpose()) / static_cast<double>(n - 1) -
                     mean_i * mean_i.transpose();
      cov_i = (cov_i + cov_i.transpose()) / 2.0;
      const double d2 = squared_mahalanobis(xi - mean_i, cov_i);
      series.points.push_back({data.timestamps[i], data.z[i], d2,
                               d2 > det.threshold, Phase::I});
    }
    return series;
  }

  const Matrix loo_mean = det.mean.fitted_from_data()
                              ? det.mean.loo_fitted_values()
                              : det.mean.coefficients().row(0).replicate(n, 1);
  for (Index i = 0; i < n; ++i) {
    const Vector deviation =
        data.X.row(i).transpose() - loo_mean.row(i).transpose();
    Matrix sigma = det.cov.loo_eval(i);
    Eigen::SelfAdjointEigenSolver<Matrix> probe(sigma, Eigen::EigenvaluesOnly);
    if (probe.eigenvalues().minCoeff() < -1e-10 * sigma.trace())
      sigma = repair_psd(sigma, det.cov.psd_policy());
    const double d2 = squared_mahalanobis(deviation, sigma);
    series.points.push_back({data.timestamps[i], data.z[i], d2,
                             d2 > det.threshold, Phase::I});
  }
  return series;
}

DiagnosticSeries monitor(const AlignedDataset& phase2, const Detector& frozen) {
  DiagnosticSeries series;
  series.threshold = frozen.threshold;
  series.dof = frozen.dof;
  if (phase2.rows() == 0) return series;
  if (phase2.dims() != frozen.cov.dims())
    throw ShapeError("phase II channel count does not match the frozen models");

  series.points.reserve(static_cast<size_t>(phase2.rows()));
  for (Index i = 0; i < phase2.rows(); ++i) {
    const double d2 =
        cmd(phase2.X.row(i).transpose(), phase2.z[i], frozen.mean, frozen.cov);
    series.points.push_back({phase2.timestamps[i], phase2.z[i], d2,
                             d2 > frozen.threshold, Phase::II});
  }
  return series;
}

AlarmReport alarm_report(const DiagnosticSeries& series, double z_split) {
  if (series.points.empty())
    throw ParameterError("alarm report needs a nonempty diagnostic series");
  AlarmReport report;
  report.z_split = z_split;
  for (const DiagnosticPoint& pt : series.points) {
    ++report.n;
    const bool below = pt.z < z_split;
    (below ? report.n_below : report.n_above) += 1;
    if (pt.alarm) {
      ++report.alarms;
      (below ? report.alarms_below : report.alarms_above) += 1;
    }
  }
  report.rate_overall = static_cast<double>(report.alarms) /
                        static_cast<double>(report.n);
  report.rate_below =
      report.n_below > 0 ? static_cast<double>(report.alarms_below) /
                               static_cast<double>(report.n_below)
                         : 0.0;
  report.rate_above =
      report.n_above > 0 ? static_cast<double>(report.alarms_above) /
                               static_cast<double>(report.n_above)
                         : 0.0;
  return report;
}

}  // namespace condcov
