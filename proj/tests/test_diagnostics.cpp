#include <doctest.h>

#include <cmath>

#include "condcov/diagnostics.hpp"
#include "condcov/rng.hpp"
#include "condcov/simulate.hpp"
#include "test_helpers.hpp"

using namespace condcov;

namespace {

// p = 2 dataset whose pooled covariance is exactly the identity.
AlignedDataset identity_cov_dataset() {
  Matrix X(4, 2);
  X << 1, 1, 1, -1, -1, 1, -1, -1;
  return testutil::make_dataset(X, Vector::Zero(4));
}

DetectorOptions zero_mean_full(Index p, double h) {
  DetectorOptions opt;
  opt.regime = Regime::full;
  opt.mean.kind = MeanKind::constant;
  opt.mean.fixed_values = Vector::Zero(p);
  opt.cov_bandwidths = BandwidthMatrix::global(p, h);
  return opt;
}

AlignedDataset gaussian_dataset(Rng& rng, Index n, Index p) {
  return testutil::make_dataset(testutil::random_matrix(rng, n, p),
                                testutil::random_vector(rng, n, 0.0, 10.0));
}

}  // namespace

TEST_SUITE("diagnostics") {

TEST_CASE("cmd is zero at the conditional mean") {
  const auto data = identity_cov_dataset();
  const Detector det = fit_detector(
      data, zero_mean_full(2, std::numeric_limits<double>::infinity()));
  CHECK(cmd(Vector::Zero(2), 0.0, det) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("cmd with identity covariance is the squared norm") {
  const auto data = identity_cov_dataset();
  const Detector det = fit_detector(
      data, zero_mean_full(2, std::numeric_limits<double>::infinity()));
  Vector x(2);
  x << 3.0, 4.0;
  CHECK(cmd(x, 0.0, det) == doctest::Approx(25.0).epsilon(1e-12));
}

TEST_CASE("cmd matches a direct solve on random models") {
  Rng rng(401);
  const Index n = 40, p = 3;
  const auto data = gaussian_dataset(rng, n, p);
  const Detector det = fit_detector(data, zero_mean_full(p, 2.0));
  for (int trial = 0; trial < 10; ++trial) {
    const Vector x = testutil::random_matrix(rng, p, 1).col(0);
    const double z = 10.0 * rng.uniform01();
    const Matrix sigma = det.cov.eval_repaired(z);
    const Vector dev = x - det.mean(z);
    const double expected = dev.dot(sigma.ldlt().solve(dev));
    CHECK(std::abs(cmd(x, z, det) - expected) <= 1e-10 * std::abs(expected));
  }
}

TEST_CASE("chi-square quantiles") {
  CHECK(chi2_quantile(8, 0.99) == doctest::Approx(20.090235).epsilon(1e-6));
  CHECK(std::abs(chi2_quantile(8, 0.99) - 20.0) < 0.1);  // the rounded limit
  // one sigma in one dimension
  const double q1 = std::erf(1.0 / std::sqrt(2.0));
  CHECK(chi2_quantile(1, q1) == doctest::Approx(1.0).epsilon(1e-9));
  // chi2(2) quantile has the closed form -2 ln(1 - q)
  CHECK(chi2_quantile(2, 0.99) ==
        doctest::Approx(-2.0 * std::log(0.01)).epsilon(1e-9));
  CHECK_THROWS_AS(chi2_quantile(2, 0.0), ParameterError);
  CHECK_THROWS_AS(chi2_quantile(2, 1.0), ParameterError);
  CHECK_THROWS_AS(chi2_quantile(0, 0.5), ParameterError);
}

TEST_CASE("chi-square cdf/quantile round trip") {
  for (Index dof : {1, 3, 8})
    for (double q : {0.01, 0.5, 0.95, 0.999})
      CHECK(chi2_cdf(dof, chi2_quantile(dof, q)) ==
            doctest::Approx(q).epsilon(1e-9));
}

TEST_CASE("leave-one-out calibration on iid normal data") {
  Rng rng(402);
  const Index n = 5000, p = 2;
  AlignedDataset data = testutil::make_dataset(
      testutil::random_matrix(rng, n, p),
      testutil::random_vector(rng, n, 0.0, 1.0));
  DetectorOptions opt;
  opt.regime = Regime::none;
  opt.quantile = 0.99;
  const DiagnosticSeries series = phase1_loo(data, opt);
  Index alarms = 0;
  for (const auto& pt : series.points) alarms += pt.alarm ? 1 : 0;
  const double rate = static_cast<double>(alarms) / static_cast<double>(n);
  CHECK(rate >= 0.005);
  CHECK(rate <= 0.02);
}

TEST_CASE("duplicated rows give identical leave-one-out distances") {
  Rng rng(403);
  AlignedDataset data = gaussian_dataset(rng, 30, 2);
  data.X.row(12) = data.X.row(5);
  data.z[12] = data.z[5];
  for (Regime regime : {Regime::none, Regime::mean_only, Regime::full}) {
    DetectorOptions opt = zero_mean_full(2, 2.0);
    opt.regime = regime;
    const DiagnosticSeries series = phase1_loo(data, opt);
    CHECK(series.points[12].d2 == doctest::Approx(series.points[5].d2).epsilon(1e-12));
  }
}

TEST_CASE("full correction beats no correction in the cold region") {
  ScenarioSpec spec = scenario_preset("logistic", 20);
  const AlignedDataset data = sample(spec, 31, 0);

  DetectorOptions full = zero_mean_full(3, 1.0);
  DetectorOptions none = full;
  none.regime = Regime::none;

  auto cold_rate = [&](const DiagnosticSeries& series) {
    Index alarms = 0, count = 0;
    for (const auto& pt : series.points) {
      if (pt.z >= 2.0) continue;
      ++count;
      alarms += pt.alarm ? 1 : 0;
    }
    return static_cast<double>(alarms) / static_cast<double>(count);
  };
  const double rate_full = cold_rate(phase1_loo(data, full));
  const double rate_none = cold_rate(phase1_loo(data, none));
  CHECK(rate_full < rate_none);
}

TEST_CASE("exclusion that empties the neighbourhood is an error") {
  // two isolated duplicate pairs: leaving one member out still works, but a
  // lone far-away point cannot be evaluated without itself
  Matrix X(5, 1);
  X << 1.0, -1.0, 1.0, -1.0, 2.0;
  Vector z(5);
  z << 0.0, 0.0, 1.0, 1.0, 5000.0;
  const AlignedDataset data = testutil::make_dataset(X, z);
  DetectorOptions opt = zero_mean_full(1, 0.01);
  CHECK_THROWS_AS(phase1_loo(data, opt), SparseRegionError);
}

TEST_CASE("phase II scoring against frozen models") {
  Rng rng(404);
  const AlignedDataset phase1 = gaussian_dataset(rng, 3000, 2);
  DetectorOptions opt = zero_mean_full(2, std::numeric_limits<double>::infinity());
  opt.mean.fixed_values.reset();
  opt.mean.kind = MeanKind::constant;
  const Detector frozen = fit_detector(phase1, opt);

  SUBCASE("subset of phase I scores comparably") {
    std::vector<Index> idx;
    for (Index i = 0; i < 1500; ++i) idx.push_back(2 * i);
    const AlignedDataset phase2 = phase1.select_rows(idx);
    const DiagnosticSeries s1 = phase1_loo(phase1, opt);
    const DiagnosticSeries s2 = monitor(phase2, frozen);
    auto rate = [](const DiagnosticSeries& s) {
      Index alarms = 0;
      for (const auto& pt : s.points) alarms += pt.alarm ? 1 : 0;
      return static_cast<double>(alarms) / static_cast<double>(s.points.size());
    };
    CHECK(std::abs(rate(s1) - rate(s2)) <= 0.02);
    for (const auto& pt : s2.points) CHECK(pt.phase == Phase::II);
  }

  SUBCASE("a five-sigma mean shift alarms almost always") {
    AlignedDataset shifted = gaussian_dataset(rng, 1000, 2);
    shifted.X.col(0).array() += 5.0;
    const DiagnosticSeries series = monitor(shifted, frozen);
    Index alarms = 0;
    for (const auto& pt : series.points) alarms += pt.alarm ? 1 : 0;
    CHECK(static_cast<double>(alarms) / 1000.0 > 0.9);
  }

  SUBCASE("empty phase II gives an empty series") {
    AlignedDataset empty;
    empty.X.resize(0, 2);
    empty.z.resize(0);
    empty.timestamps.resize(0);
    const DiagnosticSeries series = monitor(empty, frozen);
    CHECK(series.points.empty());
    CHECK(series.threshold == frozen.threshold);
  }

  SUBCASE("channel mismatch is rejected") {
    Rng rng2(405);
    const AlignedDataset wrong = gaussian_dataset(rng2, 10, 3);
    CHECK_THROWS_AS(monitor(wrong, frozen), ShapeError);
  }
}

TEST_CASE("alarm report counting") {
  DiagnosticSeries series;
  series.threshold = 1.0;
  series.dof = 1;
  for (int i = 0; i < 10; ++i) {
    DiagnosticPoint pt;
    pt.z = -1.0;  // below the split
    pt.d2 = i < 2 ? 2.0 : 0.5;
    pt.alarm = pt.d2 > series.threshold;
    series.points.push_back(pt);
  }
  for (int i = 0; i < 5; ++i) {
    DiagnosticPoint pt;
    pt.z = 3.0;
    pt.d2 = 0.1;
    pt.alarm = false;
    series.points.push_back(pt);
  }
  const AlarmReport report = alarm_report(series, 2.0);
  CHECK(report.n == 15);
  CHECK(report.n_below == 10);
  CHECK(report.rate_below == doctest::Approx(0.2));
  CHECK(report.rate_above == doctest::Approx(0.0));
  CHECK(report.rate_overall == doctest::Approx(2.0 / 15.0));

  DiagnosticSeries empty;
  CHECK_THROWS_AS(alarm_report(empty, 0.0), ParameterError);

  DiagnosticSeries quiet = series;
  for (auto& pt : quiet.points) {
    pt.d2 = 0.0;
    pt.alarm = false;
  }
  const AlarmReport zero = alarm_report(quiet, 2.0);
  CHECK(zero.rate_overall == 0.0);
  CHECK(zero.rate_below == 0.0);
  CHECK(zero.rate_above == 0.0);
}

TEST_CASE("distances are invariant under channel rescaling") {
  Rng rng(406);
  const AlignedDataset data = gaussian_dataset(rng, 200, 3);
  Vector scale(3);
  scale << 3.0, 0.2, 11.0;
  AlignedDataset scaled = data;
  for (Index c = 0; c < 3; ++c) scaled.X.col(c) *= scale[c];

  for (Regime regime : {Regime::none, Regime::mean_only, Regime::full}) {
    DetectorOptions opt;
    opt.regime = regime;
    opt.mean.kind = MeanKind::kernel;
    opt.mean.kernel_bandwidth = 2.0;
    opt.cov_bandwidths = BandwidthMatrix::global(3, 2.0);
    const DiagnosticSeries a = phase1_loo(data, opt);
    const DiagnosticSeries b = phase1_loo(scaled, opt);
    for (size_t i = 0; i < a.points.size(); ++i)
      CHECK(a.points[i].d2 ==
            doctest::Approx(b.points[i].d2).epsilon(1e-9));
  }
}

TEST_CASE("distance grows strictly along a ray from the mean") {
  const auto data = identity_cov_dataset();
  const Detector det = fit_detector(
      data, zero_mean_full(2, std::numeric_limits<double>::infinity()));
  Vector v(2);
  v << 0.7, -0.3;
  double previous = 0.0;
  for (double t : {0.5, 1.0, 2.0, 4.0}) {
    const double d2 = cmd((t * v).eval(), 0.0, det);
    CHECK(d2 > previous);
    previous = d2;
  }
}

TEST_CASE("regime none reproduces the classical Hotelling statistic") {
  Rng rng(407);
  const Index n = 50, p = 3;
  const AlignedDataset data = gaussian_dataset(rng, n, p);
  DetectorOptions opt;
  opt.regime = Regime::none;
  const DiagnosticSeries series = phase1_loo(data, opt);

  for (Index i = 0; i < n; ++i) {
    Vector mean = Vector::Zero(p);
    for (Index j = 0; j < n; ++j)
      if (j != i) mean += data.X.row(j).transpose();
    mean /= static_cast<double>(n - 1);
    Matrix cov = Matrix::Zero(p, p);
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vector d = data.X.row(j).transpose() - mean;
      cov += d * d.transpose();
    }
    cov /= static_cast<double>(n - 1);
    const Vector dev = data.X.row(i).transpose() - mean;
    const double expected = dev.dot(cov.ldlt().solve(dev));
    CHECK(series.points[i].d2 ==
          doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("mean_only regime uses the partial covariance of residuals") {
  Rng rng(408);
  const Index n = 60, p = 2;
  AlignedDataset data = gaussian_dataset(rng, n, p);
  // inject a linear trend in z so the bilinear mean matters
  for (Index i = 0; i < n; ++i) data.X(i, 0) += 0.5 * data.z[i];

  DetectorOptions opt;
  opt.regime = Regime::mean_only;
  opt.mean.kind = MeanKind::bilinear;
  opt.mean.breakpoint = 5.0;
  const Detector det = fit_detector(data, opt);

  // partial covariance: divide-by-n second moment of the mean residuals
  Matrix residuals(n, p);
  for (Index i = 0; i < n; ++i)
    residuals.row(i) = data.X.row(i) - det.mean(data.z[i]).transpose();
  const Matrix partial =
      residuals.transpose() * residuals / static_cast<double>(n);
  CHECK((det.cov.eval_cov(3.0) - partial).cwiseAbs().maxCoeff() < 1e-10);
}

}  // TEST_SUITE
