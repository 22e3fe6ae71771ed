#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "condcov/covariance.hpp"
#include "condcov/rng.hpp"
#include "test_helpers.hpp"

using namespace condcov;

namespace {

MeanModel zero_mean(Index p, Interval validity) {
  return MeanModel::constant_values(Vector::Zero(p), validity);
}

}  // namespace

TEST_SUITE("covariance") {

TEST_CASE("zero residuals give the zero matrix") {
  Matrix X = Matrix::Constant(6, 2, 4.0);
  Vector z = Vector::LinSpaced(6, 0.0, 5.0);
  const MeanModel mean = MeanModel::constant_values(
      Vector::Constant(2, 4.0), {0.0, 5.0});
  const CondCovModel cov =
      CondCovModel::fit(X, z, mean, BandwidthMatrix::global(2, 1.0));
  for (double at : {0.0, 2.5, 5.0})
    CHECK(cov.eval_cov(at).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unit residuals at one z value give unit variance") {
  Matrix X(2, 1);
  X << -1.0, 1.0;
  Vector z = Vector::Zero(2);
  const CondCovModel cov = CondCovModel::fit(
      X, z, zero_mean(1, {0.0, 0.0}), BandwidthMatrix::global(1, 0.3));
  CHECK(cov.eval_cov(0.0)(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("matches a brute-force evaluation of the estimator") {
  Rng rng(201);
  // fixed small case from the module contract
  {
    const Matrix X = testutil::random_matrix(rng, 5, 3);
    const Vector z = testutil::random_vector(rng, 5, 0.0, 1.0);
    const CondCovModel cov = CondCovModel::fit(
        X, z, zero_mean(3, {0.0, 1.0}), BandwidthMatrix::global(3, 0.7));
    const Matrix got = cov.eval_cov(0.3);
    for (Index j = 0; j < 3; ++j)
      for (Index k = 0; k < 3; ++k)
        CHECK(std::abs(got(j, k) - testutil::condcov_entry_oracle(
                                       X, z, j, k, 0.3, 0.7)) < 1e-12);
  }
  // randomized cases with a kernel mean in the residual path
  for (int trial = 0; trial < 10; ++trial) {
    const Index n = 6 + static_cast<Index>(rng.below(15));
    const Index p = 1 + static_cast<Index>(rng.below(4));
    const Matrix X = testutil::random_matrix(rng, n, p);
    const Vector z = testutil::random_vector(rng, n, -2.0, 2.0);
    const double hm = 0.4 + rng.uniform01();
    const double hc = 0.3 + rng.uniform01();
    const MeanModel mean = MeanModel::fit_kernel(X, z, hm);
    const CondCovModel cov =
        CondCovModel::fit(X, z, mean, BandwidthMatrix::global(p, hc));

    Matrix residuals(n, p);
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < p; ++k)
        residuals(i, k) =
            X(i, k) - testutil::nw_mean_oracle(X, z, k, z[i], hm);

    const double z0 =
        z.minCoeff() + (z.maxCoeff() - z.minCoeff()) * rng.uniform01();
    const Matrix got = cov.eval_cov(z0);
    for (Index j = 0; j < p; ++j)
      for (Index k = 0; k < p; ++k)
        CHECK(std::abs(got(j, k) - testutil::condcov_entry_oracle(
                                       residuals, z, j, k, z0, hc)) < 1e-12);
  }
}

TEST_CASE("equal-weight limit equals the marginal residual covariance") {
  Rng rng(202);
  const Index n = 40, p = 3;
  const Matrix X = testutil::random_matrix(rng, n, p);
  const Vector z = testutil::random_vector(rng, n, 0.0, 6.0);
  const MeanModel mean = zero_mean(p, {0.0, 6.0});
  const Matrix marginal = X.transpose() * X / static_cast<double>(n);

  SUBCASE("infinite sentinel") {
    const CondCovModel cov = CondCovModel::fit(
        X, z, mean,
        BandwidthMatrix::global(p, std::numeric_limits<double>::infinity()));
    for (double at : {0.0, 3.0, 6.0})
      CHECK((cov.eval_cov(at) - marginal).cwiseAbs().maxCoeff() <
            1e-12 * marginal.cwiseAbs().maxCoeff());
  }
  SUBCASE("h = 1e6 x range") {
    const CondCovModel cov = CondCovModel::fit(
        X, z, mean, BandwidthMatrix::global(p, 1e6 * 6.0));
    for (double at : {0.0, 3.0, 6.0})
      CHECK((cov.eval_cov(at) - marginal).cwiseAbs().maxCoeff() <
            1e-9 * marginal.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("duplicating every row leaves the estimate unchanged") {
  Rng rng(203);
  const Index n = 12, p = 2;
  const Matrix X = testutil::random_matrix(rng, n, p);
  const Vector z = testutil::random_vector(rng, n, 0.0, 3.0);
  Matrix X2(2 * n, p);
  Vector z2(2 * n);
  X2 << X, X;
  z2 << z, z;
  const CondCovModel a = CondCovModel::fit(X, z, zero_mean(p, {0.0, 3.0}),
                                           BandwidthMatrix::global(p, 0.8));
  const CondCovModel b = CondCovModel::fit(X2, z2, zero_mean(p, {0.0, 3.0}),
                                           BandwidthMatrix::global(p, 0.8));
  for (double at : {0.2, 1.5, 2.9})
    CHECK((a.eval_cov(at) - b.eval_cov(at)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("per-entry bandwidths are honoured entry-wise") {
  Rng rng(204);
  const Index n = 25, p = 3;
  const Matrix X = testutil::random_matrix(rng, n, p);
  const Vector z = testutil::random_vector(rng, n, -1.0, 1.0);
  Matrix H = Matrix::Constant(p, p, 0.5);
  H(0, 1) = H(1, 0) = 1.3;
  H(2, 2) = 2.0;
  const CondCovModel cov =
      CondCovModel::fit(X, z, zero_mean(p, {-1.0, 1.0}), BandwidthMatrix(H));
  const Matrix got = cov.eval_cov(0.1);
  for (Index j = 0; j < p; ++j)
    for (Index k = 0; k < p; ++k)
      CHECK(std::abs(got(j, k) - testutil::condcov_entry_oracle(
                                     X, z, j, k, 0.1, H(j, k))) < 1e-12);
}

TEST_CASE("evaluation is exactly symmetric") {
  Rng rng(205);
  const Matrix X = testutil::random_matrix(rng, 30, 4);
  const Vector z = testutil::random_vector(rng, 30, 0.0, 2.0);
  Matrix H = Matrix::Constant(4, 4, 0.6);
  H(1, 2) = H(2, 1) = 1.1;
  const CondCovModel cov =
      CondCovModel::fit(X, z, zero_mean(4, {0.0, 2.0}), BandwidthMatrix(H));
  for (double at : {0.1, 1.0, 1.9}) {
    const Matrix sigma = cov.eval_cov(at);
    CHECK((sigma - sigma.transpose()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("scaling a channel scales the covariance row and column") {
  Rng rng(206);
  const Index n = 30, p = 3;
  const Matrix X = testutil::random_matrix(rng, n, p);
  const Vector z = testutil::random_vector(rng, n, 0.0, 4.0);
  Matrix Xs = X;
  const double alpha = 2.75;
  Xs.col(1) *= alpha;
  const CondCovModel a = CondCovModel::fit(X, z, zero_mean(p, {0.0, 4.0}),
                                           BandwidthMatrix::global(p, 0.9));
  const CondCovModel b = CondCovModel::fit(Xs, z, zero_mean(p, {0.0, 4.0}),
                                           BandwidthMatrix::global(p, 0.9));
  const Matrix sa = a.eval_cov(1.7);
  const Matrix sb = b.eval_cov(1.7);
  for (Index j = 0; j < p; ++j)
    for (Index k = 0; k < p; ++k) {
      double scale = 1.0;
      if (j == 1) scale *= alpha;
      if (k == 1) scale *= alpha;
      CHECK(sb(j, k) == doctest::Approx(scale * sa(j, k)).epsilon(1e-12));
    }
  CHECK((a.eval_corr(1.7) - b.eval_corr(1.7)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("global bandwidth keeps the estimate PSD by construction") {
  Rng rng(207);
  const Index n = 60, p = 4;
  const Matrix X = testutil::random_matrix(rng, n, p);
  const Vector z = testutil::random_vector(rng, n, -2.0, 6.0);
  const MeanModel mean = MeanModel::fit_kernel(X, z, 1.0);
  const CondCovModel cov =
      CondCovModel::fit(X, z, mean, BandwidthMatrix::global(p, 0.7));
  for (double at = -2.0; at <= 6.0; at += 0.5) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov.eval_cov(at),
                                              Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("covariance is continuous in z (no jumps)") {
  Rng rng(208);
  const Matrix X = testutil::random_matrix(rng, 50, 2);
  const Vector z = testutil::random_vector(rng, 50, 0.0, 10.0);
  const CondCovModel cov = CondCovModel::fit(
      X, z, zero_mean(2, {0.0, 10.0}), BandwidthMatrix::global(2, 0.8));
  double slope = 0.0;
  for (double at = 0.5; at < 9.5; at += 0.01)
    slope = std::max(slope,
                     (cov.eval_cov(at + 0.01) - cov.eval_cov(at)).norm() / 0.01);
  CHECK(std::isfinite(slope));
  for (double at = 0.5; at < 9.5; at += 0.61)
    CHECK((cov.eval_cov(at + 1e-6) - cov.eval_cov(at)).norm() <=
          2.0 * slope * 1e-6 + 1e-12);
}

TEST_CASE("correlation conversion") {
  SUBCASE("identity covariance gives identity correlation") {
    Matrix X(4, 2);
    X << 1, 1, 1, -1, -1, 1, -1, -1;
    Vector z = Vector::Zero(4);
    const CondCovModel cov = CondCovModel::fit(
        X, z, zero_mean(2, {0.0, 0.0}),
        BandwidthMatrix::global(2, std::numeric_limits<double>::infinity()));
    CHECK((cov.eval_corr(0.0) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <
          1e-14);
  }
  SUBCASE("2x2 closed form") {
    // rows chosen so the pooled covariance is [[4, 2], [2, 4]]
    Matrix X(2, 2);
    X << std::sqrt(6.0), std::sqrt(6.0), std::sqrt(2.0), -std::sqrt(2.0);
    Vector z = Vector::Zero(2);
    const CondCovModel cov = CondCovModel::fit(
        X, z, zero_mean(2, {0.0, 0.0}),
        BandwidthMatrix::global(2, std::numeric_limits<double>::infinity()));
    const Matrix sigma = cov.eval_cov(0.0);
    CHECK(sigma(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
    CHECK(sigma(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(cov.eval_corr(0.0)(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("random case matches the direct formula and stays in range") {
    Rng rng(209);
    const Matrix X = testutil::random_matrix(rng, 50, 4);
    const Vector z = testutil::random_vector(rng, 50, 0.0, 1.0);
    const CondCovModel cov = CondCovModel::fit(
        X, z, zero_mean(4, {0.0, 1.0}), BandwidthMatrix::global(4, 0.5));
    const Matrix sigma = cov.eval_cov(0.4);
    const Matrix corr = cov.eval_corr(0.4);
    for (Index j = 0; j < 4; ++j) {
      CHECK(corr(j, j) == 1.0);
      for (Index k = 0; k < 4; ++k) {
        CHECK(std::abs(corr(j, k)) <= 1.0);
        if (j != k)
          CHECK(corr(j, k) ==
                doctest::Approx(sigma(j, k) /
                                std::sqrt(sigma(j, j) * sigma(k, k)))
                    .epsilon(1e-12));
      }
    }
  }
  SUBCASE("zero-variance channel is an error") {
    Matrix X(4, 2);
    X << 1, 0, -1, 0, 1, 0, -1, 0;
    Vector z = Vector::LinSpaced(4, 0.0, 3.0);
    const CondCovModel cov = CondCovModel::fit(
        X, z, zero_mean(2, {0.0, 3.0}), BandwidthMatrix::global(2, 1.0));
    CHECK_THROWS_AS(cov.eval_corr(1.0), DegenerateChannelError);
  }
}

TEST_CASE("psd repair") {
  SUBCASE("psd input is returned unchanged") {
    Rng rng(210);
    const Matrix S = testutil::random_psd(rng, 5);
    CHECK((repair_psd(S, PsdPolicy::clip_eigen) - S).norm() < 1e-12);
    CHECK((repair_psd(S, PsdPolicy::jitter) - S).norm() < 1e-12);
  }
  SUBCASE("clip zeroes a negative eigenvalue") {
    Matrix S(2, 2);
    S << 1.0, 0.0, 0.0, -0.1;
    const Matrix fixed = repair_psd(S, PsdPolicy::clip_eigen);
    CHECK(fixed(0, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(fixed(1, 1) == doctest::Approx(0.0).epsilon(1e-13));
    CHECK(std::abs(fixed(0, 1)) < 1e-13);
  }
  SUBCASE("clip is the nearest PSD matrix in Frobenius norm") {
    Rng rng(211);
    for (int trial = 0; trial < 5; ++trial) {
      Matrix S = testutil::random_matrix(rng, 6, 6);
      S = ((S + S.transpose()) / 2.0).eval();  // symmetric, indefinite
      const Matrix fixed = repair_psd(S, PsdPolicy::clip_eigen);

      Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
      const Matrix oracle = eig.eigenvectors() *
                            eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
                            eig.eigenvectors().transpose();
      CHECK((fixed - oracle).norm() < 1e-10);
      Eigen::SelfAdjointEigenSolver<Matrix> check(fixed, Eigen::EigenvaluesOnly);
      CHECK(check.eigenvalues().minCoeff() >= -1e-12);
    }
  }
  SUBCASE("jitter raises the spectrum to the floor") {
    Matrix S(2, 2);
    S << 1.0, 0.0, 0.0, -0.2;
    const Matrix fixed = repair_psd(S, PsdPolicy::jitter, 1e-6);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(fixed, Eigen::EigenvaluesOnly);
    CHECK(eig.eigenvalues().minCoeff() >= 1e-6 - 1e-12);
  }
  SUBCASE("asymmetric input is rejected") {
    Matrix S(2, 2);
    S << 1.0, 0.5, 0.2, 1.0;
    CHECK_THROWS_AS(repair_psd(S, PsdPolicy::clip_eigen), SymmetryError);
  }
}

TEST_CASE("sparse region raises an error") {
  Matrix X(4, 1);
  X << 1, -1, 1, -1;
  Vector z(4);
  z << 0.0, 0.0, 10.0, 10.0;
  const CondCovModel cov = CondCovModel::fit(
      X, z, zero_mean(1, {0.0, 10.0}), BandwidthMatrix::global(1, 0.01));
  CHECK_THROWS_AS(cov.eval_cov(5.0), SparseRegionError);
  CHECK(cov.eval_cov(0.0)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("leave-one-out evaluation matches the exclusion oracle") {
  Rng rng(212);
  const Index n = 15, p = 2;
  const Matrix X = testutil::random_matrix(rng, n, p);
  Vector z = testutil::random_vector(rng, n, 0.0, 2.0);
  z[3] = z[7];  // duplicate confounder values must be handled
  const CondCovModel cov = CondCovModel::fit(
      X, z, zero_mean(p, {0.0, 2.0}), BandwidthMatrix::global(p, 0.6));
  for (Index i = 0; i < n; ++i) {
    Matrix Xr(n - 1, p);
    Vector zr(n - 1);
    Index at = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      Xr.row(at) = X.row(j);
      zr[at] = z[j];
      ++at;
    }
    const Matrix got = cov.loo_eval(i);
    for (Index j = 0; j < p; ++j)
      for (Index k = 0; k < p; ++k)
        CHECK(std::abs(got(j, k) - testutil::condcov_entry_oracle(
                                       Xr, zr, j, k, z[i], 0.6)) < 1e-12);
  }
}

TEST_CASE("squared mahalanobis distance") {
  SUBCASE("identity covariance is the squared norm") {
    Vector dev(2);
    dev << 3.0, 4.0;
    CHECK(squared_mahalanobis(dev, Matrix::Identity(2, 2)) ==
          doctest::Approx(25.0).epsilon(1e-14));
  }
  SUBCASE("matches an explicit solve") {
    Rng rng(213);
    for (int trial = 0; trial < 10; ++trial) {
      const Index p = 2 + static_cast<Index>(rng.below(5));
      const Matrix S = testutil::random_psd(rng, p) +
                       0.05 * Matrix::Identity(p, p);
      const Vector dev = testutil::random_matrix(rng, p, 1).col(0);
      const double expected = dev.dot(S.ldlt().solve(dev));
      const double got = squared_mahalanobis(dev, S);
      CHECK(std::abs(got - expected) <= 1e-10 * std::abs(expected));
    }
  }
  SUBCASE("singular covariance beyond jitter is an error") {
    Vector dev(2);
    dev << 1.0, 1.0;
    CHECK_THROWS_AS(squared_mahalanobis(dev, Matrix::Zero(2, 2)),
                    SingularityError);
  }
}

TEST_CASE("dimension mismatch is rejected") {
  Rng rng(214);
  const Matrix X = testutil::random_matrix(rng, 10, 3);
  const Vector z = testutil::random_vector(rng, 10, 0.0, 1.0);
  CHECK_THROWS_AS(CondCovModel::fit(X, z, zero_mean(2, {0.0, 1.0}),
                                    BandwidthMatrix::global(3, 1.0)),
                  ShapeError);
  CHECK_THROWS_AS(CondCovModel::fit(X, z, zero_mean(3, {0.0, 1.0}),
                                    BandwidthMatrix::global(2, 1.0)),
                  ShapeError);
}

TEST_CASE("bandwidth matrix validation") {
  Matrix H(2, 2);
  H << 1.0, 0.5, 0.4, 1.0;
  CHECK_THROWS_AS(BandwidthMatrix{H}, SymmetryError);
  H << 1.0, -0.5, -0.5, 1.0;
  CHECK_THROWS_AS(BandwidthMatrix{H}, ParameterError);
}

}  // TEST_SUITE
