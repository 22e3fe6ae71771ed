#include <doctest.h>

#include <Eigen/QR>

#include <cmath>
#include <numeric>

#include "condcov/mean.hpp"
#include "condcov/rng.hpp"
#include "test_helpers.hpp"

using namespace condcov;
using testutil::WarningCapture;

TEST_SUITE("mean") {

TEST_CASE("constant kind is the sample mean") {
  Matrix X(2, 1);
  X << 1.0, 3.0;
  Vector z(2);
  z << 0.0, 1.0;
  const MeanModel m = MeanModel::fit_constant(X, z);
  for (double at : {0.0, 0.5, 1.0})
    CHECK(m(at)[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("kernel mean matches the direct formula") {
  Matrix X(2, 1);
  X << 1.0, 3.0;
  Vector z(2);
  z << 0.0, 1.0;
  const MeanModel m = MeanModel::fit_kernel(X, z, 0.5);
  const double expected = testutil::nw_mean_oracle(X, z, 0, 0.0, 0.5);
  CHECK(m(0.0)[0] == doctest::Approx(expected).epsilon(1e-14));
  CHECK(m(0.0)[0] == doctest::Approx(1.23841).epsilon(1e-5));
}

TEST_CASE("kernel mean equals the oracle on random data") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 5 + static_cast<Index>(rng.below(20));
    const Index p = 1 + static_cast<Index>(rng.below(3));
    const Matrix X = testutil::random_matrix(rng, n, p);
    const Vector z = testutil::random_vector(rng, n, -1.0, 4.0);
    const double h = 0.2 + 2.0 * rng.uniform01();
    const MeanModel m = MeanModel::fit_kernel(X, z, h);
    // stay inside the validity interval so no clamping is involved
    const double z0 =
        z.minCoeff() + (z.maxCoeff() - z.minCoeff()) * rng.uniform01();
    const Vector got = m(z0);
    for (Index k = 0; k < p; ++k)
      CHECK(std::abs(got[k] - testutil::nw_mean_oracle(X, z, k, z0, h)) < 1e-12);
  }
}

TEST_CASE("huge bandwidth reaches the per-channel sample mean") {
  Rng rng(103);
  const Matrix X = testutil::random_matrix(rng, 30, 2);
  const Vector z = testutil::random_vector(rng, 30, 0.0, 5.0);
  const MeanModel m = MeanModel::fit_kernel(X, z, 1e9);
  const Vector mean = X.colwise().mean().transpose();
  const Vector got = m(2.0);
  for (Index k = 0; k < 2; ++k)
    CHECK(std::abs(got[k] - mean[k]) < 1e-9 * std::abs(mean[k]) + 1e-12);
}

TEST_CASE("marginal limit at h = 1e6 x z-range") {
  Rng rng(104);
  const Matrix X = testutil::random_matrix(rng, 40, 3);
  const Vector z = testutil::random_vector(rng, 40, -3.0, 9.0);
  const double h = 1e6 * (z.maxCoeff() - z.minCoeff());
  const MeanModel m = MeanModel::fit_kernel(X, z, h);
  const Vector mean = X.colwise().mean().transpose();
  for (double at : {-3.0, 0.0, 4.5, 9.0}) {
    const Vector got = m(at);
    for (Index k = 0; k < 3; ++k)
      CHECK(std::abs(got[k] - mean[k]) <= 1e-6 * std::abs(mean[k]) + 1e-12);
  }
}

TEST_CASE("repeated constant value is reproduced everywhere") {
  Matrix X = Matrix::Constant(10, 2, 7.5);
  Vector z = Vector::LinSpaced(10, 0.0, 9.0);
  const MeanModel m = MeanModel::fit_kernel(X, z, 0.8);
  for (double at : {0.0, 3.3, 9.0}) {
    CHECK(m(at)[0] == doctest::Approx(7.5).epsilon(1e-13));
    CHECK(m(at)[1] == doctest::Approx(7.5).epsilon(1e-13));
  }
}

TEST_CASE("all equal confounder values give the arithmetic mean") {
  Rng rng(105);
  Matrix X = testutil::random_matrix(rng, 12, 1);
  Vector z = Vector::Constant(12, 3.0);
  const MeanModel m = MeanModel::fit_kernel(X, z, 0.4);
  CHECK(m(3.0)[0] == doctest::Approx(X.col(0).mean()).epsilon(1e-13));
}

TEST_CASE("kernel mean is permutation invariant") {
  Rng rng(106);
  Matrix X = testutil::random_matrix(rng, 25, 2);
  Vector z = testutil::random_vector(rng, 25, 0.0, 2.0);
  const MeanModel a = MeanModel::fit_kernel(X, z, 0.6);

  std::vector<Index> perm(25);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (size_t i = perm.size(); i > 1; --i)
    std::swap(perm[i - 1], perm[rng.below(i)]);
  Matrix Xp(25, 2);
  Vector zp(25);
  for (Index i = 0; i < 25; ++i) {
    Xp.row(i) = X.row(perm[static_cast<size_t>(i)]);
    zp[i] = z[perm[static_cast<size_t>(i)]];
  }
  const MeanModel b = MeanModel::fit_kernel(Xp, zp, 0.6);
  for (double at : {0.0, 0.7, 1.9})
    CHECK((a(at) - b(at)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("kernel mean is continuous (finite-difference scan)") {
  Rng rng(107);
  Matrix X = testutil::random_matrix(rng, 50, 1);
  Vector z = testutil::random_vector(rng, 50, 0.0, 10.0);
  const MeanModel m = MeanModel::fit_kernel(X, z, 0.5);

  double lipschitz = 0.0;
  const double coarse = 1e-4;
  for (double at = 0.5; at < 9.5; at += 0.05)
    lipschitz = std::max(
        lipschitz, std::abs(m(at + coarse)[0] - m(at)[0]) / coarse);
  for (double at = 0.5; at < 9.5; at += 0.37) {
    const double step = std::abs(m(at + 1e-6)[0] - m(at)[0]);
    CHECK(step <= 2.0 * lipschitz * 1e-6 + 1e-12);
  }
}

TEST_CASE("bilinear fit recovers an exact kink") {
  const double z0 = 2.0;
  Matrix coeff(3, 2);
  coeff << 1.5, -0.2,   // level
           0.4, 1.1,    // slope below
          -0.3, 0.6;    // slope above
  const Index n = 60;
  Vector z = Vector::LinSpaced(n, -3.0, 7.0);
  Matrix X(n, 2);
  for (Index i = 0; i < n; ++i) {
    const double u = z[i] - z0;
    for (Index k = 0; k < 2; ++k)
      X(i, k) = coeff(0, k) + std::min(u, 0.0) * coeff(1, k) +
                std::max(u, 0.0) * coeff(2, k);
  }
  const MeanModel m = MeanModel::fit_bilinear(X, z, z0);
  CHECK((m.coefficients() - coeff).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("bilinear model is continuous at the breakpoint") {
  Rng rng(108);
  const Index n = 80;
  Vector z = testutil::random_vector(rng, n, -5.0, 8.0);
  Matrix X = testutil::random_matrix(rng, n, 2);
  for (Index i = 0; i < n; ++i) X(i, 0) += 0.5 * z[i] - 0.1 * std::abs(z[i] - 2.0);
  const MeanModel m = MeanModel::fit_bilinear(X, z, 2.0);
  const Vector left = m(2.0 - 1e-9);
  const Vector right = m(2.0 + 1e-9);
  CHECK((left - right).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("one-sided data degrades to a linear fit with a warning") {
  Vector z = Vector::LinSpaced(20, 3.0, 8.0);  // entirely above breakpoint 2
  Matrix X(20, 1);
  for (Index i = 0; i < 20; ++i) X(i, 0) = 1.0 + 0.5 * z[i];
  WarningCapture warnings;
  const MeanModel m = MeanModel::fit_bilinear(X, z, 2.0);
  REQUIRE(!warnings.messages.empty());
  CHECK(warnings.messages.front().find("linear") != std::string::npos);
  CHECK(m(4.0)[0] == doctest::Approx(3.0).epsilon(1e-9));
  // both slopes equal in the degraded fit
  CHECK(m.coefficients()(1, 0) == doctest::Approx(m.coefficients()(2, 0)));
}

TEST_CASE("rank-deficient bilinear design is an error") {
  Matrix X(2, 1);
  X << 1.0, 2.0;
  Vector z(2);
  z << 1.0, 3.0;  // one point per side: 3 coefficients, rank 2
  CHECK_THROWS_AS(MeanModel::fit_bilinear(X, z, 2.0), FitError);
}

TEST_CASE("clamping policy outside the validity interval") {
  Matrix X(5, 1);
  X << 1, 2, 3, 4, 5;
  Vector z = Vector::LinSpaced(5, 0.0, 4.0);
  MeanModel m = MeanModel::fit_kernel(X, z, 0.5);

  WarningCapture warnings;
  const double clamped = m(10.0)[0];
  CHECK(clamped == doctest::Approx(m(4.0)[0]).epsilon(1e-13));
  CHECK(!warnings.messages.empty());

  m.set_clamp_policy(ClampPolicy::error);
  CHECK_THROWS_AS(m(10.0), ExtrapolationError);
}

TEST_CASE("leave-one-out fitted values match refit oracles") {
  Rng rng(109);
  const Index n = 18;
  const Vector z = testutil::random_vector(rng, n, -1.0, 5.0);
  const Matrix X = testutil::random_matrix(rng, n, 2);

  SUBCASE("kernel") {
    const MeanModel m = MeanModel::fit_kernel(X, z, 0.9);
    const Matrix loo = m.loo_fitted_values();
    for (Index i = 0; i < n; ++i) {
      Matrix Xr(n - 1, 2);
      Vector zr(n - 1);
      Index at = 0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        Xr.row(at) = X.row(j);
        zr[at] = z[j];
        ++at;
      }
      for (Index k = 0; k < 2; ++k)
        CHECK(std::abs(loo(i, k) -
                       testutil::nw_mean_oracle(Xr, zr, k, z[i], 0.9)) < 1e-11);
    }
  }

  SUBCASE("constant") {
    const MeanModel m = MeanModel::fit_constant(X, z);
    const Matrix loo = m.loo_fitted_values();
    for (Index i = 0; i < n; ++i)
      for (Index k = 0; k < 2; ++k) {
        const double others =
            (X.col(k).sum() - X(i, k)) / static_cast<double>(n - 1);
        CHECK(loo(i, k) == doctest::Approx(others).epsilon(1e-12));
      }
  }

  SUBCASE("bilinear") {
    const MeanModel m = MeanModel::fit_bilinear(X, z, 2.0);
    const Matrix loo = m.loo_fitted_values();
    for (Index i = 0; i < n; ++i) {
      Matrix design(n - 1, 3);
      Matrix y(n - 1, 2);
      Index at = 0;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double u = z[j] - 2.0;
        design(at, 0) = 1.0;
        design(at, 1) = std::min(u, 0.0);
        design(at, 2) = std::max(u, 0.0);
        y.row(at) = X.row(j);
        ++at;
      }
      const Matrix beta = design.colPivHouseholderQr().solve(y);
      const double u = z[i] - 2.0;
      Eigen::RowVector3d row(1.0, std::min(u, 0.0), std::max(u, 0.0));
      const Eigen::RowVectorXd pred = row * beta;
      for (Index k = 0; k < 2; ++k)
        CHECK(std::abs(loo(i, k) - pred[k]) < 1e-9);
    }
  }
}

TEST_CASE("recipe with fixed values ignores the data") {
  MeanRecipe recipe;
  recipe.fixed_values = Vector::Zero(3);
  Rng rng(110);
  const Matrix X = testutil::random_matrix(rng, 10, 3);
  const Vector z = testutil::random_vector(rng, 10, 0.0, 1.0);
  const MeanModel m = recipe.fit(X, z);
  CHECK(m(0.5).cwiseAbs().maxCoeff() == 0.0);
  CHECK_FALSE(m.fitted_from_data());
}

}  // TEST_SUITE
