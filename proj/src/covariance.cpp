#include "condcov/covariance.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace condcov {

BandwidthMatrix::BandwidthMatrix(Matrix H) : H_(std::move(H)) {
  if (H_.rows() != H_.cols()) throw ShapeError("bandwidth matrix must be square");
  for (Index j = 0; j < H_.rows(); ++j)
    for (Index k = 0; k < H_.cols(); ++k) {
      if (!(H_(j, k) > 0.0))
        throw ParameterError("bandwidths must be positive");
      if (H_(j, k) != H_(k, j))
        throw SymmetryError("bandwidth matrix must be symmetric");
    }
}

BandwidthMatrix BandwidthMatrix::global(Index p, double h) {
  if (!(h > 0.0)) throw ParameterError("bandwidths must be positive");
  BandwidthMatrix b;
  b.H_ = Matrix::Constant(p, p, h);
  return b;
}

void BandwidthMatrix::set(Index j, Index k, double h) {
  if (!(h > 0.0)) throw ParameterError("bandwidths must be positive");
  H_(j, k) = h;
  H_(k, j) = h;
}

Matrix repair_psd(const Matrix& S, PsdPolicy policy, double lambda_floor) {
  if (S.rows() != S.cols()) throw ShapeError("repair_psd needs a square matrix");
  const double asym = (S - S.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-10)
    throw SymmetryError("matrix is not symmetric (max asymmetry " +
                        std::to_string(asym) + ")");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(S);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in repair_psd");
  const double lambda_min = eig.eigenvalues().minCoeff();

  if (policy == PsdPolicy::clip_eigen) {
    if (lambda_min >= 0.0) return S;
    const Vector clipped = eig.eigenvalues().cwiseMax(0.0);
    Matrix out = eig.eigenvectors() * clipped.asDiagonal() *
                 eig.eigenvectors().transpose();
    return (out + out.transpose()) / 2.0;
  }
  if (lambda_min >= lambda_floor) return S;
  return S + (lambda_floor - lambda_min) * Matrix::Identity(S.rows(), S.cols());
}

double squared_mahalanobis(const Vector& deviation, const Matrix& cov) {
  if (cov.rows() != deviation.size() || cov.cols() != deviation.size())
    throw ShapeError("covariance does not match the deviation vector");

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed in squared_mahalanobis");

  Vector lambda = eig.eigenvalues();
  const double lambda_max = lambda.maxCoeff();
  if (!(lambda_max > 0.0))
    throw SingularityError("covariance has no positive eigenvalue");
  const double lambda_min = lambda.minCoeff();
  if (lambda_min <= 0.0 || lambda_max / lambda_min > 1e12) {
    const double jitter = 1e-10 * cov.trace() / static_cast<double>(cov.rows());
    lambda.array() += jitter;
    if (!(lambda.minCoeff() > 0.0))
      throw SingularityError("covariance singular beyond jitter capability");
  }
  const Vector rotated = eig.eigenvectors().transpose() * deviation;
  return (rotated.array().square() / lambda.array()).sum();
}

CondCovModel CondCovModel::fit(const Matrix& X, const Vector& z, MeanModel mean,
                               BandwidthMatrix bandwidths) {
  if (X.rows() != z.size()) throw ShapeError("X rows and z length differ");
  if (X.rows() < 2) throw ShapeError("covariance fit needs at least two rows");
  if (mean.dims() != X.cols())
    throw ShapeError("mean model channel count does not match X");
  if (bandwidths.dims() != X.cols())
    throw ShapeError("bandwidth matrix does not match channel count");

  const Index n = X.rows();
  const Index p = X.cols();

  CondCovModel m;
  m.bandwidths_ = std::move(bandwidths);
  m.validity_ = {z.minCoeff(), z.maxCoeff()};
  m.train_z_ = z;

  m.residuals_.resize(n, p);
  for (Index i = 0; i < n; ++i)
    m.residuals_.row(i) = X.row(i) - mean(z[i]).transpose();
  m.mean_ = std::move(mean);

  m.products_.resize(n, p * (p + 1) / 2);
  for (Index i = 0; i < n; ++i) {
    Index c = 0;
    for (Index j = 0; j < p; ++j)
      for (Index k = j; k < p; ++k)
        m.products_(i, c++) = m.residuals_(i, j) * m.residuals_(i, k);
  }
  m.grouped_ = detail::group_by_z(z, m.products_);
  return m;
}

double CondCovModel::resolve(double z) const {
  if (validity_.contains(z)) return z;
  if (clamp_ == ClampPolicy::error)
    throw ExtrapolationError("z = " + std::to_string(z) +
                             " outside validity interval [" +
                             std::to_string(validity_.lo) + ", " +
                             std::to_string(validity_.hi) + "]");
  if (clamp_warned_.arm())
    warn("covariance model: clamping z = " + std::to_string(z) +
         " to the validity interval");
  return validity_.clamp(z);
}

namespace {

inline Index packed_index(Index p, Index j, Index k) {
  // upper triangle, row-major: (j, k) with j <= k
  return j * p - j * (j - 1) / 2 + (k - j);
}

}  // namespace

Matrix CondCovModel::assemble(
    const std::function<detail::SmoothedSums(double h, const std::vector<Index>&)>&
        smoother) const {
  const Index p = dims();
  Matrix out(p, p);
  std::vector<bool> done(static_cast<size_t>(p * (p + 1) / 2), false);
  for (Index j = 0; j < p; ++j) {
    for (Index k = j; k < p; ++k) {
      const Index c = packed_index(p, j, k);
      if (done[static_cast<size_t>(c)]) continue;
      const double h = bandwidths_(j, k);
      std::vector<Index> cols;
      std::vector<std::pair<Index, Index>> entries;
      for (Index j2 = j; j2 < p; ++j2)
        for (Index k2 = j2; k2 < p; ++k2) {
          const Index c2 = packed_index(p, j2, k2);
          if (!done[static_cast<size_t>(c2)] && bandwidths_(j2, k2) == h) {
            cols.push_back(c2);
            entries.emplace_back(j2, k2);
          }
        }
      const auto sums = smoother(h, cols);
      for (size_t e = 0; e < entries.size(); ++e) {
        const double value = sums.numerators[static_cast<Index>(e)] / sums.weight;
        out(entries[e].first, entries[e].second) = value;
        out(entries[e].second, entries[e].first) = value;
        done[static_cast<size_t>(cols[e])] = true;
      }
    }
  }
  return out;
}

Matrix CondCovModel::eval_cov(double z) const {
  const double zc = resolve(z);
  return assemble([&](double h, const std::vector<Index>& cols) {
    return detail::smoothed_sums(grouped_, zc, h, cols);
  });
}

Matrix CondCovModel::eval_repaired(double z) const {
  const Matrix raw = eval_cov(z);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(raw, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() >= -1e-10 * raw.trace()) return raw;
  return repair_psd(raw, psd_);
}

Matrix CondCovModel::eval_corr(double z) const {
  const Matrix cov = eval_cov(z);
  const Index p = cov.rows();
  Vector sd(p);
  for (Index j = 0; j < p; ++j) {
    if (!(cov(j, j) > 0.0))
      throw DegenerateChannelError("zero conditional variance on channel " +
                                   std::to_string(j + 1) + " at z = " +
                                   std::to_string(z));
    sd[j] = std::sqrt(cov(j, j));
  }
  Matrix corr(p, p);
  for (Index j = 0; j < p; ++j) {
    corr(j, j) = 1.0;
    for (Index k = j + 1; k < p; ++k) {
      double r = cov(j, k) / (sd[j] * sd[k]);
      r = std::min(1.0, std::max(-1.0, r));
      corr(j, k) = r;
      corr(k, j) = r;
    }
  }
  return corr;
}

Matrix CondCovModel::loo_eval(Index i) const {
  if (i < 0 || i >= train_z_.size())
    throw ShapeError("leave-one-out index out of range");
  const double zi = train_z_[i];
  return assemble([&](double h, const std::vector<Index>& cols) {
    Vector own(static_cast<Index>(cols.size()));
    for (size_t c = 0; c < cols.size(); ++c)
      own[static_cast<Index>(c)] = products_(i, cols[c]);
    return detail::smoothed_sums_excluding(grouped_, zi, h, cols, zi, own);
  });
}

}  // namespace condcov
