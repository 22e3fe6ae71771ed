#include "condcov/mean.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace condcov {

std::string to_string(MeanKind kind) {
  switch (kind) {
    case MeanKind::kernel: return "kernel";
    case MeanKind::bilinear: return "bilinear";
    case MeanKind::constant: return "constant";
  }
  return "constant";
}

MeanKind mean_kind_from_string(const std::string& name) {
  if (name == "kernel") return MeanKind::kernel;
  if (name == "bilinear") return MeanKind::bilinear;
  if (name == "constant") return MeanKind::constant;
  throw ParameterError("unknown mean kind: " + name);
}

namespace {

void check_training_input(const Matrix& X, const Vector& z) {
  if (X.rows() != z.size()) throw ShapeError("X rows and z length differ");
  if (X.rows() < 2) throw ShapeError("mean fit needs at least two rows");
  if (X.cols() < 1) throw ShapeError("mean fit needs at least one channel");
}

}  // namespace

MeanModel MeanModel::fit_kernel(const Matrix& X, const Vector& z,
                                const Vector& bandwidths) {
  check_training_input(X, z);
  if (bandwidths.size() != X.cols())
    throw ShapeError("need one bandwidth per channel");
  for (Index k = 0; k < bandwidths.size(); ++k)
    if (!(bandwidths[k] > 0.0))
      throw ParameterError("kernel bandwidth must be positive");

  MeanModel m;
  m.kind_ = MeanKind::kernel;
  m.dims_ = X.cols();
  m.validity_ = {z.minCoeff(), z.maxCoeff()};
  m.fitted_from_data_ = true;
  m.bandwidths_ = bandwidths;
  m.train_z_ = z;
  m.train_x_ = X;
  m.grouped_ = detail::group_by_z(z, X);
  return m;
}

MeanModel MeanModel::fit_kernel(const Matrix& X, const Vector& z,
                                double bandwidth) {
  return fit_kernel(X, z, Vector::Constant(X.cols(), bandwidth));
}

MeanModel MeanModel::fit_bilinear(const Matrix& X, const Vector& z,
                                  double breakpoint) {
  check_training_input(X, z);
  const Index n = z.size();
  const Index p = X.cols();

  const bool below = (z.array() < breakpoint).any();
  const bool above = (z.array() > breakpoint).any();

  // Hinge design keeps the fit continuous at the breakpoint: value there is
  // the shared level coefficient.
  Index cols = 3;
  if (!below || !above) {
    warn("bilinear fit: all data on one side of the breakpoint " +
         std::to_string(breakpoint) + "; degrading to a linear fit");
    cols = 2;
  }
  Matrix design(n, cols);
  for (Index i = 0; i < n; ++i) {
    const double u = z[i] - breakpoint;
    design(i, 0) = 1.0;
    if (cols == 3) {
      design(i, 1) = std::min(u, 0.0);
      design(i, 2) = std::max(u, 0.0);
    } else {
      design(i, 1) = u;
    }
  }

  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < cols)
    throw FitError("bilinear design is rank-deficient (channel 1): need "
                   "distinct z values on both sides of the breakpoint");

  MeanModel m;
  m.kind_ = MeanKind::bilinear;
  m.dims_ = p;
  m.validity_ = {z.minCoeff(), z.maxCoeff()};
  m.fitted_from_data_ = true;
  m.breakpoint_ = breakpoint;
  m.train_z_ = z;
  m.train_x_ = X;

  Matrix beta = qr.solve(X);  // cols x p
  m.coefficients_ = Matrix::Zero(3, p);
  m.coefficients_.row(0) = beta.row(0);
  if (cols == 3) {
    m.coefficients_.row(1) = beta.row(1);
    m.coefficients_.row(2) = beta.row(2);
  } else {
    m.coefficients_.row(1) = beta.row(1);
    m.coefficients_.row(2) = beta.row(1);
  }

  // Hat diagonal for exact leave-one-out predictions.
  const Matrix gram_inv =
      (design.transpose() * design).ldlt().solve(Matrix::Identity(cols, cols));
  m.hat_diag_.resize(n);
  for (Index i = 0; i < n; ++i)
    m.hat_diag_[i] = design.row(i) * gram_inv * design.row(i).transpose();
  return m;
}

MeanModel MeanModel::fit_constant(const Matrix& X, const Vector& z) {
  check_training_input(X, z);
  MeanModel m;
  m.kind_ = MeanKind::constant;
  m.dims_ = X.cols();
  m.validity_ = {z.minCoeff(), z.maxCoeff()};
  m.fitted_from_data_ = true;
  m.coefficients_ = X.colwise().mean();
  m.train_z_ = z;
  m.train_x_ = X;
  return m;
}

MeanModel MeanModel::constant_values(Vector values, Interval validity) {
  MeanModel m;
  m.kind_ = MeanKind::constant;
  m.dims_ = values.size();
  m.validity_ = validity;
  m.fitted_from_data_ = false;
  m.coefficients_ = values.transpose();
  return m;
}

MeanModel MeanModel::bilinear_from_coefficients(double breakpoint,
                                                Matrix coefficients,
                                                Interval validity) {
  if (coefficients.rows() != 3)
    throw ShapeError("bilinear coefficients must have three rows");
  MeanModel m;
  m.kind_ = MeanKind::bilinear;
  m.dims_ = coefficients.cols();
  m.validity_ = validity;
  m.fitted_from_data_ = false;
  m.breakpoint_ = breakpoint;
  m.coefficients_ = std::move(coefficients);
  return m;
}

double MeanModel::resolve(double z) const {
  if (validity_.contains(z) || validity_.width() < 0) return z;
  if (clamp_ == ClampPolicy::error)
    throw ExtrapolationError("z = " + std::to_string(z) +
                             " outside validity interval [" +
                             std::to_string(validity_.lo) + ", " +
                             std::to_string(validity_.hi) + "]");
  if (clamp_warned_.arm())
    warn("mean model: clamping z = " + std::to_string(z) +
         " to the validity interval");
  return validity_.clamp(z);
}

Vector MeanModel::operator()(double z) const {
  const double zc = resolve(z);
  switch (kind_) {
    case MeanKind::constant:
      return coefficients_.row(0).transpose();
    case MeanKind::bilinear: {
      const double u = zc - breakpoint_;
      return (coefficients_.row(0) + std::min(u, 0.0) * coefficients_.row(1) +
              std::max(u, 0.0) * coefficients_.row(2))
          .transpose();
    }
    case MeanKind::kernel: {
      Vector out(dims_);
      // one smoothing pass per distinct bandwidth
      std::vector<bool> done(static_cast<size_t>(dims_), false);
      for (Index k = 0; k < dims_; ++k) {
        if (done[static_cast<size_t>(k)]) continue;
        std::vector<Index> cols;
        for (Index j = k; j < dims_; ++j)
          if (!done[static_cast<size_t>(j)] && bandwidths_[j] == bandwidths_[k])
            cols.push_back(j);
        const auto sums =
            detail::smoothed_sums(grouped_, zc, bandwidths_[k], cols);
        for (size_t c = 0; c < cols.size(); ++c) {
          out[cols[c]] = sums.numerators[static_cast<Index>(c)] / sums.weight;
          done[static_cast<size_t>(cols[c])] = true;
        }
      }
      return out;
    }
  }
  return Vector::Zero(dims_);
}

double MeanModel::eval_channel(double z, Index channel) const {
  if (channel < 0 || channel >= dims_)
    throw ShapeError("channel index out of range");
  if (kind_ != MeanKind::kernel) return (*this)(z)[channel];
  const double zc = resolve(z);
  const auto sums =
      detail::smoothed_sums(grouped_, zc, bandwidths_[channel], {channel});
  return sums.numerators[0] / sums.weight;
}

Matrix MeanModel::loo_fitted_values() const {
  if (!fitted_from_data_)
    throw FitError("leave-one-out values need a model fitted from data");
  const Index n = train_z_.size();
  Matrix out(n, dims_);

  switch (kind_) {
    case MeanKind::constant: {
      for (Index i = 0; i < n; ++i)
        out.row(i) = (coefficients_.row(0) * static_cast<double>(n) -
                      train_x_.row(i)) /
                     static_cast<double>(n - 1);
      break;
    }
    case MeanKind::bilinear: {
      for (Index i = 0; i < n; ++i) {
        const double u = train_z_[i] - breakpoint_;
        const Eigen::RowVectorXd fit =
            coefficients_.row(0) + std::min(u, 0.0) * coefficients_.row(1) +
            std::max(u, 0.0) * coefficients_.row(2);
        const double h = hat_diag_[i];
        out.row(i) = fit - (train_x_.row(i) - fit) * (h / (1.0 - h));
      }
      break;
    }
    case MeanKind::kernel: {
      for (Index i = 0; i < n; ++i) {
        std::vector<bool> done(static_cast<size_t>(dims_), false);
        for (Index k = 0; k < dims_; ++k) {
          if (done[static_cast<size_t>(k)]) continue;
          std::vector<Index> cols;
          for (Index j = k; j < dims_; ++j)
            if (!done[static_cast<size_t>(j)] &&
                bandwidths_[j] == bandwidths_[k])
              cols.push_back(j);
          Vector own(static_cast<Index>(cols.size()));
          for (size_t c = 0; c < cols.size(); ++c)
            own[static_cast<Index>(c)] = train_x_(i, cols[c]);
          const auto sums = detail::smoothed_sums_excluding(
              grouped_, train_z_[i], bandwidths_[k], cols, train_z_[i], own);
          for (size_t c = 0; c < cols.size(); ++c) {
            out(i, cols[c]) =
                sums.numerators[static_cast<Index>(c)] / sums.weight;
            done[static_cast<size_t>(cols[c])] = true;
          }
        }
      }
      break;
    }
  }
  return out;
}

MeanModel MeanRecipe::fit(const Matrix& X, const Vector& z) const {
  if (fixed_values.has_value()) {
    if (fixed_values->size() != X.cols())
      throw ShapeError("fixed mean values do not match channel count");
    return MeanModel::constant_values(*fixed_values,
                                      {z.minCoeff(), z.maxCoeff()});
  }
  switch (kind) {
    case MeanKind::constant: return MeanModel::fit_constant(X, z);
    case MeanKind::bilinear: return MeanModel::fit_bilinear(X, z, breakpoint);
    case MeanKind::kernel:
      if (kernel_bandwidths.size() > 0)
        return MeanModel::fit_kernel(X, z, kernel_bandwidths);
      return MeanModel::fit_kernel(X, z, kernel_bandwidth);
  }
  throw ParameterError("invalid mean recipe");
}

}  // namespace condcov
