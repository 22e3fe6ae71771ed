#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "condcov/common.hpp"
#include "condcov/dataset.hpp"
#include "condcov/rng.hpp"

namespace testutil {

using condcov::Index;
using condcov::Matrix;
using condcov::Vector;

// Independent oracle for the kernel conditional mean: plain double loop over
// every observation, no grouping, no shortcuts.
inline double nw_mean_oracle(const Matrix& X, const Vector& z, Index channel,
                             double z0, double h) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double u = (z[i] - z0) / h;
    const double w = std::exp(-0.5 * u * u) / (h * std::sqrt(2.0 * M_PI));
    num += w * X(i, channel);
    den += w;
  }
  return num / den;
}

// Independent oracle for the conditional covariance entry: residuals against
// a caller-supplied mean evaluation, direct weighted sum.
inline double condcov_entry_oracle(const Matrix& residuals, const Vector& z,
                                   Index j, Index k, double z0, double h) {
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < z.size(); ++i) {
    const double u = (z[i] - z0) / h;
    const double w = std::exp(-0.5 * u * u) / (h * std::sqrt(2.0 * M_PI));
    num += w * residuals(i, j) * residuals(i, k);
    den += w;
  }
  return num / den;
}

inline Matrix random_matrix(condcov::Rng& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

inline Vector random_vector(condcov::Rng& rng, Index n, double lo, double hi) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = lo + (hi - lo) * rng.uniform01();
  return v;
}

inline Matrix random_psd(condcov::Rng& rng, Index p) {
  const Matrix a = random_matrix(rng, p + 2, p);
  return a.transpose() * a / static_cast<double>(p + 2);
}

inline condcov::AlignedDataset make_dataset(const Matrix& X, const Vector& z) {
  condcov::AlignedDataset data;
  data.X = X;
  data.z = z;
  data.timestamps.resize(X.rows());
  for (Index i = 0; i < X.rows(); ++i)
    data.timestamps[i] = static_cast<double>(i);
  data.meta.sample_period = 1.0;
  for (Index c = 0; c < X.cols(); ++c)
    data.meta.channel_names.push_back("x" + std::to_string(c + 1));
  return data;
}

// Collects warnings for the lifetime of the object.
class WarningCapture {
 public:
  WarningCapture() {
    previous_ = condcov::set_warning_handler(
        [this](const std::string& msg) { messages.push_back(msg); });
  }
  ~WarningCapture() { condcov::set_warning_handler(previous_); }

  std::vector<std::string> messages;

 private:
  condcov::WarningHandler previous_;
};

}  // namespace testutil
