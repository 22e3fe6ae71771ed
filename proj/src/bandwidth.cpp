#include "condcov/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace condcov {

namespace {

// Validation rows grouped by distinct z so each model evaluation runs once
// per distinct confounder value.
struct ValGroups {
  Vector z;                              // distinct values
  std::vector<std::vector<Index>> rows;  // validation rows per value
};

ValGroups group_validation(const Vector& z) {
  std::vector<Index> order(static_cast<size_t>(z.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return z[a] < z[b]; });
  ValGroups g;
  std::vector<double> zs;
  for (Index i : order) {
    if (zs.empty() || z[i] != zs.back()) {
      zs.push_back(z[i]);
      g.rows.emplace_back();
    }
    g.rows.back().push_back(i);
  }
  g.z = Eigen::Map<const Vector>(zs.data(), static_cast<Index>(zs.size()));
  return g;
}

// Kernel smoother over training outputs / residual products with the
// bandwidth supplied per evaluation, so one snapshot serves a whole grid.
struct Smoother {
  detail::GroupedData grouped;
  Interval validity;
  ClampPolicy clamp = ClampPolicy::clamp_warn;

  double resolve(double z) const {
    if (validity.contains(z)) return z;
    if (clamp == ClampPolicy::error)
      throw ExtrapolationError("validation z = " + std::to_string(z) +
                               " outside the train coverage");
    return validity.clamp(z);
  }

  double eval(double z, double h, Index column) const {
    const auto sums = detail::smoothed_sums(grouped, resolve(z), h, {column});
    return sums.numerators[0] / sums.weight;
  }

  Vector eval_columns(double z, double h, const std::vector<Index>& cols) const {
    const auto sums = detail::smoothed_sums(grouped, resolve(z), h, cols);
    return sums.numerators / sums.weight;
  }
};

Smoother make_mean_smoother(const AlignedDataset& train) {
  return {detail::group_by_z(train.z, train.X), train.z_range()};
}

Matrix residual_products(const Matrix& residuals) {
  const Index n = residuals.rows();
  const Index p = residuals.cols();
  Matrix products(n, p * (p + 1) / 2);
  for (Index i = 0; i < n; ++i) {
    Index c = 0;
    for (Index j = 0; j < p; ++j)
      for (Index k = j; k < p; ++k)
        products(i, c++) = residuals(i, j) * residuals(i, k);
  }
  return products;
}

Matrix residuals_of(const AlignedDataset& data, const MeanModel& mean) {
  Matrix res(data.rows(), data.dims());
  for (Index i = 0; i < data.rows(); ++i)
    res.row(i) = data.X.row(i) - mean(data.z[i]).transpose();
  return res;
}

Smoother make_cov_smoother(const AlignedDataset& train, const MeanModel& mean) {
  return {detail::group_by_z(train.z, residual_products(residuals_of(train, mean))),
          train.z_range()};
}

inline Index packed_index(Index p, Index j, Index k) {
  if (j > k) std::swap(j, k);
  return j * p - j * (j - 1) / 2 + (k - j);
}

}  // namespace

double mean_loss(const AlignedDataset& train, const AlignedDataset& validation,
                 Index channel, double h, ClampPolicy clamp) {
  if (channel < 0 || channel >= train.dims())
    throw ShapeError("channel index out of range");
  if (train.dims() != validation.dims())
    throw ShapeError("train and validation channel counts differ");

  Smoother smoother = make_mean_smoother(train);
  smoother.clamp = clamp;
  const ValGroups groups = group_validation(validation.z);
  double loss = 0.0;
  for (Index g = 0; g < groups.z.size(); ++g) {
    const double fit = smoother.eval(groups.z[g], h, channel);
    for (Index row : groups.rows[static_cast<size_t>(g)]) {
      const double r = validation.X(row, channel) - fit;
      loss += r * r;
    }
  }
  return loss;
}

double cov_loss(const AlignedDataset& train, const AlignedDataset& validation,
                Index j, Index k, double h, const MeanModel& mean,
                ClampPolicy clamp) {
  const Index p = train.dims();
  if (j < 0 || j >= p || k < 0 || k >= p)
    throw ShapeError("entry index out of range");
  if (mean.dims() != p) throw ShapeError("mean model does not match data");

  Smoother smoother = make_cov_smoother(train, mean);
  smoother.clamp = clamp;
  const Matrix val_products = residual_products(residuals_of(validation, mean));
  const Index column = packed_index(p, j, k);

  const ValGroups groups = group_validation(validation.z);
  double loss = 0.0;
  for (Index g = 0; g < groups.z.size(); ++g) {
    const double fit = smoother.eval(groups.z[g], h, column);
    for (Index row : groups.rows[static_cast<size_t>(g)]) {
      const double r = val_products(row, column) - fit;
      loss += r * r;
    }
  }
  return loss;
}

double cov_loss_matrix(const AlignedDataset& train,
                       const AlignedDataset& validation, double h,
                       const MeanModel& mean) {
  CondCovModel model = CondCovModel::fit(
      train.X, train.z, mean, BandwidthMatrix::global(train.dims(), h));
  const Matrix val_res = residuals_of(validation, mean);

  const ValGroups groups = group_validation(validation.z);
  double loss = 0.0;
  for (Index g = 0; g < groups.z.size(); ++g) {
    const Matrix sigma = model.eval_cov(groups.z[g]);
    for (Index row : groups.rows[static_cast<size_t>(g)]) {
      const Vector r = val_res.row(row).transpose();
      loss += (r * r.transpose() - sigma).squaredNorm();
    }
  }
  return loss;
}

namespace {

struct TunedScalar {
  std::string target;
  std::vector<Index> columns;   // packed product columns (cov) or channel (mean)
  std::vector<double> weights;  // cov_global: off-diagonals count twice
};

void check_grid(const Vector& grid) {
  if (grid.size() == 0) throw ParameterError("bandwidth grid is empty");
  for (Index i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0)) throw ParameterError("bandwidth candidates must be positive");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw ParameterError("bandwidth grid must be strictly ascending");
  }
}

Index argmin_largest_ties(const Vector& losses) {
  Index best = -1;
  for (Index i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) continue;
    if (best < 0 || losses[i] <= losses[best]) best = i;
  }
  return best;
}

}  // namespace

TuneResult tune(const AlignedDataset& data, const SplitPlan& plan,
                const Vector& grid, TuneTarget target,
                const MeanRecipe& mean_recipe, std::uint64_t seed) {
  check_grid(grid);
  const Index p = data.dims();

  std::vector<HoldoutSplit> splits;
  if (plan.mode == SplitMode::kfold)
    splits = split_kfold(data, plan, seed);
  else
    splits.push_back(split_holdout(data, plan, seed));

  // One loss row per tuned scalar.
  std::vector<TunedScalar> scalars;
  if (target == TuneTarget::mean_per_channel) {
    for (Index k = 0; k < p; ++k)
      scalars.push_back({"mean_" + std::to_string(k + 1), {k}, {1.0}});
  } else if (target == TuneTarget::cov_per_pair) {
    for (Index j = 0; j < p; ++j)
      for (Index k = j; k < p; ++k)
        scalars.push_back({"cov_" + std::to_string(j + 1) + "_" +
                               std::to_string(k + 1),
                           {packed_index(p, j, k)},
                           {1.0}});
  } else {
    TunedScalar s;
    s.target = "cov_global";
    for (Index j = 0; j < p; ++j)
      for (Index k = j; k < p; ++k) {
        s.columns.push_back(packed_index(p, j, k));
        s.weights.push_back(j == k ? 1.0 : 2.0);
      }
    scalars.push_back(s);
  }

  Matrix losses = Matrix::Zero(static_cast<Index>(scalars.size()), grid.size());

  for (const HoldoutSplit& split : splits) {
    Smoother smoother;
    Matrix val_values;  // per-row values whose smoothed fit the loss compares
    if (target == TuneTarget::mean_per_channel) {
      smoother = make_mean_smoother(split.train);
      val_values = split.validation.X;
    } else {
      const MeanModel mean = mean_recipe.fit(split.train.X, split.train.z);
      smoother = make_cov_smoother(split.train, mean);
      val_values = residual_products(residuals_of(split.validation, mean));
    }
    const ValGroups groups = group_validation(split.validation.z);

    for (Index c = 0; c < grid.size(); ++c) {
      for (size_t s = 0; s < scalars.size(); ++s) {
        double loss = 0.0;
        try {
          for (Index g = 0; g < groups.z.size(); ++g) {
            const Vector fit =
                smoother.eval_columns(groups.z[g], grid[c], scalars[s].columns);
            for (Index row : groups.rows[static_cast<size_t>(g)]) {
              for (size_t col = 0; col < scalars[s].columns.size(); ++col) {
                const double r =
                    val_values(row, scalars[s].columns[col]) -
                    fit[static_cast<Index>(col)];
                loss += scalars[s].weights[col] * r * r;
              }
            }
          }
        } catch (const SparseRegionError&) {
          loss = std::numeric_limits<double>::infinity();
        } catch (const ExtrapolationError&) {
          loss = std::numeric_limits<double>::infinity();
        }
        losses(static_cast<Index>(s), c) += loss;
      }
    }
  }
  losses /= static_cast<double>(splits.size());

  TuneResult result;
  for (size_t s = 0; s < scalars.size(); ++s) {
    LossCurve curve;
    curve.target = scalars[s].target;
    curve.candidates = grid;
    curve.losses = losses.row(static_cast<Index>(s)).transpose();
    curve.argmin = argmin_largest_ties(curve.losses);
    if (curve.argmin < 0)
      throw TuningError("no finite loss for target " + scalars[s].target);
    result.curves.push_back(std::move(curve));
  }

  if (target == TuneTarget::mean_per_channel) {
    result.mean_bandwidths.resize(p);
    for (Index k = 0; k < p; ++k)
      result.mean_bandwidths[k] = result.curves[static_cast<size_t>(k)].selected();
  } else if (target == TuneTarget::cov_per_pair) {
    Matrix H(p, p);
    size_t s = 0;
    for (Index j = 0; j < p; ++j)
      for (Index k = j; k < p; ++k) {
        H(j, k) = result.curves[s].selected();
        H(k, j) = H(j, k);
        ++s;
      }
    result.cov_bandwidths = BandwidthMatrix(H);
  } else {
    result.cov_bandwidths = BandwidthMatrix::global(p, result.curves[0].selected());
  }
  return result;
}

}  // namespace condcov
