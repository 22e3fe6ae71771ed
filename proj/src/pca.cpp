#include "condcov/pca.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "condcov/numeric.hpp"

namespace condcov {

CondEigenDecomp eigen_decomp(const Matrix& sigma, double z) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  if (eig.info() != Eigen::Success)
    throw NumericError("eigendecomposition failed at z = " + std::to_string(z));

  const Index p = sigma.rows();
  std::vector<std::pair<double, Vector>> pairs;
  std::vector<Index> argmax(static_cast<size_t>(p));
  for (Index j = 0; j < p; ++j) {
    Vector v = eig.eigenvectors().col(j);
    // Sign rule: the entry of largest magnitude (first on ties) is positive.
    Index arg = 0;
    for (Index r = 1; r < p; ++r)
      if (std::abs(v[r]) > std::abs(v[arg])) arg = r;
    if (v[arg] < 0.0) v = -v;
    argmax[static_cast<size_t>(j)] = arg;
    pairs.emplace_back(eig.eigenvalues()[j], std::move(v));
  }

  // Descending eigenvalues; exact ties ordered by the leading-entry
  // position so e.g. an identity matrix decomposes to the identity.
  std::vector<Index> order(static_cast<size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double la = pairs[static_cast<size_t>(a)].first;
    const double lb = pairs[static_cast<size_t>(b)].first;
    if (la != lb) return la > lb;
    return argmax[static_cast<size_t>(a)] < argmax[static_cast<size_t>(b)];
  });

  CondEigenDecomp out;
  out.z = z;
  out.eigenvalues.resize(p);
  out.components.resize(p, p);
  for (Index j = 0; j < p; ++j) {
    const auto& src = pairs[static_cast<size_t>(order[static_cast<size_t>(j)])];
    out.eigenvalues[j] = src.first;
    out.components.col(j) = src.second;
  }
  return out;
}

CondEigenDecomp cond_eigen(const CondCovModel& cov, double z) {
  return eigen_decomp(cov.eval_repaired(z), z);
}

namespace {

// Decompositions keyed by the exact z value; monitoring data revisits the
// same confounder readings, simulated data sits on a grid.
class DecompCache {
 public:
  explicit DecompCache(const CondCovModel& cov) : cov_(cov) {}

  const CondEigenDecomp& at(double z) {
    auto it = cache_.find(z);
    if (it == cache_.end())
      it = cache_.emplace(z, cond_eigen(cov_, z)).first;
    return it->second;
  }

 private:
  const CondCovModel& cov_;
  std::map<double, CondEigenDecomp> cache_;
};

std::vector<Index> all_components(Index p) {
  std::vector<Index> idx(static_cast<size_t>(p));
  std::iota(idx.begin(), idx.end(), Index{0});
  return idx;
}

void check_component_indices(const std::vector<Index>& components, Index p) {
  for (Index c : components)
    if (c < 0 || c >= p)
      throw ShapeError("component index out of range");
}

}  // namespace

Matrix cond_scores(const Matrix& X, const Vector& z, const MeanModel& mean,
                   const CondCovModel& cov,
                   const std::vector<Index>& components) {
  const Index p = cov.dims();
  if (X.cols() != p || X.rows() != z.size())
    throw ShapeError("scores: data does not match the fitted models");
  const std::vector<Index> selected =
      components.empty() ? all_components(p) : components;
  check_component_indices(selected, p);

  DecompCache cache(cov);
  Matrix scores(X.rows(), static_cast<Index>(selected.size()));
  for (Index i = 0; i < X.rows(); ++i) {
    const CondEigenDecomp& dec = cache.at(z[i]);
    const double floor = 1e-12 * dec.eigenvalues.sum();
    const Vector deviation = X.row(i).transpose() - mean(z[i]);
    for (size_t c = 0; c < selected.size(); ++c) {
      const double lambda = dec.eigenvalues[selected[c]];
      if (!(lambda > floor))
        throw DegenerateComponentError(
            "component " + std::to_string(selected[c] + 1) +
            " has eigenvalue below floor at z = " + std::to_string(z[i]));
      scores(i, static_cast<Index>(c)) =
          dec.components.col(selected[c]).dot(deviation) / std::sqrt(lambda);
    }
  }
  return scores;
}

Matrix reconstruct(const Matrix& scores, const Vector& z, const MeanModel& mean,
                   const CondCovModel& cov, const std::vector<Index>& removed) {
  const Index p = cov.dims();
  if (scores.cols() != p)
    throw ShapeError("reconstruct needs scores for all components");
  if (scores.rows() != z.size())
    throw ShapeError("scores and z are not aligned");
  check_component_indices(removed, p);

  std::vector<bool> keep(static_cast<size_t>(p), true);
  for (Index c : removed) keep[static_cast<size_t>(c)] = false;

  DecompCache cache(cov);
  Matrix out(scores.rows(), p);
  for (Index i = 0; i < scores.rows(); ++i) {
    const CondEigenDecomp& dec = cache.at(z[i]);
    Vector x = mean(z[i]);
    for (Index c = 0; c < p; ++c) {
      if (!keep[static_cast<size_t>(c)]) continue;
      x += dec.components.col(c) *
           (std::sqrt(std::max(dec.eigenvalues[c], 0.0)) * scores(i, c));
    }
    out.row(i) = x.transpose();
  }
  return out;
}

ScoreDiagnostics score_diagnostics(const Matrix& scores, const Vector& z,
                                   int bins) {
  if (bins < 2) throw ParameterError("score diagnostics need at least 2 bins");
  if (scores.rows() != z.size())
    throw ShapeError("scores and z are not aligned");
  const Index n = scores.rows();
  const Index m = scores.cols();

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return z[a] < z[b]; });

  // Equal-count bin edges; merge bins that end up under 30 rows.
  std::vector<std::pair<Index, Index>> ranges;
  for (int b = 0; b < bins; ++b) {
    const Index lo = n * b / bins;
    const Index hi = n * (b + 1) / bins;
    if (hi > lo) ranges.emplace_back(lo, hi);
  }
  for (size_t b = 0; b + 1 < ranges.size();) {
    if (ranges[b].second - ranges[b].first < 30) {
      ranges[b].second = ranges[b + 1].second;
      ranges.erase(ranges.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    } else {
      ++b;
    }
  }
  if (ranges.size() > 1 &&
      ranges.back().second - ranges.back().first < 30) {
    ranges[ranges.size() - 2].second = ranges.back().second;
    ranges.pop_back();
  }

  ScoreDiagnostics diag;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& [lo, hi] : ranges) {
    ScoreBinStats stats;
    stats.count = hi - lo;
    stats.z_lo = z[order[static_cast<size_t>(lo)]];
    stats.z_hi = z[order[static_cast<size_t>(hi - 1)]];
    Matrix block(stats.count, m);
    for (Index r = lo; r < hi; ++r)
      block.row(r - lo) = scores.row(order[static_cast<size_t>(r)]);

    stats.mean = block.colwise().mean().transpose();
    Matrix centered = block.rowwise() - stats.mean.transpose();
    stats.sd.resize(m);
    for (Index c = 0; c < m; ++c)
      stats.sd[c] = stats.count > 1
                        ? std::sqrt(centered.col(c).squaredNorm() /
                                    static_cast<double>(stats.count - 1))
                        : 0.0;
    stats.corr = Matrix::Constant(m, m, nan);
    for (Index a = 0; a < m; ++a) {
      for (Index b = a; b < m; ++b) {
        if (stats.sd[a] > 0.0 && stats.sd[b] > 0.0) {
          const double cov_ab = centered.col(a).dot(centered.col(b)) /
                                static_cast<double>(stats.count - 1);
          stats.corr(a, b) = cov_ab / (stats.sd[a] * stats.sd[b]);
          stats.corr(b, a) = stats.corr(a, b);
        }
      }
    }
    diag.bins.push_back(std::move(stats));
  }

  // Kolmogorov-style max CDF gap against the standard normal, per column.
  diag.normality_gap.resize(m);
  for (Index c = 0; c < m; ++c) {
    std::vector<double> sorted(static_cast<size_t>(n));
    for (Index i = 0; i < n; ++i) sorted[static_cast<size_t>(i)] = scores(i, c);
    std::sort(sorted.begin(), sorted.end());
    double gap = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double cdf = normal_cdf(sorted[static_cast<size_t>(i)]);
      const double hi_step = static_cast<double>(i + 1) / static_cast<double>(n);
      const double lo_step = static_cast<double>(i) / static_cast<double>(n);
      gap = std::max({gap, std::abs(hi_step - cdf), std::abs(cdf - lo_step)});
    }
    diag.normality_gap[c] = gap;
  }
  return diag;
}

}  // namespace condcov
