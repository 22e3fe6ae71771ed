#include "condcov/smoothing.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace condcov::detail {

GroupedData group_by_z(const Vector& z, const Matrix& rows) {
  const Index n = z.size();
  if (rows.rows() != n) throw ShapeError("group_by_z: row count mismatch");

  std::vector<Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return z[a] < z[b]; });

  GroupedData g;
  g.z.resize(n);
  g.count.resize(n);
  g.sums = Matrix::Zero(n, rows.cols());

  Index out = -1;
  for (Index r = 0; r < n; ++r) {
    const Index i = order[static_cast<size_t>(r)];
    if (out < 0 || z[i] != g.z[out]) {
      ++out;
      g.z[out] = z[i];
      g.count[out] = 0.0;
    }
    g.count[out] += 1.0;
    g.sums.row(out) += rows.row(i);
  }
  g.z.conservativeResize(out + 1);
  g.count.conservativeResize(out + 1);
  g.sums.conservativeResize(out + 1, rows.cols());
  return g;
}

namespace {

// Group index window [lo, hi) with nonzero kernel profile at z0.
std::pair<Index, Index> support_window(const Vector& zs, double z0, double h) {
  if (std::isinf(h)) return {0, zs.size()};
  const double reach = kKernelCutoff * h;
  const double* begin = zs.data();
  const double* end = zs.data() + zs.size();
  const double* lo = std::lower_bound(begin, end, z0 - reach);
  const double* hi = std::upper_bound(begin, end, z0 + reach);
  return {lo - begin, hi - begin};
}

}  // namespace

SmoothedSums smoothed_sums(const GroupedData& g, double z0, double h,
                           const std::vector<Index>& columns) {
  SmoothedSums out;
  out.numerators = Vector::Zero(static_cast<Index>(columns.size()));
  auto [lo, hi] = support_window(g.z, z0, h);
  for (Index i = lo; i < hi; ++i) {
    const double w = kernel_profile(g.z[i] - z0, h);
    if (w == 0.0) continue;
    out.weight += w * g.count[i];
    for (size_t c = 0; c < columns.size(); ++c)
      out.numerators[static_cast<Index>(c)] += w * g.sums(i, columns[c]);
  }
  if (out.weight < weight_floor(g.total()))
    throw SparseRegionError("kernel weight mass below floor at z = " +
                            std::to_string(z0));
  return out;
}

SmoothedSums smoothed_sums_excluding(const GroupedData& g, double z0, double h,
                                     const std::vector<Index>& columns,
                                     double z_excluded, const Vector& excluded) {
  SmoothedSums out;
  out.numerators = Vector::Zero(static_cast<Index>(columns.size()));
  auto [lo, hi] = support_window(g.z, z0, h);
  for (Index i = lo; i < hi; ++i) {
    const double w = kernel_profile(g.z[i] - z0, h);
    if (w == 0.0) continue;
    out.weight += w * g.count[i];
    for (size_t c = 0; c < columns.size(); ++c)
      out.numerators[static_cast<Index>(c)] += w * g.sums(i, columns[c]);
  }
  const double w_excl = kernel_profile(z_excluded - z0, h);
  out.weight -= w_excl;
  out.numerators -= w_excl * excluded;
  if (out.weight < weight_floor(g.total() - 1.0))
    throw SparseRegionError(
        "kernel weight mass below floor after exclusion at z = " +
        std::to_string(z0));
  return out;
}

}  // namespace condcov::detail
