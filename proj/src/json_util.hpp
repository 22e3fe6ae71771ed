#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <json.hpp>

#include "condcov/common.hpp"

namespace condcov::detail {

// JSON has no infinity literal; the equal-weight sentinel round-trips as the
// string "inf".
inline nlohmann::json json_number(double v) {
  if (std::isinf(v)) return nlohmann::json(v > 0 ? "inf" : "-inf");
  return nlohmann::json(v);
}

inline double number_from_json(const nlohmann::json& cell) {
  if (cell.is_string()) {
    const auto s = cell.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ParseError("expected a number, got '" + s + "'");
  }
  return cell.get<double>();
}

inline nlohmann::json json_vector(const Vector& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(json_number(v[i]));
  return out;
}

inline Vector vector_from_json(const nlohmann::json& arr) {
  Vector out(static_cast<Index>(arr.size()));
  for (Index i = 0; i < out.size(); ++i)
    out[i] = number_from_json(arr[static_cast<size_t>(i)]);
  return out;
}

inline nlohmann::json json_matrix(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index j = 0; j < m.rows(); ++j) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < m.cols(); ++k) row.push_back(json_number(m(j, k)));
    rows.push_back(row);
  }
  return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& rows) {
  const Index n = static_cast<Index>(rows.size());
  if (n == 0) return {};
  const Index m = static_cast<Index>(rows[0].size());
  Matrix out(n, m);
  for (Index j = 0; j < n; ++j)
    for (Index k = 0; k < m; ++k)
      out(j, k) =
          number_from_json(rows[static_cast<size_t>(j)][static_cast<size_t>(k)]);
  return out;
}

}  // namespace condcov::detail
