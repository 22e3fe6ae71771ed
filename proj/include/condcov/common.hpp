#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <functional>
#include <string>

namespace condcov {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Closed confounder interval a fitted model is valid on.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return v >= lo && v <= hi; }
  double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
  double width() const { return hi - lo; }
};

/// What to do when a model is evaluated outside its validity interval.
enum class ClampPolicy { clamp_warn, error };

using WarningHandler = std::function<void(const std::string&)>;

/// Replaces the process-wide warning sink; passing nullptr restores the
/// default (stderr). Returns the previous handler.
WarningHandler set_warning_handler(WarningHandler handler);

void warn(const std::string& message);

namespace detail {

/// Copyable once-flag so fitted models stay shareable across threads while
/// warn-once bookkeeping mutates under const evaluation.
class WarnOnce {
 public:
  WarnOnce() = default;
  WarnOnce(const WarnOnce& other) : fired_(other.fired_.load()) {}
  WarnOnce& operator=(const WarnOnce& other) {
    fired_ = other.fired_.load();
    return *this;
  }

  /// True exactly once.
  bool arm() const { return !fired_.exchange(true); }

 private:
  mutable std::atomic<bool> fired_{false};
};

}  // namespace detail

}  // namespace condcov
