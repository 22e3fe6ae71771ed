#include "condcov/numeric.hpp"

#include <cmath>
#include <limits>

#include "condcov/errors.hpp"

namespace condcov {

namespace {

// Series expansion, converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-16)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw NumericError("incomplete gamma series did not converge");
}

// Lentz continued fraction for Q(a, x), x >= a + 1.
double gamma_q_fraction(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double f = d;
  for (int n = 1; n < 500; ++n) {
    const double an = -static_cast<double>(n) * (static_cast<double>(n) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16)
      return f * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw NumericError("incomplete gamma fraction did not converge");
}

}  // namespace

double regularized_gamma_p(double a, double x) {
  if (!(a > 0.0)) throw ParameterError("gamma shape must be positive");
  if (x < 0.0) throw ParameterError("gamma argument must be nonnegative");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double chi2_cdf(Index dof, double x) {
  if (dof < 1) throw ParameterError("chi-square needs dof >= 1");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(static_cast<double>(dof) / 2.0, x / 2.0);
}

double chi2_quantile(Index dof, double q) {
  if (dof < 1) throw ParameterError("chi-square needs dof >= 1");
  if (!(q > 0.0 && q < 1.0))
    throw ParameterError("quantile level must lie in (0, 1)");

  double lo = 0.0;
  double hi = static_cast<double>(dof);
  while (chi2_cdf(dof, hi) < q) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (chi2_cdf(dof, mid) < q)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / 1.4142135623730950488);
}

}  // namespace condcov
