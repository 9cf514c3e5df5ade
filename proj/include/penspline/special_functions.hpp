#pragma once

// Log-scale special functions needed by the closed-form marginal priors.
// All routines return natural logarithms so that arguments producing values
// far outside double range (exp(-500) tails, huge Bessel prefactors) stay
// representable.

#include <cmath>
#include <limits>
#include <numbers>

#include "penspline/error.hpp"
#include "penspline/quadrature.hpp"

namespace penspline::special {

namespace detail {

inline constexpr double kTiny = 1e-300;

/// log1p(exp(w)) without overflow.
inline double softplus(double w) {
  return w > 35.0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w));
}

/// log(cosh(x)) without overflow.
inline double log_cosh(double x) {
  const double ax = std::abs(x);
  return ax + std::log1p(std::exp(-2.0 * ax)) - std::numbers::ln2;
}

/// log of the lower incomplete gamma gamma(s, x) by its power series; s > 0.
inline double log_lower_gamma_series(double s, double x) {
  double ap = s, term = 1.0 / s, sum = term;
  for (int n = 0; n < 100000; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * 1e-17) break;
  }
  return -x + s * std::log(x) + std::log(sum);
}

/// log of the upper incomplete gamma Gamma(s, x) by Legendre's continued
/// fraction (modified Lentz); converges for every real s once x > 0.
inline double log_upper_gamma_cf(double s, double x) {
  double b = x + 1.0 - s;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 100000; ++i) {
    const double an = -i * (i - s);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return -x + s * std::log(x) + std::log(h);
}

/// Exponential integral E1(x) = Gamma(0, x) for 0 < x < 1 (series).
inline double exp_integral_e1_small(double x) {
  double sum = 0.0, term = 1.0;
  for (int k = 1; k < 200; ++k) {
    term *= -x / k;
    const double add = term / k;
    sum += add;
    if (std::abs(add) < 1e-18) break;
  }
  return -std::numbers::egamma - std::log(x) - sum;
}

}  // namespace detail

/// log Gamma(s, x), the upper incomplete gamma function, for real s and x > 0.
inline double log_upper_gamma(double s, double x) {
  require(x > 0.0, ErrorKind::NonPositiveInput, "log_upper_gamma requires x > 0");
  if (s > 0.0) {
    if (x >= s + 1.0) return detail::log_upper_gamma_cf(s, x);
    const double log_lower = detail::log_lower_gamma_series(s, x);
    const double lg = std::lgamma(s);
    return lg + std::log1p(-std::exp(log_lower - lg));
  }
  if (x >= 1.0) return detail::log_upper_gamma_cf(s, x);
  // s <= 0 and small x: recur downward from a positive (or zero) order,
  // Gamma(s, x) = (x^s e^{-x} - Gamma(s+1, x)) / (-s).
  const double shift = std::floor(s);
  double order = s - shift;  // in [0, 1)
  double value = order > 0.0 ? std::exp(log_upper_gamma(order, x)) : detail::exp_integral_e1_small(x);
  while (order > s + 0.5) {
    order -= 1.0;
    value = (std::exp(order * std::log(x) - x) - value) / (-order);
  }
  return std::log(value);
}

/// log Q(s, x) = log(Gamma(s, x) / Gamma(s)), s > 0, x >= 0.
inline double log_gamma_q(double s, double x) {
  require(s > 0.0, ErrorKind::NonPositiveInput, "log_gamma_q requires s > 0");
  if (x <= 0.0) return 0.0;
  if (x >= s + 1.0) return detail::log_upper_gamma_cf(s, x) - std::lgamma(s);
  return std::log1p(-std::exp(detail::log_lower_gamma_series(s, x) - std::lgamma(s)));
}

/// log P(s, x) = log(gamma(s, x) / Gamma(s)), s > 0, x > 0.
inline double log_gamma_p(double s, double x) {
  require(s > 0.0, ErrorKind::NonPositiveInput, "log_gamma_p requires s > 0");
  if (x <= 0.0) return -std::numeric_limits<double>::infinity();
  if (x < s + 1.0) return detail::log_lower_gamma_series(s, x) - std::lgamma(s);
  return std::log1p(-std::exp(detail::log_upper_gamma_cf(s, x) - std::lgamma(s)));
}

/// log K_nu(z), modified Bessel function of the second kind, z > 0, from
/// K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt.
inline double log_bessel_k(double nu, double z) {
  require(z > 0.0, ErrorKind::NonPositiveInput, "log_bessel_k requires z > 0");
  const double anu = std::abs(nu);
  auto g = [&](double t) { return -z * std::cosh(t) + detail::log_cosh(anu * t); };
  quad::LogIntegralOptions opts;
  opts.lo_hint = 0.0;
  opts.hi_hint = 2.0 + 2.0 * std::asinh(anu / z);
  opts.drop = 50.0;
  return quad::log_integrate_exp(g, 0.0, std::numeric_limits<double>::infinity(), opts);
}

/// log U(a, b, z), confluent hypergeometric function of the second kind, for
/// a > 0 and z > 0, from U = 1/Gamma(a) int_0^inf e^{-zs} s^{a-1} (1+s)^{b-a-1} ds
/// evaluated on the log scale s = e^w.
inline double log_hyperu(double a, double b, double z) {
  require(a > 0.0, ErrorKind::NonPositiveInput, "log_hyperu requires a > 0");
  require(z > 0.0, ErrorKind::NonPositiveInput, "log_hyperu requires z > 0");
  auto g = [&](double w) { return -z * std::exp(w) + a * w + (b - a - 1.0) * detail::softplus(w); };
  const double centre = std::log(a / z);
  quad::LogIntegralOptions opts;
  opts.lo_hint = centre - 40.0;
  opts.hi_hint = centre + 40.0;
  opts.drop = 50.0;
  const double inf = std::numeric_limits<double>::infinity();
  return quad::log_integrate_exp(g, -inf, inf, opts) - std::lgamma(a);
}

}  // namespace penspline::special
