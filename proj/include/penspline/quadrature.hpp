#pragma once

// Numerical integration used throughout the library:
//  * fixed Gauss-Legendre rules (exact polynomial integration on knot cells),
//  * adaptive Gauss-Kronrod (7/15) on finite intervals,
//  * integration of exp(g(s)) for log-scale integrands whose values would
//    under- or overflow in linear scale.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <vector>

#include "penspline/error.hpp"

namespace penspline::quad {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre rule with `points` nodes via Newton iteration on P_n.
inline GaussRule gauss_legendre(int points) {
  require(points >= 1, ErrorKind::InvalidArgument, "gauss_legendre needs at least one node");
  GaussRule rule;
  rule.nodes.resize(points);
  rule.weights.resize(points);
  const int half = (points + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (points + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < points; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      dp = points * (z * p0 - p1) / (z * z - 1.0);
      const double step = p0 / dp;
      z -= step;
      if (std::abs(step) < 1e-16) break;
    }
    rule.nodes[i] = -z;
    rule.nodes[points - 1 - i] = z;
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.weights[i] = w;
    rule.weights[points - 1 - i] = w;
  }
  if (points == 1) rule.nodes[0] = 0.0;
  return rule;
}

namespace detail {

// Kronrod 15-point extension of the 7-point Gauss rule (nodes >= 0, symmetric).
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a, b, value, error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double fc = f(c);
  double kronrod = fc * kWgk[7];
  double gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double sum = f(c - dx) + f(c + dx);
    kronrod += kWgk[j] * sum;
    if (j % 2 == 1) gauss += kWg[j / 2] * sum;
  }
  return {a, b, kronrod * h, std::abs((kronrod - gauss) * h)};
}

}  // namespace detail

struct AdaptiveOptions {
  double rel_tol = 1e-13;
  double abs_tol = 0.0;
  int max_segments = 4000;
  int initial_segments = 1;
};

/// Adaptive Gauss-Kronrod integral of f over the finite interval [a, b].
template <class F>
double integrate(F&& f, double a, double b, const AdaptiveOptions& opts = {}) {
  if (a == b) return 0.0;
  std::priority_queue<detail::Segment> heap;
  double total = 0.0, total_err = 0.0;
  const int pieces = std::max(1, opts.initial_segments);
  for (int i = 0; i < pieces; ++i) {
    const double lo = a + (b - a) * i / pieces;
    const double hi = (i + 1 == pieces) ? b : a + (b - a) * (i + 1) / pieces;
    auto seg = detail::gk15(f, lo, hi);
    total += seg.value;
    total_err += seg.error;
    heap.push(seg);
  }
  int count = pieces;
  while (total_err > std::max(opts.abs_tol, opts.rel_tol * std::abs(total)) &&
         count < opts.max_segments) {
    const auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) break;  // interval exhausted at machine precision
    auto left = detail::gk15(f, worst.a, mid);
    auto right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    count += 1;
  }
  return total;
}

struct LogIntegralOptions {
  double lo_hint = -50.0;        // finite scan window used to locate the mode
  double hi_hint = 50.0;
  int scan_points = 2001;
  double drop = 60.0;            // integrate where g >= max(g) - drop
  double rel_tol = 1e-13;
};

/// log of the integral of exp(g(s)) over [a, b] (either end may be infinite).
///
/// The mode is located by a grid scan over the hint window refined with a
/// golden-section search; integration is restricted to where g is within
/// `drop` nats of the mode and runs on exp(g - g_max).
template <class G>
double log_integrate_exp(G&& g, double a, double b, const LogIntegralOptions& opts = {}) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  const double scan_lo = std::max(a, opts.lo_hint);
  const double scan_hi = std::min(b, opts.hi_hint);
  require(scan_lo < scan_hi, ErrorKind::InvalidArgument, "log_integrate_exp: empty scan window");

  auto safe = [&](double s) {
    const double v = g(s);
    return std::isnan(v) ? kNegInf : v;
  };

  const int points = std::max(3, opts.scan_points);
  const double spacing = (scan_hi - scan_lo) / (points - 1);
  double best_s = scan_lo, best_g = kNegInf;
  for (int i = 0; i < points; ++i) {
    const double s = (i + 1 == points) ? scan_hi : scan_lo + spacing * i;
    const double v = safe(s);
    if (v > best_g) {
      best_g = v;
      best_s = s;
    }
  }
  if (best_g == kNegInf) return kNegInf;

  // Golden-section refinement of the mode inside the neighbouring grid cells.
  {
    double lo = std::max(a, best_s - spacing), hi = std::min(b, best_s + spacing);
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
    double f1 = safe(x1), f2 = safe(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-12 * (1.0 + std::abs(best_s)); ++it) {
      if (f1 < f2) {
        lo = x1; x1 = x2; f1 = f2;
        x2 = lo + invphi * (hi - lo); f2 = safe(x2);
      } else {
        hi = x2; x2 = x1; f2 = f1;
        x1 = hi - invphi * (hi - lo); f1 = safe(x1);
      }
    }
    if (f1 > best_g) { best_g = f1; best_s = x1; }
    if (f2 > best_g) { best_g = f2; best_s = x2; }
  }

  const double threshold = best_g - opts.drop;
  auto walk = [&](double direction, double edge) {
    double step = std::max(spacing, 1e-6 * (1.0 + std::abs(best_s)));
    double s = best_s;
    for (int it = 0; it < 400; ++it) {
      double next = s + direction * step;
      if ((direction > 0 && next >= edge) || (direction < 0 && next <= edge)) return edge;
      s = next;
      if (safe(s) < threshold) return s;
      step *= 1.25;
    }
    fail(ErrorKind::InvalidArgument, "log_integrate_exp: integrand does not decay");
  };
  const double lo = walk(-1.0, a);
  const double hi = walk(+1.0, b);
  require(std::isfinite(lo) && std::isfinite(hi), ErrorKind::InvalidArgument,
          "log_integrate_exp: integrand does not decay towards an infinite endpoint");

  auto shifted = [&](double s) {
    const double v = safe(s) - best_g;
    return v == kNegInf ? 0.0 : std::exp(v);
  };
  AdaptiveOptions adaptive;
  adaptive.rel_tol = opts.rel_tol;
  adaptive.initial_segments = 32;
  // Split at the mode so a sharp peak always lies on a segment boundary.
  double mass = 0.0;
  if (best_s > lo) mass += integrate(shifted, lo, best_s, adaptive);
  if (hi > best_s) mass += integrate(shifted, best_s, hi, adaptive);
  return best_g + std::log(mass);
}

}  // namespace penspline::quad
