#pragma once

// Smoothing-variance hyperpriors, the marginal O-splines prior obtained by
// integrating tau^2 out, proper versions of the conditional prior, and the
// rate schedules / prior-mass conditions used by the concentration theory.

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <type_traits>
#include <variant>

#include "penspline/dr_basis.hpp"
#include "penspline/error.hpp"
#include "penspline/quadrature.hpp"
#include "penspline/special_functions.hpp"
#include "penspline/spline_basis.hpp"

namespace penspline {

/// p(x) = beta^alpha / Gamma(alpha) x^{-alpha-1} exp(-beta / x).
struct InverseGamma {
  double shape;
  double scale;
};
/// p(x) = beta^alpha / Gamma(alpha) x^{alpha-1} exp(-beta x).
struct Gamma {
  double shape;
  double rate;
};
/// p(x) = k lambda (lambda x)^{k-1} exp(-(lambda x)^k).
struct Weibull {
  double shape;
  double rate;
};
/// p(x) = 1 / upper on (0, upper).
struct Uniform {
  double upper;
};
/// x / scale ~ BetaPrime(alpha, beta).
struct ScaledBetaPrime {
  double alpha;
  double beta;
  double scale;
};
/// Point mass at `value`.
struct Fixed {
  double value;
};

using HyperPrior = std::variant<InverseGamma, Gamma, Weibull, Uniform, ScaledBetaPrime, Fixed>;

inline std::string describe(const HyperPrior& hp) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  struct {
    decltype(num)& f;
    std::string operator()(const InverseGamma& p) const { return "InverseGamma(" + f(p.shape) + "," + f(p.scale) + ")"; }
    std::string operator()(const Gamma& p) const { return "Gamma(" + f(p.shape) + "," + f(p.rate) + ")"; }
    std::string operator()(const Weibull& p) const { return "Weibull(" + f(p.shape) + "," + f(p.rate) + ")"; }
    std::string operator()(const Uniform& p) const { return "Uniform(0," + f(p.upper) + ")"; }
    std::string operator()(const ScaledBetaPrime& p) const {
      return "ScaledBetaPrime(" + f(p.alpha) + "," + f(p.beta) + "," + f(p.scale) + ")";
    }
    std::string operator()(const Fixed& p) const { return "Fixed(" + f(p.value) + ")"; }
  } visitor{num};
  return std::visit(visitor, hp);
}

inline void validate(const HyperPrior& hp) {
  const bool ok = std::visit(
      [](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, InverseGamma>) return p.shape > 0 && p.scale > 0;
        else if constexpr (std::is_same_v<T, Gamma>) return p.shape > 0 && p.rate > 0;
        else if constexpr (std::is_same_v<T, Weibull>) return p.shape > 0 && p.rate > 0;
        else if constexpr (std::is_same_v<T, Uniform>) return p.upper > 0;
        else if constexpr (std::is_same_v<T, ScaledBetaPrime>) return p.alpha > 0 && p.beta > 0 && p.scale > 0;
        else return p.value > 0;
      },
      hp);
  require(ok, ErrorKind::NonPositiveInput, "hyperprior parameters must be positive: " + describe(hp));
}

/// Normalized log density of tau^2. Outside the support it is -inf; a Fixed
/// prior has no density and raises InvalidArgument.
inline double hyperprior_logpdf(const HyperPrior& hp, double x) {
  require(x > 0.0, ErrorKind::NonPositiveInput, "tau^2 must be > 0");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        const double lx = std::log(x);
        if constexpr (std::is_same_v<T, InverseGamma>) {
          return p.shape * std::log(p.scale) - std::lgamma(p.shape) - (p.shape + 1.0) * lx - p.scale / x;
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return p.shape * std::log(p.rate) - std::lgamma(p.shape) + (p.shape - 1.0) * lx - p.rate * x;
        } else if constexpr (std::is_same_v<T, Weibull>) {
          const double lz = std::log(p.rate) + lx;
          return std::log(p.shape * p.rate) + (p.shape - 1.0) * lz - std::exp(p.shape * lz);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return x < p.upper ? -std::log(p.upper) : kNegInf;
        } else if constexpr (std::is_same_v<T, ScaledBetaPrime>) {
          const double s = x / p.scale;
          const double lbeta = std::lgamma(p.alpha) + std::lgamma(p.beta) - std::lgamma(p.alpha + p.beta);
          return (p.alpha - 1.0) * std::log(s) - (p.alpha + p.beta) * std::log1p(s) - std::log(p.scale) - lbeta;
        } else {
          fail(ErrorKind::InvalidArgument, "a fixed tau^2 has no density");
        }
      },
      hp);
}

/// log P(tau^2 > x).
inline double hyperprior_log_survival(const HyperPrior& hp, double x) {
  require(x > 0.0, ErrorKind::NonPositiveInput, "survival point must be > 0");
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, InverseGamma>) {
          return special::log_gamma_p(p.shape, p.scale / x);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          return special::log_gamma_q(p.shape, p.rate * x);
        } else if constexpr (std::is_same_v<T, Weibull>) {
          return -std::pow(p.rate * x, p.shape);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return x >= p.upper ? kNegInf : std::log1p(-x / p.upper);
        } else if constexpr (std::is_same_v<T, ScaledBetaPrime>) {
          // Integrate the density over log tau^2 from log x upward.
          auto g = [&](double s) { return hyperprior_logpdf(hp, std::exp(s)) + s; };
          quad::LogIntegralOptions opts;
          opts.lo_hint = std::log(x);
          opts.hi_hint = std::log(x) + 200.0;
          return quad::log_integrate_exp(g, std::log(x), std::numeric_limits<double>::infinity(), opts);
        } else {
          return x < p.value ? 0.0 : kNegInf;
        }
      },
      hp);
}

namespace detail {

/// log int_0^inf x^{-nu} exp(-r / (2x)) p(x) dx by quadrature over s = log x.
inline double marginal_log_integral(double r, double nu, const HyperPrior& hp) {
  auto g = [&](double s) {
    const double x = std::exp(s);
    return -nu * s - 0.5 * r / x + hyperprior_logpdf(hp, x) + s;
  };
  // Window: the kernel peaks near log(r / (2 nu)); hyperpriors add their own
  // scale, so the scan window is wide.
  const double centre = (r > 0.0 && nu > 0.0) ? std::log(r / (2.0 * nu)) : 0.0;
  quad::LogIntegralOptions opts;
  opts.lo_hint = centre - 120.0;
  opts.hi_hint = centre + 120.0;
  opts.scan_points = 4001;
  const double inf = std::numeric_limits<double>::infinity();
  double hi = inf;
  if (const auto* u = std::get_if<Uniform>(&hp)) hi = std::log(u->upper);
  return quad::log_integrate_exp(g, -inf, hi, opts);
}

}  // namespace detail

/// Marginal prior log density of the B-spline coefficients with tau^2
/// integrated out, in the common unnormalized convention
/// log int (tau^2)^{-(d-q)/2} exp(-b^T R b / (2 tau^2)) p(tau^2) dtau^2.
/// For a Fixed hyperprior the integral collapses to the conditional kernel.
inline double marginal_prior_logdensity(const VectorXd& b, const PenaltyMatrix& penalty, const HyperPrior& hp) {
  require(b.size() == penalty.values.rows(), ErrorKind::DimensionMismatch, "b length != d");
  validate(hp);
  const double d = static_cast<double>(b.size());
  const double nu = 0.5 * (d - penalty.derivative_order);
  const double r = b.dot(penalty.values * b);
  const bool needs_roughness = !std::holds_alternative<InverseGamma>(hp) && !std::holds_alternative<Fixed>(hp);
  if (needs_roughness) {
    require(r > 1e-14 * penalty.values.norm() * b.squaredNorm(), ErrorKind::ZeroRoughness,
            "b^T R b is zero; the marginal prior is only defined off the polynomial null space");
  }
  return std::visit(
      [&](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, InverseGamma>) {
          return p.shape * std::log(p.scale) - std::lgamma(p.shape) + std::lgamma(p.shape + nu) -
                 (p.shape + nu) * std::log(p.scale + 0.5 * r);
        } else if constexpr (std::is_same_v<T, Gamma>) {
          const double order = p.shape - nu;
          return std::numbers::ln2 + 0.5 * order * std::log(r / (2.0 * p.rate)) +
                 special::log_bessel_k(order, std::sqrt(2.0 * p.rate * r)) + p.shape * std::log(p.rate) -
                 std::lgamma(p.shape);
        } else if constexpr (std::is_same_v<T, Uniform>) {
          return -std::log(p.upper) + (1.0 - nu) * std::log(0.5 * r) +
                 special::log_upper_gamma(nu - 1.0, r / (2.0 * p.upper));
        } else if constexpr (std::is_same_v<T, ScaledBetaPrime>) {
          const double lbeta = std::lgamma(p.alpha) + std::lgamma(p.beta) - std::lgamma(p.alpha + p.beta);
          const double a = nu + p.beta;
          return -nu * std::log(p.scale) - lbeta + std::lgamma(a) +
                 special::log_hyperu(a, nu + 1.0 - p.alpha, r / (2.0 * p.scale));
        } else if constexpr (std::is_same_v<T, Weibull>) {
          return detail::marginal_log_integral(r, nu, hp);
        } else {
          return -nu * std::log(p.value) - 0.5 * r / p.value;
        }
      },
      hp);
}

enum class PriorFlavor { Improper, ProperProjection, ProperMMR };

struct ProperPriorSpec {
  PriorFlavor flavor = PriorFlavor::Improper;
  double tau2_poly = 1.0;
};

/// The tau^2-independent part of the prior precision: B^T H B / (n tau2_poly)
/// (projection), Q0 Q0^T / (n tau2_poly) (MMR), or zero (improper).
inline MatrixXd polynomial_precision(const DesignMatrix& design, const PenaltyMatrix& penalty,
                                     const ProperPriorSpec& spec) {
  const Eigen::Index d = penalty.values.rows();
  const int q = penalty.derivative_order;
  const double n = static_cast<double>(design.rows());
  switch (spec.flavor) {
    case PriorFlavor::Improper:
      return MatrixXd::Zero(d, d);
    case PriorFlavor::ProperProjection: {
      require(spec.tau2_poly > 0.0, ErrorKind::NonPositiveInput, "tau2_poly must be > 0");
      require(design.cols() == d, ErrorKind::DimensionMismatch, "design and penalty sizes differ");
      MatrixXd xq(design.rows(), q);
      for (int k = 0; k < q; ++k) xq.col(k) = design.points.array().pow(k);
      Eigen::ColPivHouseholderQR<MatrixXd> qr(xq);
      require(qr.rank() == q, ErrorKind::RankDeficientMonomialDesign,
              "monomial design has rank " + std::to_string(qr.rank()) + " < q = " + std::to_string(q));
      // H = Q Q^T with Q the thin orthonormal factor of X_q.
      const MatrixXd qthin = qr.householderQ() * MatrixXd::Identity(design.rows(), q);
      const MatrixXd proj = qthin.transpose() * design.values;
      return proj.transpose() * proj / (n * spec.tau2_poly);
    }
    case PriorFlavor::ProperMMR: {
      require(spec.tau2_poly > 0.0, ErrorKind::NonPositiveInput, "tau2_poly must be > 0");
      const auto eig = jacobi_eigen(penalty.values);
      const MatrixXd q0 = eig.vectors.leftCols(q);
      return q0 * q0.transpose() / (n * spec.tau2_poly);
    }
  }
  return MatrixXd::Zero(d, d);
}

/// Prior precision R / tau^2 + polynomial part for a proper flavor.
inline MatrixXd proper_precision(const DesignMatrix& design, const PenaltyMatrix& penalty,
                                 const ProperPriorSpec& spec, double tau2) {
  require(spec.flavor != PriorFlavor::Improper, ErrorKind::InvalidArgument,
          "proper_precision needs a proper prior flavor");
  require(tau2 > 0.0, ErrorKind::NonPositiveInput, "tau^2 must be > 0");
  return penalty.values / tau2 + polynomial_precision(design, penalty, spec);
}

/// Log density of DR coefficients under the projection prior: independent
/// N(0, tau2_poly) for the q polynomial directions and N(0, tau2 / gamma_j)
/// for the rest.
inline double dr_prior_logpdf(const VectorXd& u, const VectorXd& gamma, int q, double tau2, double tau2_poly) {
  require(u.size() == gamma.size(), ErrorKind::DimensionMismatch, "u and gamma lengths differ");
  require(tau2 > 0.0 && tau2_poly > 0.0, ErrorKind::NonPositiveInput, "variances must be > 0");
  const double log2pi = std::log(2.0 * std::numbers::pi);
  double s = 0.0;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double v = j < q ? tau2_poly : tau2 / gamma(j);
    s += -0.5 * (log2pi + std::log(v)) - 0.5 * u(j) * u(j) / v;
  }
  return s;
}

// Rate schedules ----------------------------------------------------------

/// tau* = n^{-1/(2 m0 + 1)}.
inline double tau_star(double n, int m0) { return std::pow(n, -1.0 / (2.0 * m0 + 1.0)); }

/// epsilon_n = n^{-m0/(2 m0 + 1)} sqrt(log n).
inline double epsilon_n(double n, int m0) {
  return std::pow(n, -static_cast<double>(m0) / (2.0 * m0 + 1.0)) * std::sqrt(std::log(n));
}

/// n epsilon_n^2 = n^{1/(2 m0 + 1)} log n.
inline double n_epsilon_sq(double n, int m0) { return std::pow(n, 1.0 / (2.0 * m0 + 1.0)) * std::log(n); }

enum class ScheduleFamily { Uniform, Gamma, Weibull, InverseGamma, ScaledBetaPrime };

/// Hyperprior whose parameters move with n.
///   Uniform:          U(0, c tau*)
///   Gamma:            Ga(alpha, c_beta n eps^2 / tau*)
///   Weibull:          Weibull(k, c_lambda (n eps^2)^{1/k} / tau*)
///   InverseGamma:     IG(alpha, beta), not n-dependent
///   ScaledBetaPrime:  SBP(alpha, beta, 1 / lambda_n), lambda_n = c_lambda n eps^2 / tau*
struct RateSchedule {
  ScheduleFamily family = ScheduleFamily::Weibull;
  double c = 1.0;
  double c_beta = 1.0;
  double c_lambda = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  double k = 0.5;
  int m0 = 2;
};

inline HyperPrior corollary1_schedule(const RateSchedule& s, double n) {
  require(n >= 2.0, ErrorKind::InvalidArgument, "schedules need n >= 2");
  require(s.m0 >= 1, ErrorKind::InvalidArgument, "m0 must be >= 1");
  const double ts = tau_star(n, s.m0);
  const double ne2 = n_epsilon_sq(n, s.m0);
  auto positive = [](double v, const char* what) {
    require(v > 0.0, ErrorKind::NonPositiveInput, std::string(what) + " must be > 0");
  };
  switch (s.family) {
    case ScheduleFamily::Uniform:
      positive(s.c, "c");
      return Uniform{s.c * ts};
    case ScheduleFamily::Gamma:
      positive(s.c_beta, "c_beta");
      require(s.alpha > 0.0 && s.alpha <= 1.0, ErrorKind::InvalidShape, "Gamma schedule shape must lie in (0, 1]");
      return Gamma{s.alpha, s.c_beta * ne2 / ts};
    case ScheduleFamily::Weibull:
      positive(s.c_lambda, "c_lambda");
      require(s.k > 0.0 && s.k <= 1.0, ErrorKind::InvalidShape, "Weibull schedule shape must lie in (0, 1]");
      return Weibull{s.k, s.c_lambda * std::pow(ne2, 1.0 / s.k) / ts};
    case ScheduleFamily::InverseGamma:
      positive(s.alpha, "alpha");
      positive(s.beta, "beta");
      return InverseGamma{s.alpha, s.beta};
    case ScheduleFamily::ScaledBetaPrime:
      positive(s.alpha, "alpha");
      positive(s.beta, "beta");
      positive(s.c_lambda, "c_lambda");
      return ScaledBetaPrime{s.alpha, s.beta, ts / (s.c_lambda * ne2)};
  }
  fail(ErrorKind::InvalidArgument, "unknown schedule family");
}

struct A5Result {
  bool a = false;  // density nonincreasing
  bool b = false;  // log p(c1 tau*) >= -n eps^2
  bool c = false;  // log P(tau^2 > c2 tau*) <= -5 n eps^2
  double log_density = 0.0;
  double log_tail = 0.0;
  double n_eps_sq = 0.0;
};

/// Prior-mass conditions on the smoothing-variance prior at sample size n.
/// Monotonicity is checked on 10^4 log-spaced points over
/// (1e-12 tau*, 1e6 tau*).
inline A5Result check_a5(const RateSchedule& schedule, double n, double c1, double c2) {
  const HyperPrior hp = corollary1_schedule(schedule, n);
  const double ts = tau_star(n, schedule.m0);
  A5Result out;
  out.n_eps_sq = n_epsilon_sq(n, schedule.m0);

  constexpr int kGrid = 10000;
  const double lo = std::log(1e-12 * ts), hi = std::log(1e6 * ts);
  double prev = hyperprior_logpdf(hp, std::exp(lo));
  out.a = true;
  for (int i = 1; i < kGrid; ++i) {
    const double s = (i + 1 == kGrid) ? hi : lo + (hi - lo) * i / (kGrid - 1);
    const double cur = hyperprior_logpdf(hp, std::exp(s));
    if (cur > prev + 1e-12 * std::max(1.0, std::abs(prev))) {
      out.a = false;
      break;
    }
    prev = cur;
  }
  out.log_density = hyperprior_logpdf(hp, c1 * ts);
  out.b = out.log_density >= -out.n_eps_sq;
  out.log_tail = hyperprior_log_survival(hp, c2 * ts);
  out.c = out.log_tail <= -5.0 * out.n_eps_sq;
  return out;
}

}  // namespace penspline
