#pragma once

// Spline spaces S(m, xi) on [0, 1] with the clamped (boundary knots repeated
// m times) normalized B-spline basis, and the matrices built from it: design
// matrix, empirical Gramian and the integrated-squared-derivative penalty.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "penspline/error.hpp"
#include "penspline/quadrature.hpp"

namespace penspline {

using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class KnotPlacement { Equidistant, Quantiles };

class SplineSpace {
 public:
  /// `knots` = (xi_0 = 0, xi_1, ..., xi_k0, xi_{k0+1} = 1), strictly increasing.
  SplineSpace(int order, std::vector<double> knots) : order_(order), knots_(std::move(knots)) {
    require(order_ >= 2, ErrorKind::InvalidArgument, "spline order must be >= 2");
    require(knots_.size() >= 2, ErrorKind::NonIncreasingKnots, "need at least the two boundary knots");
    require(knots_.front() == 0.0 && knots_.back() == 1.0, ErrorKind::NonIncreasingKnots,
            "boundary knots must be exactly 0 and 1");
    for (std::size_t j = 1; j < knots_.size(); ++j) {
      require(knots_[j] > knots_[j - 1], ErrorKind::NonIncreasingKnots,
              "knots must be strictly increasing (index " + std::to_string(j) + ")");
    }
    extended_.reserve(knots_.size() + 2 * (order_ - 1));
    for (int i = 0; i < order_ - 1; ++i) extended_.push_back(0.0);
    extended_.insert(extended_.end(), knots_.begin(), knots_.end());
    for (int i = 0; i < order_ - 1; ++i) extended_.push_back(1.0);
  }

  static SplineSpace equidistant(int order, int interior) {
    require(interior >= 0, ErrorKind::InvalidArgument, "interior knot count must be >= 0");
    std::vector<double> knots(interior + 2);
    const double h = 1.0 / (interior + 1);
    for (int j = 0; j <= interior; ++j) knots[j] = j * h;
    knots.back() = 1.0;
    return SplineSpace(order, std::move(knots));
  }

  /// Interior knots at the empirical quantiles j/(k0+1) of `x` (linear
  /// interpolation between order statistics). Ties that would collapse two
  /// knots raise NonIncreasingKnots; nothing is jittered.
  static SplineSpace quantiles(int order, int interior, std::span<const double> x) {
    require(interior >= 0, ErrorKind::InvalidArgument, "interior knot count must be >= 0");
    std::vector<double> sorted(x.begin(), x.end());
    std::sort(sorted.begin(), sorted.end());
    const auto distinct_inside = [&] {
      std::vector<double> inside;
      for (double v : sorted)
        if (v > 0.0 && v < 1.0 && (inside.empty() || v != inside.back())) inside.push_back(v);
      return inside.size();
    }();
    require(static_cast<int>(distinct_inside) >= interior, ErrorKind::NonIncreasingKnots,
            "fewer distinct interior design points than requested knots");
    std::vector<double> knots{0.0};
    const double count = static_cast<double>(sorted.size());
    for (int j = 1; j <= interior; ++j) {
      const double h = (count - 1.0) * j / (interior + 1.0);
      const auto lo = static_cast<std::size_t>(std::floor(h));
      const auto hi = std::min(lo + 1, sorted.size() - 1);
      const double q = sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
      require(q > knots.back() && q < 1.0, ErrorKind::NonIncreasingKnots,
              "quantile knot " + std::to_string(j) + " collapses onto its neighbour");
      knots.push_back(q);
    }
    knots.push_back(1.0);
    return SplineSpace(order, std::move(knots));
  }

  int order() const noexcept { return order_; }
  int degree() const noexcept { return order_ - 1; }
  int interior_knots() const noexcept { return static_cast<int>(knots_.size()) - 2; }
  int dimension() const noexcept { return order_ + interior_knots(); }
  const std::vector<double>& knots() const noexcept { return knots_; }
  /// Clamped knot sequence of length d + m.
  const std::vector<double>& extended_knots() const noexcept { return extended_; }

  /// Index i into extended_knots() with t_i <= x < t_{i+1}; x = 1 maps to the
  /// last non-empty span so evaluation is left-continuous at the right end.
  int span(double x) const {
    const int last = dimension() - 1;
    if (x >= 1.0) return last;
    const auto it = std::upper_bound(extended_.begin(), extended_.end(), x);
    return std::clamp(static_cast<int>(it - extended_.begin()) - 1, degree(), last);
  }

 private:
  int order_;
  std::vector<double> knots_;
  std::vector<double> extended_;
};

inline SplineSpace make_space(int order, int interior, KnotPlacement placement,
                              std::span<const double> x = {}) {
  return placement == KnotPlacement::Equidistant ? SplineSpace::equidistant(order, interior)
                                                 : SplineSpace::quantiles(order, interior, x);
}

namespace detail {

/// Derivatives 0..r of the m basis functions that are nonzero on `span`
/// (Cox-de Boor with derivative recursion). Row k holds D^k, column j holds
/// B_{span-degree+j}.
inline MatrixXd basis_derivatives(const SplineSpace& space, int span, double x, int r) {
  const int p = space.degree();
  const auto& t = space.extended_knots();
  MatrixXd ndu(p + 1, p + 1);
  std::vector<double> left(p + 1), right(p + 1);
  ndu(0, 0) = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int k = 0; k < j; ++k) {
      ndu(j, k) = right[k + 1] + left[j - k];  // lower triangle: knot differences
      const double temp = ndu(k, j - 1) / ndu(j, k);
      ndu(k, j) = saved + right[k + 1] * temp;
      saved = left[j - k] * temp;
    }
    ndu(j, j) = saved;
  }
  MatrixXd ders = MatrixXd::Zero(r + 1, p + 1);
  for (int j = 0; j <= p; ++j) ders(0, j) = ndu(j, p);
  MatrixXd a(2, p + 1);
  for (int k = 0; k <= p; ++k) {
    int s1 = 0, s2 = 1;
    a(0, 0) = 1.0;
    for (int order = 1; order <= r; ++order) {
      double d = 0.0;
      const int rk = k - order, pk = p - order;
      if (k >= order) {
        a(s2, 0) = a(s1, 0) / ndu(pk + 1, rk);
        d = a(s2, 0) * ndu(rk, pk);
      }
      const int j1 = rk >= -1 ? 1 : -rk;
      const int j2 = (k - 1 <= pk) ? order - 1 : p - k;
      for (int j = j1; j <= j2; ++j) {
        a(s2, j) = (a(s1, j) - a(s1, j - 1)) / ndu(pk + 1, rk + j);
        d += a(s2, j) * ndu(rk + j, pk);
      }
      if (k <= pk) {
        a(s2, order) = -a(s1, order - 1) / ndu(pk + 1, k);
        d += a(s2, order) * ndu(k, pk);
      }
      ders(order, k) = d;
      std::swap(s1, s2);
    }
  }
  double factor = p;
  for (int order = 1; order <= r; ++order) {
    ders.row(order) *= factor;
    factor *= (p - order);
  }
  return ders;
}

inline void check_derivative_order(const SplineSpace& space, int r) {
  require(r >= 0, ErrorKind::InvalidArgument, "derivative order must be >= 0");
  require(r < space.order(), ErrorKind::DerivativeOrderTooHigh,
          "derivative order " + std::to_string(r) + " >= spline order " + std::to_string(space.order()));
}

}  // namespace detail

/// (D^r B_1(x), ..., D^r B_d(x)). For r = m-1 this is the piecewise constant
/// weak derivative, right-continuous except at x = 1.
inline VectorXd eval_basis(const SplineSpace& space, double x, int r = 0) {
  detail::check_derivative_order(space, r);
  require(x >= 0.0 && x <= 1.0, ErrorKind::PointOutOfDomain, "x = " + std::to_string(x) + " outside [0,1]");
  const int span = space.span(x);
  const MatrixXd ders = detail::basis_derivatives(space, span, x, r);
  VectorXd out = VectorXd::Zero(space.dimension());
  out.segment(span - space.degree(), space.order()) = ders.row(r).transpose();
  return out;
}

/// Value (or r-th derivative) of the spline with B-spline coefficients `b` at x.
inline double eval_spline(const SplineSpace& space, const VectorXd& b, double x, int r = 0) {
  detail::check_derivative_order(space, r);
  require(b.size() == space.dimension(), ErrorKind::DimensionMismatch, "coefficient length != d");
  require(x >= 0.0 && x <= 1.0, ErrorKind::PointOutOfDomain, "x outside [0,1]");
  const int span = space.span(x);
  const MatrixXd ders = detail::basis_derivatives(space, span, x, r);
  return ders.row(r).dot(b.segment(span - space.degree(), space.order()));
}

struct DesignMatrix {
  MatrixXd values;   // n x d, values(i, j) = B_j(x_i)
  VectorXd points;   // x_1..x_n

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

inline DesignMatrix design_matrix(const SplineSpace& space, std::span<const double> x, int r = 0) {
  detail::check_derivative_order(space, r);
  DesignMatrix out{MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), space.dimension()),
                   VectorXd(static_cast<Eigen::Index>(x.size()))};
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    require(xi >= 0.0 && xi <= 1.0, ErrorKind::PointOutOfDomain,
            "design point " + std::to_string(i) + " = " + std::to_string(xi) + " outside [0,1]");
    const int span = space.span(xi);
    const MatrixXd ders = detail::basis_derivatives(space, span, xi, r);
    const auto row = static_cast<Eigen::Index>(i);
    out.values.block(row, span - space.degree(), 1, space.order()) = ders.row(r);
    out.points(row) = xi;
  }
  return out;
}

inline DesignMatrix design_matrix(const SplineSpace& space, const VectorXd& x, int r = 0) {
  return design_matrix(space, std::span<const double>(x.data(), static_cast<std::size_t>(x.size())), r);
}

/// G_B = B^T B / n.
inline MatrixXd gramian(const DesignMatrix& design) {
  const auto n = static_cast<double>(design.rows());
  require(n > 0, ErrorKind::DimensionMismatch, "gramian of an empty design");
  MatrixXd g = MatrixXd::Zero(design.cols(), design.cols());
  g.selfadjointView<Eigen::Lower>().rankUpdate(design.values.transpose(), 1.0 / n);
  return g.selfadjointView<Eigen::Lower>();
}

struct PenaltyMatrix {
  MatrixXd values;  // R^(q), d x d
  int derivative_order = 0;
};

/// R[j][k] = int_0^1 D^q B_j D^q B_k dx, by (m - q)-point Gauss-Legendre on
/// every knot cell (exact: the integrand has degree 2(m-1-q) there).
inline PenaltyMatrix penalty_matrix(const SplineSpace& space, int q) {
  require(q >= 1, ErrorKind::InvalidArgument, "penalty order must be >= 1");
  detail::check_derivative_order(space, q);
  const int d = space.dimension();
  const int m = space.order();
  const auto rule = quad::gauss_legendre(m - q);
  PenaltyMatrix out{MatrixXd::Zero(d, d), q};
  const auto& knots = space.knots();
  for (std::size_t cell = 0; cell + 1 < knots.size(); ++cell) {
    const double a = knots[cell], b = knots[cell + 1];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    const int span = space.span(mid);
    const int first = span - space.degree();
    for (std::size_t g = 0; g < rule.nodes.size(); ++g) {
      const double x = mid + half * rule.nodes[g];
      const VectorXd dq = detail::basis_derivatives(space, span, x, q).row(q).transpose();
      out.values.block(first, first, m, m).noalias() += (rule.weights[g] * half) * dq * dq.transpose();
    }
  }
  out.values = 0.5 * (out.values + out.values.transpose()).eval();
  return out;
}

/// B-spline coefficients of the monomial x^k (k <= m-1), exact via Marsden's
/// identity: coefficient j is the elementary symmetric polynomial e_k of the
/// knots t_{j+1..j+m-1}, divided by binomial(m-1, k).
inline VectorXd monomial_coefficients(const SplineSpace& space, int power) {
  require(power >= 0 && power < space.order(), ErrorKind::DerivativeOrderTooHigh,
          "monomial degree must be below the spline order");
  const int p = space.degree();
  const auto& t = space.extended_knots();
  VectorXd out(space.dimension());
  double binom = 1.0;
  for (int i = 1; i <= power; ++i) binom = binom * (p - power + i) / i;
  for (int j = 0; j < space.dimension(); ++j) {
    std::vector<double> e(power + 1, 0.0);
    e[0] = 1.0;
    for (int i = 1; i <= p; ++i) {
      const double knot = t[j + i];
      for (int k = std::min(i, power); k >= 1; --k) e[k] += knot * e[k - 1];
    }
    out(j) = e[power] / binom;
  }
  return out;
}

}  // namespace penspline
