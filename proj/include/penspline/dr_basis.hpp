#pragma once

// Demmler-Reinsch bases: spline bases orthonormal in the empirical inner
// product <f,g>_n and orthogonal in the roughness form <D^q f, D^q g>.
// Built from the generalized symmetric eigenproblem R a = gamma G a.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "penspline/error.hpp"
#include "penspline/spline_basis.hpp"

namespace penspline {

struct SymmetricEigen {
  VectorXd values;   // ascending
  MatrixXd vectors;  // columns, orthonormal
  int sweeps = 0;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Iterates until the
/// off-diagonal Frobenius norm drops below `tol` times the full Frobenius norm.
inline SymmetricEigen jacobi_eigen(MatrixXd a, double tol = 1e-12, int max_sweeps = 100) {
  const Eigen::Index d = a.rows();
  require(a.cols() == d, ErrorKind::DimensionMismatch, "jacobi_eigen needs a square matrix");
  MatrixXd v = MatrixXd::Identity(d, d);
  const double total = a.norm();
  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  int sweep = 0;
  for (; sweep < max_sweeps && off_norm() > tol * total; ++sweep) {
    for (Eigen::Index p = 0; p < d - 1; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // A <- J^T A J with J the rotation in the (p, q) plane.
        for (Eigen::Index k = 0; k < d; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return a(i, i) < a(j, j); });
  SymmetricEigen out{VectorXd(d), MatrixXd(d, d), sweep};
  for (Eigen::Index j = 0; j < d; ++j) {
    out.values(j) = a(order[j], order[j]);
    out.vectors.col(j) = v.col(order[j]);
  }
  return out;
}

struct DrBasis {
  MatrixXd transition;   // A (d x d), columns = generalized eigenvectors
  MatrixXd design;       // Z = B A (n x d); empty if built without a design
  VectorXd eigenvalues;  // gamma_1 <= ... <= gamma_d, first q exactly 0
  int penalty_order = 0;

  Eigen::Index dimension() const { return transition.cols(); }
  Eigen::Index samples() const { return design.rows(); }
};

namespace detail {

/// Flip each column so its entry of largest magnitude is positive.
inline void canonical_signs(MatrixXd& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    Eigen::Index idx = 0;
    a.col(j).cwiseAbs().maxCoeff(&idx);
    if (a(idx, j) < 0.0) a.col(j) *= -1.0;
  }
}

}  // namespace detail

/// DR transition matrix and eigenvalues from the Gramian G and penalty R.
///
/// Cholesky G = L L^T, Jacobi on L^{-1} R L^{-T} = V Gamma V^T, A = L^{-T} V.
/// The first q columns are then replaced by the G-orthonormalized B-spline
/// coefficients of 1, x, ..., x^{q-1} (any orthonormal polynomial basis spans
/// the same null block), and their eigenvalues are set to exactly 0. The
/// space supplies the knots needed for the monomial coefficients.
inline DrBasis dr_basis(const MatrixXd& gram, const PenaltyMatrix& penalty, const SplineSpace& space) {
  const Eigen::Index d = gram.rows();
  const int q = penalty.derivative_order;
  require(gram.cols() == d && penalty.values.rows() == d && penalty.values.cols() == d &&
              space.dimension() == d,
          ErrorKind::DimensionMismatch, "Gramian, penalty and spline space sizes differ");
  require(q >= 1 && q < d, ErrorKind::InvalidArgument, "penalty order out of range");

  // Explicit Cholesky so the pivot threshold is ours: a pivot below
  // 1e-12 * trace(G)/d signals a rank-deficient design.
  const double pivot_floor = 1e-12 * gram.trace() / static_cast<double>(d);
  MatrixXd l = MatrixXd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double diag = gram(j, j) - l.row(j).head(j).squaredNorm();
    if (!(diag > pivot_floor)) {
      fail(ErrorKind::GramianNotPositiveDefinite,
           "Cholesky pivot " + std::to_string(diag) + " at column " + std::to_string(j) +
               "; the design has fewer than d informative points");
    }
    l(j, j) = std::sqrt(diag);
    for (Eigen::Index i = j + 1; i < d; ++i)
      l(i, j) = (gram(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
  }
  const auto lower = l.triangularView<Eigen::Lower>();
  MatrixXd reduced = lower.solve(penalty.values);
  reduced = lower.solve(reduced.transpose()).transpose();
  reduced = 0.5 * (reduced + reduced.transpose()).eval();

  const auto eig = jacobi_eigen(reduced);
  DrBasis out;
  out.penalty_order = q;
  out.transition = l.transpose().triangularView<Eigen::Upper>().solve(eig.vectors);
  out.eigenvalues = eig.values.cwiseMax(0.0);
  detail::canonical_signs(out.transition);

  // Polynomial block: Gram-Schmidt (twice) on monomial coefficients in the
  // G inner product, which is the empirical inner product of the functions.
  MatrixXd poly(d, q);
  for (int k = 0; k < q; ++k) poly.col(k) = monomial_coefficients(space, k);
  for (int pass = 0; pass < 2; ++pass) {
    for (int k = 0; k < q; ++k) {
      for (int j = 0; j < k; ++j) poly.col(k) -= (poly.col(j).dot(gram * poly.col(k))) * poly.col(j);
      poly.col(k) /= std::sqrt(poly.col(k).dot(gram * poly.col(k)));
    }
  }
  detail::canonical_signs(poly);
  // Only a genuine roughness penalty of `space` annihilates the polynomials;
  // for any other (R, G) pair the solver's own null block is kept.
  const double scale = penalty.values.norm();
  bool polynomial_null = true;
  for (int k = 0; k < q; ++k)
    polynomial_null = polynomial_null && (penalty.values * poly.col(k)).norm() <= 1e-8 * scale * poly.col(k).norm();
  if (polynomial_null) out.transition.leftCols(q) = poly;
  out.eigenvalues.head(q).setZero();
  return out;
}

/// DR basis paired with its design: Z = B A.
inline DrBasis dr_basis(const DesignMatrix& design, const PenaltyMatrix& penalty, const SplineSpace& space) {
  DrBasis out = dr_basis(gramian(design), penalty, space);
  out.design = design.values * out.transition;
  return out;
}

/// Least-squares DR coefficients Z^T v / n of a vector of n function values.
inline VectorXd dr_coords(const DrBasis& basis, const VectorXd& values) {
  require(basis.design.rows() == values.size(), ErrorKind::DimensionMismatch,
          "dr_coords: value vector length does not match the DR design");
  return basis.design.transpose() * values / static_cast<double>(values.size());
}

struct DrNorms {
  double empirical_sq;  // ||f||_n^2
  double roughness_sq;  // ||D^q f||^2
};

inline DrNorms dr_norms(const DrBasis& basis, const VectorXd& u) {
  require(u.size() == basis.dimension(), ErrorKind::DimensionMismatch, "dr_norms: coefficient length != d");
  const int q = basis.penalty_order;
  const auto tail = basis.dimension() - q;
  return {u.squaredNorm(),
          (basis.eigenvalues.tail(tail).array() * u.tail(tail).array().square()).sum()};
}

}  // namespace penspline
