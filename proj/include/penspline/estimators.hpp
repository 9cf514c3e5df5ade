#pragma once

// Frequentist estimators on a spline space: the O-splines (penalized least
// squares) estimator, the truncated DR estimator and its residual variance.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "penspline/dr_basis.hpp"
#include "penspline/error.hpp"
#include "penspline/random.hpp"
#include "penspline/spline_basis.hpp"

namespace penspline {

enum class CoefficientBasis { BSpline, DemmlerReinsch };

struct Smoothing {
  double lambda;
};
struct Cutoff {
  int t;
};

struct FitResult {
  VectorXd coefficients;
  VectorXd fitted_values;
  CoefficientBasis basis = CoefficientBasis::BSpline;
  std::variant<Smoothing, Cutoff> meta = Smoothing{0.0};
};

/// b = (B^T B + lambda R)^{-1} B^T Y.
///
/// Solved as the least-squares problem min ||[B; sqrt(lambda) C] b - [Y; 0]||
/// with C^T C = R, by Householder QR. The normal equations square the
/// condition number, which for lambda ~ 1e12 wipes out the unpenalized
/// polynomial part of the fit. A PenaltyMatrix with derivative_order 0 is
/// treated as full rank.
inline FitResult osplines_fit(const DesignMatrix& design, const PenaltyMatrix& penalty, const VectorXd& y,
                              double lambda) {
  require(design.rows() == y.size(), ErrorKind::DimensionMismatch, "osplines_fit: Y length != n");
  require(penalty.values.rows() == design.cols(), ErrorKind::DimensionMismatch, "osplines_fit: R size != d");
  require(lambda >= 0.0, ErrorKind::InvalidArgument, "smoothing parameter must be >= 0");
  const Eigen::Index n = design.rows(), d = design.cols();
  MatrixXd stacked(n + d, d);
  stacked.topRows(n) = design.values;
  if (lambda > 0.0) {
    // R has rank d - q exactly; its q smallest computed eigenvalues are
    // roundoff, and lambda would turn them into a penalty on polynomials.
    const auto eig = jacobi_eigen(penalty.values);
    VectorXd root = eig.values.cwiseMax(0.0).cwiseSqrt();
    root.head(std::min<Eigen::Index>(penalty.derivative_order, d)).setZero();
    stacked.bottomRows(d) = (std::sqrt(lambda) * root).asDiagonal() * eig.vectors.transpose();
  } else {
    stacked.bottomRows(d).setZero();
  }
  VectorXd rhs = VectorXd::Zero(n + d);
  rhs.head(n) = y;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(stacked);
  require(qr.rank() == d, ErrorKind::SingularSystem, "B^T B + lambda R is singular");
  FitResult out;
  out.coefficients = qr.solve(rhs);
  out.fitted_values = design.values * out.coefficients;
  out.basis = CoefficientBasis::BSpline;
  out.meta = Smoothing{lambda};
  return out;
}

/// w_j = 1 / (1 + lambda gamma_j / n).
inline VectorXd shrinkage_weights(const VectorXd& gamma, double lambda, Eigen::Index n) {
  require(n >= 1, ErrorKind::InvalidArgument, "sample size must be >= 1");
  return (1.0 + (lambda / static_cast<double>(n)) * gamma.array()).inverse().matrix();
}

/// Projection of Y onto the first t DR basis functions.
inline FitResult truncated_dr_fit(const DrBasis& basis, const VectorXd& y, int t) {
  require(t >= 1 && t <= basis.dimension(), ErrorKind::CutoffOutOfRange,
          "cutoff t = " + std::to_string(t) + " outside 1..d");
  const VectorXd u_hat = dr_coords(basis, y);
  FitResult out;
  out.coefficients = VectorXd::Zero(basis.dimension());
  out.coefficients.head(t) = u_hat.head(t);
  out.fitted_values = basis.design.leftCols(t) * u_hat.head(t);
  out.basis = CoefficientBasis::DemmlerReinsch;
  out.meta = Cutoff{t};
  return out;
}

/// O-splines fit expressed through the DR shrinkage form Z (w .* u_hat).
inline FitResult dr_shrinkage_fit(const DrBasis& basis, const VectorXd& y, double lambda) {
  const VectorXd u_hat = dr_coords(basis, y);
  const VectorXd w = shrinkage_weights(basis.eigenvalues, lambda, y.size());
  FitResult out;
  out.coefficients = w.cwiseProduct(u_hat);
  out.fitted_values = basis.design * out.coefficients;
  out.basis = CoefficientBasis::DemmlerReinsch;
  out.meta = Smoothing{lambda};
  return out;
}

/// t = q + ceil(n^{1/(2 m0 + 1)}), with the root computed exactly in integers
/// so perfect powers (1024^{1/5} = 4) do not round up.
inline int theorem_cutoff(std::int64_t n, int q, int m0) {
  require(n >= 1 && m0 >= 1, ErrorKind::InvalidArgument, "theorem_cutoff needs n >= 1 and m0 >= 1");
  const int power = 2 * m0 + 1;
  auto reaches = [&](std::int64_t k) {  // k^power >= n, without overflow
    long double acc = 1.0L;
    for (int i = 0; i < power; ++i) {
      acc *= static_cast<long double>(k);
      if (acc >= static_cast<long double>(n)) return true;
    }
    return acc >= static_cast<long double>(n);
  };
  auto k = static_cast<std::int64_t>(std::floor(std::pow(static_cast<double>(n), 1.0 / power)));
  k = std::max<std::int64_t>(k, 1);
  while (!reaches(k)) ++k;
  while (k > 1 && reaches(k - 1)) --k;
  return q + static_cast<int>(k);
}

/// ||Y - f_t||^2 / (n - t) for a truncated DR fit.
inline double sigma2_hat(const VectorXd& y, const FitResult& fit) {
  const auto* cut = std::get_if<Cutoff>(&fit.meta);
  require(cut != nullptr, ErrorKind::InvalidArgument, "sigma2_hat needs a truncated DR fit");
  require(y.size() == fit.fitted_values.size(), ErrorKind::DimensionMismatch, "sigma2_hat: length mismatch");
  require(cut->t < y.size(), ErrorKind::DegreesOfFreedomExhausted,
          "cutoff t = " + std::to_string(cut->t) + " leaves no residual degrees of freedom");
  return (y - fit.fitted_values).squaredNorm() / static_cast<double>(y.size() - cut->t);
}

struct Prop5Samples {
  std::vector<double> truncated;  // ||f_t - f||_n^2
  std::vector<double> penalized;  // ||f_lambda - f||_n^2
};

/// Monte Carlo sampling distribution of the squared empirical error of the
/// truncated DR and O-splines estimators when Y ~ N(f^n, sigma2 I) and f is a
/// spline. Replicate r draws from the stream (seed, r).
inline Prop5Samples simulate_prop5(const DrBasis& basis, const VectorXd& f_values, double sigma2, int t,
                                   double lambda, int reps, std::uint64_t seed) {
  require(reps >= 1, ErrorKind::InvalidArgument, "reps must be >= 1");
  require(sigma2 >= 0.0, ErrorKind::InvalidArgument, "sigma2 must be >= 0");
  require(t >= 1 && t <= basis.dimension(), ErrorKind::CutoffOutOfRange, "cutoff outside 1..d");
  const auto n = basis.samples();
  require(f_values.size() == n, ErrorKind::DimensionMismatch, "f values length != n");
  const double sigma = std::sqrt(sigma2);
  const VectorXd w = shrinkage_weights(basis.eigenvalues, lambda, n);
  Prop5Samples out;
  out.truncated.reserve(static_cast<std::size_t>(reps));
  out.penalized.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    Rng rng(seed, {static_cast<std::uint64_t>(r)});
    const VectorXd y = f_values + sigma * rng.normal_vector(n);
    const VectorXd u_hat = dr_coords(basis, y);
    const VectorXd f_t = basis.design.leftCols(t) * u_hat.head(t);
    const VectorXd f_lambda = basis.design * w.cwiseProduct(u_hat);
    out.truncated.push_back((f_t - f_values).squaredNorm() / static_cast<double>(n));
    out.penalized.push_back((f_lambda - f_values).squaredNorm() / static_cast<double>(n));
  }
  return out;
}

/// Draws from sigma2/n chi2(t) + sum_{j>t} u_j^2.
inline std::vector<double> prop5_reference_truncated(const VectorXd& u, double sigma2, Eigen::Index n, int t,
                                                     int reps, Rng& rng) {
  const double bias = u.tail(u.size() - t).squaredNorm();
  std::vector<double> out(static_cast<std::size_t>(reps));
  for (auto& v : out) v = sigma2 / static_cast<double>(n) * rng.chi_squared(t) + bias;
  return out;
}

/// Draws from sigma2/n sum_j w_j^2 chi2_1(nc_j), nc_j = n u_j^2 (w_j - 1)^2 / (sigma2 w_j^2).
/// Unpenalized directions (w_j = 1) have noncentrality exactly 0.
inline std::vector<double> prop5_reference_penalized(const VectorXd& u, const VectorXd& gamma, double sigma2,
                                                     Eigen::Index n, double lambda, int reps, Rng& rng) {
  const VectorXd w = shrinkage_weights(gamma, lambda, n);
  const double nn = static_cast<double>(n);
  VectorXd shift(u.size());  // sqrt of the noncentrality
  for (Eigen::Index j = 0; j < u.size(); ++j)
    shift(j) = w(j) == 1.0 ? 0.0 : std::sqrt(nn / sigma2) * std::abs(u(j)) * (1.0 - w(j)) / w(j);
  std::vector<double> out(static_cast<std::size_t>(reps));
  for (auto& v : out) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < u.size(); ++j) {
      const double z = rng.normal() + shift(j);
      s += w(j) * w(j) * z * z;
    }
    v = sigma2 / nn * s;
  }
  return out;
}

}  // namespace penspline
