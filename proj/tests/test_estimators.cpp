#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <random>

#include "penspline/estimators.hpp"
#include "penspline/stats.hpp"

using namespace penspline;

namespace {

struct Setup {
  SplineSpace space;
  VectorXd x;
  DesignMatrix design;
  PenaltyMatrix penalty;
  DrBasis dr;
};

Setup make_setup(int n, int interior, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto space = SplineSpace::equidistant(4, interior);
  VectorXd x(n);
  for (auto& v : x) v = u(gen);
  auto design = design_matrix(space, x);
  auto penalty = penalty_matrix(space, 2);
  auto dr = dr_basis(design, penalty, space);
  return {space, x, design, penalty, dr};
}

VectorXd noisy(const VectorXd& f, double sd, std::mt19937_64& gen) {
  std::normal_distribution<double> z;
  VectorXd y = f;
  for (auto& v : y) v += sd * z(gen);
  return y;
}

}  // namespace

TEST(OSplines, ZeroPenaltyIsLeastSquares) {
  auto s = make_setup(200, 8, 1);
  std::mt19937_64 gen(2);
  const VectorXd y = noisy((2.0 * std::numbers::pi * s.x.array()).sin().matrix(), 0.3, gen);
  const auto fit = osplines_fit(s.design, s.penalty, y, 0.0);
  const VectorXd ols = s.design.values.colPivHouseholderQr().solve(y);
  EXPECT_LT((fit.coefficients - ols).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((fit.fitted_values - s.design.values * fit.coefficients).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(OSplines, HugePenaltyGivesLinearFit) {
  auto s = make_setup(200, 8, 3);
  std::mt19937_64 gen(4);
  const VectorXd y = noisy((2.0 * std::numbers::pi * s.x.array()).sin().matrix(), 0.3, gen);
  const auto fit = osplines_fit(s.design, s.penalty, y, 1e12);
  MatrixXd x1(200, 2);
  x1.col(0).setOnes();
  x1.col(1) = s.x;
  const VectorXd line = x1 * x1.colPivHouseholderQr().solve(y);
  EXPECT_LT((fit.fitted_values - line).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(OSplines, DrShrinkageFormAgrees) {
  auto s = make_setup(150, 10, 5);
  std::mt19937_64 gen(6);
  std::uniform_real_distribution<double> loglam(-3.0, 4.0);
  for (int trial = 0; trial < 20; ++trial) {
    const VectorXd y = noisy((3.0 * s.x.array()).cos().matrix(), 0.5, gen);
    const double lambda = std::pow(10.0, loglam(gen));
    const auto direct = osplines_fit(s.design, s.penalty, y, lambda);
    const auto viadr = dr_shrinkage_fit(s.dr, y, lambda);
    EXPECT_LT((direct.fitted_values - viadr.fitted_values).cwiseAbs().maxCoeff(), 1e-7) << lambda;
  }
}

TEST(Shrinkage, Examples) {
  VectorXd gamma(4);
  gamma << 0.0, 0.0, 1.0, 5.0;
  EXPECT_EQ(shrinkage_weights(gamma, 0.0, 10), VectorXd::Ones(4));
  const VectorXd w = shrinkage_weights(gamma, 10.0, 10);
  EXPECT_DOUBLE_EQ(w(0), 1.0);
  EXPECT_DOUBLE_EQ(w(1), 1.0);
  EXPECT_DOUBLE_EQ(w(2), 0.5);
  EXPECT_LT(w(3), w(2));
  EXPECT_GT(w(3), 0.0);
}

TEST(Truncated, Examples) {
  auto s = make_setup(300, 8, 7);
  const int d = 12;
  std::mt19937_64 gen(8);
  const VectorXd y = noisy(VectorXd::Zero(300), 1.0, gen);
  const auto full = truncated_dr_fit(s.dr, y, d);
  const VectorXd ls = s.design.values * s.design.values.colPivHouseholderQr().solve(y);
  EXPECT_LT((full.fitted_values - ls).cwiseAbs().maxCoeff(), 1e-8);

  const VectorXd z3 = s.dr.design.col(2);
  EXPECT_LT((truncated_dr_fit(s.dr, z3, 5).fitted_values - z3).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(truncated_dr_fit(s.dr, s.dr.design.col(d - 1), 5).fitted_values.cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_THROW(truncated_dr_fit(s.dr, y, 0), Error);
  EXPECT_THROW(truncated_dr_fit(s.dr, y, d + 1), Error);

  double prev = std::numeric_limits<double>::infinity();
  for (int t = 1; t <= d; ++t) {
    const double res = (y - truncated_dr_fit(s.dr, y, t).fitted_values).norm();
    EXPECT_LE(res, prev + 1e-12);
    prev = res;
  }
}

TEST(Cutoff, Examples) {
  EXPECT_EQ(theorem_cutoff(1024, 2, 2), 6);
  EXPECT_EQ(theorem_cutoff(1, 2, 2), 3);
  EXPECT_EQ(theorem_cutoff(1, 1, 3), 2);
  EXPECT_EQ(theorem_cutoff(100000, 2, 2), 12);
  EXPECT_EQ(theorem_cutoff(100001, 2, 2), 13);
  EXPECT_EQ(theorem_cutoff(1025, 2, 2), 7);
  EXPECT_EQ(theorem_cutoff(243, 0, 2), 3);
  EXPECT_EQ(theorem_cutoff(244, 0, 2), 4);
}

TEST(Sigma2Hat, Examples) {
  auto s = make_setup(100, 6, 9);
  const VectorXd inside = s.dr.design.leftCols(4) * VectorXd::LinSpaced(4, 1.0, 2.0);
  EXPECT_NEAR(sigma2_hat(inside, truncated_dr_fit(s.dr, inside, 4)), 0.0, 1e-20);

  // A residual direction orthogonal to the whole spline space.
  std::mt19937_64 gen(10);
  VectorXd e = noisy(VectorXd::Zero(100), 1.0, gen);
  e -= s.dr.design * (s.dr.design.transpose() * e / 100.0);
  e.normalize();
  const VectorXd y = inside + 3.0 * e;
  EXPECT_NEAR(sigma2_hat(y, truncated_dr_fit(s.dr, y, 4)), 9.0 / 96.0, 1e-12);

  FitResult lam = dr_shrinkage_fit(s.dr, y, 1.0);
  EXPECT_THROW(sigma2_hat(y, lam), Error);
}

TEST(Sigma2Hat, UnbiasedOverReplicates) {
  auto s = make_setup(2000, 12, 11);
  const VectorXd f = (2.0 * std::numbers::pi * s.x.array()).sin().matrix();
  // Use the spline projection of f so the model is exactly correct.
  const VectorXd fs = s.dr.design * dr_coords(s.dr, f);
  std::mt19937_64 gen(12);
  std::vector<double> est;
  for (int r = 0; r < 500; ++r) {
    const VectorXd y = noisy(fs, 0.5, gen);
    est.push_back(sigma2_hat(y, truncated_dr_fit(s.dr, y, 16)));
  }
  const double se = std::sqrt(stats::variance(est) / 500.0);
  EXPECT_LT(std::abs(stats::mean(est) - 0.25), 3.0 * se);
}

TEST(Prop5, NullFunctionMatchesChiSquare) {
  auto s = make_setup(120, 8, 13);
  const int d = 12;
  const double sigma2 = 0.3;
  const auto samples = simulate_prop5(s.dr, VectorXd::Zero(120), sigma2, d, 0.0, 5000, 99);
  boost::math::chi_squared chi(d);
  auto cdf = [&](double v) { return boost::math::cdf(chi, v * 120.0 / sigma2); };
  EXPECT_LT(stats::ks_one_sample(samples.truncated, cdf), 0.03);
  EXPECT_LT(stats::ks_one_sample(samples.penalized, cdf), 0.03);
}

TEST(Prop5, MeansMatchTheory) {
  auto s = make_setup(150, 10, 14);
  const int d = 14, t = 6;
  const double sigma2 = 0.2;
  std::mt19937_64 gen(15);
  std::normal_distribution<double> z;
  VectorXd u(d);
  for (auto& v : u) v = 0.3 * z(gen);

  VectorXd head_only = u;
  head_only.tail(d - t).setZero();
  auto check = [&](const VectorXd& coef) {
    const auto samples = simulate_prop5(s.dr, s.dr.design * coef, sigma2, t, 1.0, 4000, 7);
    const double expected = sigma2 * t / 150.0 + coef.tail(d - t).squaredNorm();
    const double se = std::sqrt(stats::variance(samples.truncated) / 4000.0);
    EXPECT_LT(std::abs(stats::mean(samples.truncated) - expected), 3.0 * se);
  };
  check(head_only);
  check(u);
}

TEST(Prop5, ReplicatesAreDeterministic) {
  auto s = make_setup(80, 5, 16);
  const auto a = simulate_prop5(s.dr, VectorXd::Zero(80), 1.0, 4, 2.0, 50, 5);
  const auto b = simulate_prop5(s.dr, VectorXd::Zero(80), 1.0, 4, 2.0, 50, 5);
  EXPECT_EQ(a.truncated, b.truncated);
  EXPECT_EQ(a.penalized, b.penalized);
}
