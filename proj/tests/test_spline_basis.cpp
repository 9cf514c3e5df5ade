#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "penspline/spline_basis.hpp"

using namespace penspline;

namespace {

// Textbook recursive definition on the extended knot vector, with the
// convention that the last nonempty interval is closed on the right.
double naive_basis(const std::vector<double>& t, int i, int p, double x) {
  if (p == 0) {
    const bool last = t[i + 1] == t.back() && t[i] < t[i + 1];
    if (last) return (x >= t[i] && x <= t[i + 1]) ? 1.0 : 0.0;
    return (x >= t[i] && x < t[i + 1]) ? 1.0 : 0.0;
  }
  double out = 0.0;
  if (t[i + p] > t[i]) out += (x - t[i]) / (t[i + p] - t[i]) * naive_basis(t, i, p - 1, x);
  if (t[i + p + 1] > t[i + 1]) out += (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]) * naive_basis(t, i + 1, p - 1, x);
  return out;
}

double naive_derivative(const std::vector<double>& t, int i, int p, double x, int r) {
  if (r == 0) return naive_basis(t, i, p, x);
  double out = 0.0;
  if (t[i + p] > t[i]) out += p / (t[i + p] - t[i]) * naive_derivative(t, i, p - 1, x, r - 1);
  if (t[i + p + 1] > t[i + 1]) out -= p / (t[i + p + 1] - t[i + 1]) * naive_derivative(t, i + 1, p - 1, x, r - 1);
  return out;
}

SplineSpace random_space(std::mt19937_64& gen, int order, int interior) {
  std::uniform_real_distribution<double> u(0.02, 0.98);
  std::vector<double> inner(interior);
  for (;;) {
    for (auto& v : inner) v = u(gen);
    std::sort(inner.begin(), inner.end());
    bool ok = true;
    for (int j = 1; j < interior; ++j) ok = ok && inner[j] - inner[j - 1] > 1e-3;
    if (ok) break;
  }
  std::vector<double> knots{0.0};
  knots.insert(knots.end(), inner.begin(), inner.end());
  knots.push_back(1.0);
  return SplineSpace(order, knots);
}

}  // namespace

TEST(SplineSpace, EquidistantKnotsAndDimension) {
  const auto s = SplineSpace::equidistant(4, 8);
  EXPECT_EQ(s.dimension(), 12);
  ASSERT_EQ(s.knots().size(), 10u);
  for (int j = 0; j <= 9; ++j) EXPECT_NEAR(s.knots()[j], j / 9.0, 1e-15);
  EXPECT_EQ(SplineSpace::equidistant(2, 0).dimension(), 2);
  EXPECT_EQ(SplineSpace::equidistant(4, 20).dimension(), 24);
}

TEST(SplineSpace, RejectsBadKnots) {
  EXPECT_THROW(SplineSpace(4, {0.0, 0.5, 0.5, 1.0}), Error);
  EXPECT_THROW(SplineSpace(4, {0.0, 0.7, 0.3, 1.0}), Error);
  EXPECT_THROW(SplineSpace(4, {0.1, 1.0}), Error);
  try {
    SplineSpace(4, {0.0, 0.5, 0.5, 1.0});
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonIncreasingKnots);
  }
}

TEST(SplineSpace, QuantileKnots) {
  std::vector<double> x;
  for (int i = 0; i <= 100; ++i) x.push_back(i / 100.0);
  const auto s = SplineSpace::quantiles(4, 3, x);
  ASSERT_EQ(s.knots().size(), 5u);
  EXPECT_NEAR(s.knots()[1], 0.25, 1e-12);
  EXPECT_NEAR(s.knots()[2], 0.50, 1e-12);
  EXPECT_NEAR(s.knots()[3], 0.75, 1e-12);

  std::vector<double> tied(50, 0.5);
  tied.push_back(0.1);
  try {
    SplineSpace::quantiles(4, 3, tied);
    FAIL() << "tied data should not yield distinct knots";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonIncreasingKnots);
  }
}

TEST(EvalBasis, MatchesRecursiveDefinition) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int order : {2, 3, 4, 5}) {
    const auto s = random_space(gen, order, 6);
    const auto& t = s.extended_knots();
    for (int trial = 0; trial < 50; ++trial) {
      const double x = trial == 0 ? 0.0 : (trial == 1 ? 1.0 : u(gen));
      for (int r = 0; r < order; ++r) {
        const VectorXd v = eval_basis(s, x, r);
        for (int j = 0; j < s.dimension(); ++j) {
          // Near x = 1 the top derivative is left-continuous; the oracle
          // handles that through its closed last interval only for r = 0.
          if (r == order - 1 && x == 1.0) continue;
          EXPECT_NEAR(v(j), naive_derivative(t, j, order - 1, x, r), 1e-9 * std::pow(50.0, r))
              << "order " << order << " r " << r << " j " << j << " x " << x;
        }
      }
    }
  }
}

TEST(EvalBasis, PartitionOfUnityAndBoundary) {
  const auto s = SplineSpace::equidistant(4, 8);
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) EXPECT_NEAR(eval_basis(s, u(gen)).sum(), 1.0, 1e-12);
  const VectorXd v0 = eval_basis(s, 0.0);
  EXPECT_DOUBLE_EQ(v0(0), 1.0);
  EXPECT_DOUBLE_EQ(v0.tail(11).cwiseAbs().sum(), 0.0);
  const VectorXd v1 = eval_basis(s, 1.0);
  EXPECT_DOUBLE_EQ(v1(11), 1.0);
  EXPECT_THROW(eval_basis(s, 0.5, 4), Error);
}

TEST(EvalBasis, CubicReproductionDerivative) {
  const auto s = SplineSpace::equidistant(4, 8);
  const VectorXd b = monomial_coefficients(s, 3);
  EXPECT_NEAR(eval_spline(s, b, 0.5, 1), 0.75, 1e-10);
  EXPECT_NEAR(eval_spline(s, b, 0.3, 0), 0.027, 1e-12);
}

TEST(Monomials, PolynomialReproduction) {
  std::mt19937_64 gen(5);
  for (int order : {2, 3, 4, 6}) {
    const auto s = random_space(gen, order, 7);
    for (int k = 0; k < order; ++k) {
      const VectorXd b = monomial_coefficients(s, k);
      double worst = 0.0;
      for (int g = 0; g <= 1000; ++g) {
        const double x = g / 1000.0;
        worst = std::max(worst, std::abs(eval_spline(s, b, x) - std::pow(x, k)));
      }
      EXPECT_LT(worst, 1e-9) << "order " << order << " power " << k;
    }
  }
}

TEST(DesignMatrix, RowsAndErrors) {
  const auto s = SplineSpace::equidistant(4, 8);
  std::vector<double> one{0.0};
  const auto b1 = design_matrix(s, one);
  EXPECT_EQ(b1.rows(), 1);
  EXPECT_DOUBLE_EQ(b1.values(0, 0), 1.0);

  VectorXd x(1000);
  for (int i = 0; i < 1000; ++i) x(i) = (i + 1) / 1000.0;
  const auto b = design_matrix(s, x);
  EXPECT_EQ(b.cols(), 12);
  EXPECT_LT((b.values.rowwise().sum().array() - 1.0).abs().maxCoeff(), 1e-12);
  Eigen::FullPivLU<MatrixXd> lu(b.values);
  EXPECT_EQ(lu.rank(), 12);

  std::vector<double> bad{0.5, 1.2};
  try {
    design_matrix(s, bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PointOutOfDomain);
  }
}

TEST(Gramian, DefinitionAndRankDeficiency) {
  const auto s = SplineSpace::equidistant(4, 8);
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd x(40);
  for (auto& v : x) v = u(gen);
  const auto b = design_matrix(s, x);
  const MatrixXd g = gramian(b);
  for (int j = 0; j < 12; ++j)
    for (int k = 0; k < 12; ++k) EXPECT_NEAR(g(j, k), b.values.col(j).dot(b.values.col(k)) / 40.0, 1e-15);

  VectorXd few(5);
  for (int i = 0; i < 5; ++i) few(i) = (i + 1) / 5.0;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gramian(design_matrix(s, few)));
  EXPECT_LT(eig.eigenvalues()(0), 1e-14);
}

TEST(Penalty, MatchesAdaptiveIntegration) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> z;
  using boost::math::quadrature::gauss_kronrod;
  for (int order : {3, 4, 5}) {
    const auto s = random_space(gen, order, 6);
    for (int q = 1; q < order; ++q) {
      const auto r = penalty_matrix(s, q);
      for (int trial = 0; trial < 50; ++trial) {
        VectorXd b(s.dimension());
        for (auto& v : b) v = z(gen);
        double oracle = 0.0;
        const auto& knots = s.knots();
        for (std::size_t c = 0; c + 1 < knots.size(); ++c) {
          // Keep evaluation strictly inside the cell so the top derivative
          // comes from this cell's polynomial piece.
          auto f = [&](double x) {
            const double xc = std::clamp(x, knots[c] + 1e-14, knots[c + 1] - 1e-14);
            const double v = eval_spline(s, b, xc, q);
            return v * v;
          };
          oracle += gauss_kronrod<double, 31>::integrate(f, knots[c], knots[c + 1], 3, 1e-12);
        }
        EXPECT_NEAR(b.dot(r.values * b), oracle, 1e-8 * oracle) << "order " << order << " q " << q;
      }
    }
  }
}

TEST(Penalty, NullspaceRankAndExamples) {
  const auto s = SplineSpace::equidistant(4, 8);
  for (int q = 1; q <= 3; ++q) {
    const auto r = penalty_matrix(s, q);
    EXPECT_LT((r.values - r.values.transpose()).cwiseAbs().maxCoeff(), 1e-12 * r.values.norm());
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(r.values);
    const double top = eig.eigenvalues().maxCoeff();
    EXPECT_GT(eig.eigenvalues().minCoeff(), -1e-10 * top);
    int zeros = 0;
    for (int j = 0; j < 12; ++j) zeros += eig.eigenvalues()(j) < 1e-10 * top;
    EXPECT_EQ(zeros, q);
    for (int k = 0; k < q; ++k) {
      const VectorXd b = monomial_coefficients(s, k);
      EXPECT_LT((r.values * b).norm(), 1e-9 * r.values.norm());
    }
  }
  const auto r2 = penalty_matrix(s, 2);
  const VectorXd ones = VectorXd::Ones(12);
  EXPECT_NEAR(ones.dot(r2.values * ones), 0.0, 1e-10);
  const VectorXd sq = monomial_coefficients(s, 2);
  EXPECT_NEAR(sq.dot(r2.values * sq), 4.0, 1e-10);
  EXPECT_THROW(penalty_matrix(s, 4), Error);
}
