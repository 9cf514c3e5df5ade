#include <gtest/gtest.h>

#include <boost/math/distributions/inverse_gamma.hpp>

#include <cmath>
#include <random>

#include "penspline/sampler.hpp"

using namespace penspline;

namespace {

struct Toy {
  SplineSpace space;
  VectorXd x, y;
  DesignMatrix design;
  PenaltyMatrix penalty;
};

Toy make_toy(int n, int interior, double noise, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  auto space = SplineSpace::equidistant(4, interior);
  VectorXd x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x(i) = u(gen);
    y(i) = std::sin(2.0 * std::numbers::pi * x(i)) + noise * z(gen);
  }
  auto design = design_matrix(space, x);
  auto penalty = penalty_matrix(space, 2);
  return {space, x, y, design, penalty};
}

double ks_against(std::vector<double> draws, const InverseGamma& ig) {
  boost::math::inverse_gamma_distribution<double> dist(ig.shape, ig.scale);
  return stats::ks_one_sample(std::move(draws), [&](double v) { return boost::math::cdf(dist, v); });
}

}  // namespace

TEST(Moments, LimitsAndZeroData) {
  auto t = make_toy(80, 6, 0.2, 1);
  const auto wide = conditional_posterior_moments(t.design, t.penalty, t.y, 0.04, 1e12);
  const VectorXd ls = t.design.values.colPivHouseholderQr().solve(t.y);
  EXPECT_LT((wide.mean - ls).cwiseAbs().maxCoeff(), 1e-5);
  const auto zero = conditional_posterior_moments(t.design, t.penalty, VectorXd::Zero(80), 0.04, 1.0);
  EXPECT_EQ(zero.mean.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(conditional_posterior_moments(t.design, t.penalty, t.y, 0.0, 1.0), Error);
}

TEST(Gibbs, ConjugateSubcaseReproducesMoments) {
  auto t = make_toy(60, 4, 0.3, 2);
  ModelSpec spec{t.space, 2, Fixed{2.0}, {}, KnownVariance{0.09}};
  McmcOptions opts;
  opts.iters = 21000;
  opts.burn_in = 1000;
  const auto chain = gibbs_run(spec, t.design, t.penalty, t.y, opts, 5);
  const auto m = conditional_posterior_moments(t.design, t.penalty, t.y, 0.09, 2.0);
  const double l = static_cast<double>(chain.size());
  const VectorXd mean = chain.draws_b.colwise().mean();
  for (int j = 0; j < mean.size(); ++j) {
    const double se = std::sqrt(m.covariance(j, j) / l);
    EXPECT_LT(std::abs(mean(j) - m.mean(j)), 4.0 * se) << j;
  }
  const MatrixXd centred = chain.draws_b.rowwise() - mean.transpose();
  const MatrixXd cov = centred.transpose() * centred / (l - 1.0);
  for (int j = 0; j < mean.size(); ++j)
    for (int k = 0; k < mean.size(); ++k)
      EXPECT_LT(std::abs(cov(j, k) - m.covariance(j, k)), 0.05 * std::sqrt(m.covariance(j, j) * m.covariance(k, k)));
  EXPECT_TRUE((chain.draws_tau2.array() == 2.0).all());
  EXPECT_TRUE((chain.draws_sigma2.array() == 0.09).all());
}

TEST(Gibbs, Deterministic) {
  auto t = make_toy(50, 5, 0.3, 3);
  ModelSpec spec{t.space, 2, Weibull{0.5, 1.0 / 500.0}, {}, InverseGammaVariance{1e-3, 1e-3}};
  McmcOptions opts;
  opts.iters = 600;
  opts.burn_in = 100;
  const auto a = gibbs_run(spec, t.x, t.y, opts, 77);
  const auto b = gibbs_run(spec, t.x, t.y, opts, 77);
  EXPECT_EQ(a.draws_b, b.draws_b);
  EXPECT_EQ(a.draws_tau2, b.draws_tau2);
  EXPECT_EQ(a.draws_sigma2, b.draws_sigma2);
  const auto c = gibbs_run(spec, t.x, t.y, opts, 78);
  EXPECT_NE(a.draws_tau2, c.draws_tau2);
}

TEST(Gibbs, ThinningAndValidation) {
  auto t = make_toy(50, 5, 0.3, 4);
  ModelSpec spec{t.space, 2, Gamma{1.0, 1.0}, {}, KnownVariance{0.1}};
  McmcOptions opts;
  opts.iters = 1000;
  opts.burn_in = 100;
  opts.thin = 7;
  const auto chain = gibbs_run(spec, t.x, t.y, opts, 1);
  EXPECT_EQ(chain.size(), (900 + 6) / 7);
  EXPECT_TRUE((chain.draws_tau2.array() > 0).all());
  opts.burn_in = 1000;
  EXPECT_THROW(gibbs_run(spec, t.x, t.y, opts, 1), Error);
}

TEST(Gibbs, InverseGammaMetropolisMatchesConjugateDraws) {
  auto t = make_toy(80, 6, 0.3, 6);
  ModelSpec spec{t.space, 2, InverseGamma{1.0, 0.5}, {}, KnownVariance{0.09}};
  McmcOptions opts;
  opts.iters = 42000;
  opts.burn_in = 2000;
  const auto exact = gibbs_run(spec, t.design, t.penalty, t.y, opts, 10);
  opts.force_metropolis = true;
  const auto metro = gibbs_run(spec, t.design, t.penalty, t.y, opts, 11);
  auto se = [](const ChainOutput& c) {
    std::span<const double> v(c.draws_tau2.data(), static_cast<std::size_t>(c.size()));
    return std::sqrt(stats::variance(v) / c.ess.tau2);
  };
  const double diff = std::abs(exact.draws_tau2.mean() - metro.draws_tau2.mean());
  EXPECT_LT(diff, 3.0 * std::hypot(se(exact), se(metro)));
  const VectorXd le = exact.draws_tau2.array().log(), lm = metro.draws_tau2.array().log();
  EXPECT_LT(std::abs(le.mean() - lm.mean()), 0.05);
}

TEST(Metropolis, KernelLeavesConjugateTargetInvariant) {
  // Fixed b: the tau^2 full conditional is IG(alpha + nu, beta + r/2).
  const InverseGamma prior{2.0, 1.0};
  const double r = 3.0, nu = 5.0;
  const auto target = tau2_conjugate_conditional(prior, r, nu);
  Rng rng(123);
  double tau2 = target.scale / (target.shape + 1.0);
  std::vector<double> draws;
  for (int it = 0; it < 102000; ++it) {
    tau2 = tau2_metropolis_step(tau2, r, nu, prior, 1.0, rng).tau2;
    if (it >= 2000) draws.push_back(tau2);
  }
  EXPECT_LT(ks_against(draws, target), 0.02);
}

TEST(Metropolis, FlatTargetAlwaysAccepts) {
  // nu = 1, r = 0 and a flat prior give a constant log target in log tau^2.
  Rng rng(5);
  double tau2 = 1.0;
  for (int i = 0; i < 200; ++i) {
    const auto step = tau2_metropolis_step(tau2, 0.0, 1.0, Uniform{1e300}, 0.5, rng);
    EXPECT_TRUE(step.accepted);
    tau2 = step.tau2;
  }
}

TEST(Metropolis, ZeroRoughnessWeibullStaysFinite) {
  Rng rng(6);
  double tau2 = 1.0;
  for (int i = 0; i < 5000; ++i) {
    tau2 = tau2_metropolis_step(tau2, 0.0, 5.0, Weibull{0.5, 1.0 / 500.0}, 1.0, rng).tau2;
    ASSERT_TRUE(std::isfinite(tau2) && tau2 > 0.0);
  }
}

TEST(Sigma2, FullConditionalDraws) {
  const InverseGammaVariance prior{1e-3, 1e-3};
  const auto post = sigma2_full_conditional(prior, 7.5, 100);
  EXPECT_DOUBLE_EQ(post.shape, 1e-3 + 50.0);
  EXPECT_DOUBLE_EQ(post.scale, 1e-3 + 3.75);
  Rng rng(7);
  std::vector<double> draws(100000);
  for (auto& v : draws) v = rng.inverse_gamma(post.shape, post.scale);
  EXPECT_LT(ks_against(draws, post), 0.02);
}

TEST(Gibbs, AdaptiveAcceptanceInRange) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  auto space = SplineSpace::equidistant(4, 20);
  VectorXd x(100), y(100);
  for (int i = 0; i < 100; ++i) {
    x(i) = u(gen);
    y(i) = std::sin(3.0 * std::numbers::pi * x(i)) + 0.25 * z(gen);
  }
  ModelSpec spec{space, 2, Weibull{0.5, 1.0 / 500.0}, {}, InverseGammaVariance{1e-3, 1e-3}};
  const auto chain = gibbs_run(spec, x, y, McmcOptions{}, 9);
  EXPECT_GE(chain.acceptance_rate_tau2, 0.2);
  EXPECT_LE(chain.acceptance_rate_tau2, 0.6);
  EXPECT_GT(chain.ess.tau2, 100.0);
}

TEST(Summary, ConstantChainAndBand) {
  auto t = make_toy(40, 4, 0.3, 10);
  ChainOutput constant;
  constant.draws_b = MatrixXd::Ones(50, 8);
  const VectorXd grid = VectorXd::LinSpaced(21, 0.0, 1.0);
  const auto eval = design_matrix(t.space, grid);
  const auto s = posterior_summary(constant, eval);
  EXPECT_LT((s.upper - s.lower).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((s.mean - VectorXd::Ones(21)).cwiseAbs().maxCoeff(), 1e-12);

  ModelSpec spec{t.space, 2, Gamma{1.0, 1.0}, {}, KnownVariance{0.09}};
  McmcOptions opts;
  opts.iters = 3000;
  opts.burn_in = 500;
  const auto chain = gibbs_run(spec, t.design, t.penalty, t.y, opts, 3);
  const auto band = posterior_summary(chain, eval);
  EXPECT_TRUE((band.lower.array() <= band.mean.array()).all());
  EXPECT_TRUE((band.mean.array() <= band.upper.array()).all());

  EXPECT_THROW(posterior_summary(ChainOutput{}, eval), Error);
}

TEST(MarginalPosterior, LimitsAndQuadraticTerm) {
  auto t = make_toy(40, 4, 0.3, 11);
  const VectorXd zero = VectorXd::Zero(8);
  const HyperPrior ig = InverseGamma{1.0, 1.0};
  EXPECT_DOUBLE_EQ(marginal_posterior_logdensity(zero, t.design, t.penalty, t.y, 0.5, ig),
                   marginal_prior_logdensity(zero, t.penalty, ig));
  VectorXd b1 = VectorXd::LinSpaced(8, -1.0, 1.0), b2 = b1.array().square();
  const double prior_diff = marginal_prior_logdensity(b1, t.penalty, ig) - marginal_prior_logdensity(b2, t.penalty, ig);
  const double post_diff = marginal_posterior_logdensity(b1, t.design, t.penalty, t.y, 1e12, ig) -
                           marginal_posterior_logdensity(b2, t.design, t.penalty, t.y, 1e12, ig);
  EXPECT_NEAR(post_diff, prior_diff, 1e-9);
}

TEST(MarginalPosterior, DensityRatioMatchesMcmcEstimate) {
  // d = 4 (cubic, no interior knots). The marginal posterior density of b is
  // the average over tau^2 | Y of N(b; mu(tau^2), Sigma(tau^2)); estimate it
  // from the chain's tau^2 draws and compare ratios at two points.
  std::mt19937_64 gen(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z;
  const auto space = SplineSpace::equidistant(4, 0);
  VectorXd x(30), y(30);
  for (int i = 0; i < 30; ++i) {
    x(i) = u(gen);
    y(i) = x(i) * x(i) * x(i) - x(i) + 0.2 * z(gen);
  }
  const auto design = design_matrix(space, x);
  const auto penalty = penalty_matrix(space, 2);
  const double sigma2 = 0.04;
  const HyperPrior hp = Gamma{1.0, 0.5};
  ModelSpec spec{space, 2, hp, {}, KnownVariance{sigma2}};
  McmcOptions opts;
  opts.iters = 22000;
  opts.burn_in = 2000;
  const auto chain = gibbs_run(spec, design, penalty, y, opts, 21);

  const VectorXd centre = chain.draws_b.colwise().mean();
  const MatrixXd centred = chain.draws_b.rowwise() - centre.transpose();
  const MatrixXd cov = centred.transpose() * centred / static_cast<double>(chain.size());
  const MatrixXd spread = Eigen::LLT<MatrixXd>(cov).matrixL();
  const VectorXd b1 = centre + 0.25 * spread * VectorXd::Ones(4);
  const VectorXd b2 = centre - 0.8 * spread * VectorXd::Unit(4, 3);

  auto rao_blackwell = [&](const VectorXd& b) {
    double sum = 0.0;
    for (Eigen::Index l = 0; l < chain.size(); l += 5) {
      const auto m = conditional_posterior_moments(design, penalty, y, sigma2, chain.draws_tau2(l));
      Eigen::LLT<MatrixXd> llt(m.covariance);
      const VectorXd w = llt.matrixL().solve(b - m.mean);
      const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
      sum += std::exp(-0.5 * w.squaredNorm() - 0.5 * logdet);
    }
    return sum;
  };
  const double mc_ratio = rao_blackwell(b1) / rao_blackwell(b2);
  const double exact_ratio = std::exp(marginal_posterior_logdensity(b1, design, penalty, y, sigma2, hp) -
                                      marginal_posterior_logdensity(b2, design, penalty, y, sigma2, hp));
  EXPECT_NEAR(mc_ratio / exact_ratio, 1.0, 0.10) << mc_ratio << " vs " << exact_ratio;
}
