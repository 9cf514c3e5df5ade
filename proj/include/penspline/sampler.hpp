#pragma once

// MCMC for Bayesian O-splines: Gibbs draws of the coefficients b and the
// residual variance sigma^2, and a random-walk Metropolis update of the
// smoothing variance tau^2 on the log scale.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "penspline/error.hpp"
#include "penspline/priors.hpp"
#include "penspline/random.hpp"
#include "penspline/spline_basis.hpp"
#include "penspline/stats.hpp"

namespace penspline {

namespace detail {

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

struct KnownVariance {
  double sigma2;
};
/// sigma^2 ~ IG(shape, scale), independent of b a priori.
struct InverseGammaVariance {
  double shape;
  double scale;
};
using ResidualVariance = std::variant<KnownVariance, InverseGammaVariance>;

struct ModelSpec {
  SplineSpace space;
  int q = 2;
  HyperPrior hyperprior = Weibull{0.5, 1.0 / 500.0};
  ProperPriorSpec prior{};
  ResidualVariance residual = InverseGammaVariance{1e-3, 1e-3};
};

struct McmcOptions {
  int iters = 12000;
  int burn_in = 2000;
  int thin = 1;
  double target_acceptance = 0.44;
  double initial_log_step = 0.0;  // log of the proposal sd on log tau^2
  double initial_tau2 = 0.0;      // <= 0: start from a central value of the hyperprior
  bool force_metropolis = false;  // use Metropolis even when a conjugate draw exists
};

struct ChainEss {
  double tau2 = 0.0;
  double sigma2 = 0.0;
  double b_min = 0.0;  // smallest over coefficients
};

struct ChainOutput {
  MatrixXd draws_b;  // L x d
  VectorXd draws_tau2;
  VectorXd draws_sigma2;
  double acceptance_rate_tau2 = 0.0;  // post burn-in
  double proposal_sd = 0.0;           // frozen value after adaptation
  ChainEss ess;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return draws_b.rows(); }
};

struct GaussianMoments {
  VectorXd mean;
  MatrixXd covariance;
};

/// Sigma = (B^T B / sigma2 + P)^{-1}, mu = Sigma B^T Y / sigma2.
inline GaussianMoments conditional_posterior_moments(const DesignMatrix& design, const MatrixXd& prior_precision,
                                                     const VectorXd& y, double sigma2) {
  require(sigma2 > 0.0, ErrorKind::NonPositiveInput, "sigma^2 must be > 0");
  require(design.rows() == y.size(), ErrorKind::DimensionMismatch, "Y length != n");
  require(prior_precision.rows() == design.cols(), ErrorKind::DimensionMismatch, "precision size != d");
  const MatrixXd precision = design.values.transpose() * design.values / sigma2 + prior_precision;
  Eigen::LLT<MatrixXd> llt(precision);
  require(llt.info() == Eigen::Success, ErrorKind::SingularPrecision, "posterior precision is not positive definite");
  GaussianMoments out;
  out.covariance = llt.solve(MatrixXd::Identity(design.cols(), design.cols()));
  out.mean = llt.solve(design.values.transpose() * y / sigma2);
  return out;
}

/// Improper-flavor moments with prior precision R / tau2.
inline GaussianMoments conditional_posterior_moments(const DesignMatrix& design, const PenaltyMatrix& penalty,
                                                     const VectorXd& y, double sigma2, double tau2) {
  require(tau2 > 0.0, ErrorKind::NonPositiveInput, "tau^2 must be > 0");
  return conditional_posterior_moments(design, penalty.values / tau2, y, sigma2);
}

/// log of the tau^2 full conditional in eta = log tau^2, Jacobian included:
/// -nu eta - r / (2 e^eta) + log p(e^eta) + eta, nu = (d - q) / 2.
inline double tau2_log_target(double eta, double roughness, double nu, const HyperPrior& hp) {
  const double x = std::exp(eta);
  if (!(x > 0.0) || !std::isfinite(x)) return -std::numeric_limits<double>::infinity();
  return -nu * eta - 0.5 * roughness / x + hyperprior_logpdf(hp, x) + eta;
}

struct MetropolisResult {
  double tau2;
  bool accepted;
};

/// One random-walk Metropolis step on log tau^2 with proposal sd `step`.
inline MetropolisResult tau2_metropolis_step(double tau2, double roughness, double nu, const HyperPrior& hp,
                                             double step, Rng& rng) {
  require(tau2 > 0.0, ErrorKind::NonPositiveInput, "tau^2 must be > 0");
  const double eta = std::log(tau2);
  const double proposal = eta + step * rng.normal();
  const double current = tau2_log_target(eta, roughness, nu, hp);
  const double candidate = tau2_log_target(proposal, roughness, nu, hp);
  const double log_u = std::log(rng.uniform());
  if (candidate - current >= 0.0 || log_u < candidate - current) return {std::exp(proposal), true};
  return {tau2, false};
}

/// Same step with the roughness taken from b: r = b^T R b, nu = (d - q) / 2.
inline MetropolisResult tau2_metropolis_step(double tau2, const VectorXd& b, const PenaltyMatrix& penalty,
                                             const HyperPrior& hp, double step, Rng& rng) {
  const double nu = 0.5 * static_cast<double>(b.size() - penalty.derivative_order);
  return tau2_metropolis_step(tau2, b.dot(penalty.values * b), nu, hp, step, rng);
}

/// sigma^2 | Y, b ~ IG(shape + n/2, scale + rss/2).
inline InverseGamma sigma2_full_conditional(const InverseGammaVariance& prior, double rss, Eigen::Index n) {
  return {prior.shape + 0.5 * static_cast<double>(n), prior.scale + 0.5 * rss};
}

/// tau^2 | b ~ IG(shape + (d-q)/2, scale + b^T R b / 2) under an IG hyperprior.
inline InverseGamma tau2_conjugate_conditional(const InverseGamma& prior, double roughness, double nu) {
  return {prior.shape + nu, prior.scale + 0.5 * roughness};
}

/// A starting value inside the hyperprior's support near its bulk.
inline double central_tau2(const HyperPrior& hp) {
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, InverseGamma>) return p.scale / (p.shape + 1.0);
        else if constexpr (std::is_same_v<T, Gamma>) return p.shape / p.rate;
        else if constexpr (std::is_same_v<T, Weibull>) return std::pow(std::log(2.0), 1.0 / p.shape) / p.rate;
        else if constexpr (std::is_same_v<T, Uniform>) return 0.5 * p.upper;
        else if constexpr (std::is_same_v<T, ScaledBetaPrime>) return p.scale * p.alpha / (p.beta + 1.0);
        else return p.value;
      },
      hp);
}

/// Gibbs sampler on a prebuilt design and penalty. Each sweep draws
/// b | Y, tau^2, sigma^2 from its Gaussian full conditional (Cholesky of the
/// precision), then tau^2 | b, then sigma^2 | Y, b when sigma^2 is unknown.
/// The tau^2 proposal sd is tuned toward the target acceptance during burn-in
/// and frozen afterwards.
inline ChainOutput gibbs_run(const ModelSpec& spec, const DesignMatrix& design, const PenaltyMatrix& penalty,
                             const VectorXd& y, const McmcOptions& opts, std::uint64_t seed) {
  require(opts.iters > opts.burn_in && opts.burn_in >= 0, ErrorKind::InvalidArgument,
          "need iters > burn_in >= 0");
  require(opts.thin >= 1, ErrorKind::InvalidArgument, "thin must be >= 1");
  require(design.rows() == y.size(), ErrorKind::DimensionMismatch, "Y length != n");
  require(design.cols() == penalty.values.rows(), ErrorKind::DimensionMismatch, "design and penalty sizes differ");
  validate(spec.hyperprior);

  const Eigen::Index d = design.cols();
  const double n = static_cast<double>(design.rows());
  const double nu = 0.5 * static_cast<double>(d - penalty.derivative_order);
  const MatrixXd btb = design.values.transpose() * design.values;
  const VectorXd bty = design.values.transpose() * y;
  const double yty = y.squaredNorm();
  const MatrixXd poly = polynomial_precision(design, penalty, spec.prior);

  const auto* known = std::get_if<KnownVariance>(&spec.residual);
  const auto* ig_var = std::get_if<InverseGammaVariance>(&spec.residual);
  if (known) require(known->sigma2 > 0.0, ErrorKind::NonPositiveInput, "known sigma^2 must be > 0");
  if (ig_var)
    require(ig_var->shape > 0.0 && ig_var->scale > 0.0, ErrorKind::NonPositiveInput, "sigma^2 prior must be positive");

  const auto* fixed = std::get_if<Fixed>(&spec.hyperprior);
  const auto* ig_tau = std::get_if<InverseGamma>(&spec.hyperprior);
  const bool conjugate_tau = ig_tau != nullptr && !opts.force_metropolis;

  Rng rng(seed);
  double tau2 = fixed ? fixed->value : (opts.initial_tau2 > 0.0 ? opts.initial_tau2 : central_tau2(spec.hyperprior));
  double sigma2 = known ? known->sigma2 : std::max(yty / n * 0.1, 1e-8);
  double log_step = opts.initial_log_step;

  const int kept = (opts.iters - opts.burn_in + opts.thin - 1) / opts.thin;
  ChainOutput out;
  out.seed = seed;
  out.draws_b.resize(kept, d);
  out.draws_tau2.resize(kept);
  out.draws_sigma2.resize(kept);

  VectorXd b(d);
  long accepted_after_burn_in = 0, proposals_after_burn_in = 0;
  int row = 0;
  for (int it = 0; it < opts.iters; ++it) {
    // b | rest
    MatrixXd precision = btb / sigma2 + penalty.values / tau2 + poly;
    Eigen::LLT<MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success)
      fail(ErrorKind::SingularPrecision, "posterior precision lost positive definiteness at iteration " +
                                             std::to_string(it) + " (tau^2 = " + detail::short_number(tau2) +
                                             ", sigma^2 = " + detail::short_number(sigma2) + ")");
    const VectorXd mean = llt.solve(bty / sigma2);
    b = mean + llt.matrixU().solve(rng.normal_vector(d));

    // tau^2 | b
    const double roughness = std::max(0.0, b.dot(penalty.values * b));
    if (fixed) {
      // unchanged
    } else if (conjugate_tau) {
      const auto post = tau2_conjugate_conditional(*ig_tau, roughness, nu);
      tau2 = rng.inverse_gamma(post.shape, post.scale);
    } else {
      const double current = tau2_log_target(std::log(tau2), roughness, nu, spec.hyperprior);
      if (!std::isfinite(current))
        fail(ErrorKind::NonFiniteLogPosterior, "tau^2 log target is not finite at iteration " + std::to_string(it) +
                                                   " (tau^2 = " + detail::short_number(tau2) +
                                                   ", b^T R b = " + detail::short_number(roughness) + ")");
      const auto step = tau2_metropolis_step(tau2, roughness, nu, spec.hyperprior, std::exp(log_step), rng);
      tau2 = step.tau2;
      if (it < opts.burn_in) {
        log_step += ((step.accepted ? 1.0 : 0.0) - opts.target_acceptance) / std::pow(it + 1.0, 0.6);
        log_step = std::clamp(log_step, -10.0, 5.0);
      } else {
        ++proposals_after_burn_in;
        accepted_after_burn_in += step.accepted ? 1 : 0;
      }
    }

    // sigma^2 | Y, b
    if (ig_var) {
      double rss = yty - 2.0 * b.dot(bty) + b.dot(btb * b);
      if (rss < 1e-8 * yty) rss = (y - design.values * b).squaredNorm();  // guard against cancellation
      const auto post = sigma2_full_conditional(*ig_var, rss, design.rows());
      sigma2 = rng.inverse_gamma(post.shape, post.scale);
    }
    if (!(tau2 > 0.0) || !std::isfinite(tau2) || !(sigma2 > 0.0) || !std::isfinite(sigma2))
      fail(ErrorKind::NonFiniteLogPosterior, "variance draw left (0, inf) at iteration " + std::to_string(it));

    if (it >= opts.burn_in && (it - opts.burn_in) % opts.thin == 0) {
      out.draws_b.row(row) = b.transpose();
      out.draws_tau2(row) = tau2;
      out.draws_sigma2(row) = sigma2;
      ++row;
    }
  }

  out.proposal_sd = std::exp(log_step);
  out.acceptance_rate_tau2 =
      proposals_after_burn_in > 0 ? static_cast<double>(accepted_after_burn_in) / proposals_after_burn_in : 1.0;
  auto ess = [](const VectorXd& v) {
    return stats::effective_sample_size(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  };
  out.ess.tau2 = ess(out.draws_tau2);
  out.ess.sigma2 = ess(out.draws_sigma2);
  out.ess.b_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < d; ++j) out.ess.b_min = std::min(out.ess.b_min, ess(out.draws_b.col(j)));
  return out;
}

/// Gibbs sampler on data (x, Y): builds the design and penalty from the model.
inline ChainOutput gibbs_run(const ModelSpec& spec, const VectorXd& x, const VectorXd& y, const McmcOptions& opts,
                             std::uint64_t seed) {
  require(spec.q >= 1 && spec.q <= spec.space.order() - 1, ErrorKind::InvalidArgument, "need 1 <= q <= m - 1");
  const DesignMatrix design = design_matrix(spec.space, x);
  const PenaltyMatrix penalty = penalty_matrix(spec.space, spec.q);
  return gibbs_run(spec, design, penalty, y, opts, seed);
}

struct PosteriorSummary {
  VectorXd mean;
  VectorXd lower;
  VectorXd upper;
};

/// Posterior mean curve B_eval mean(b) and pointwise equal-tailed band at
/// level 1 - alpha from the draws B_eval b^(l).
inline PosteriorSummary posterior_summary(const ChainOutput& chain, const DesignMatrix& eval, double alpha = 0.05) {
  require(chain.size() > 0, ErrorKind::EmptyChain, "posterior_summary of an empty chain");
  require(eval.cols() == chain.draws_b.cols(), ErrorKind::DimensionMismatch, "evaluation design has wrong width");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::InvalidArgument, "alpha must lie in (0, 1)");
  const MatrixXd curves = chain.draws_b * eval.values.transpose();  // L x grid
  PosteriorSummary out;
  out.mean = eval.values * chain.draws_b.colwise().mean().transpose();
  out.lower.resize(eval.rows());
  out.upper.resize(eval.rows());
  std::vector<double> column(static_cast<std::size_t>(curves.rows()));
  for (Eigen::Index g = 0; g < curves.cols(); ++g) {
    for (Eigen::Index l = 0; l < curves.rows(); ++l) column[static_cast<std::size_t>(l)] = curves(l, g);
    std::sort(column.begin(), column.end());
    out.lower(g) = stats::quantile_sorted(column, 0.5 * alpha);
    out.upper(g) = stats::quantile_sorted(column, 1.0 - 0.5 * alpha);
  }
  return out;
}

/// Log posterior density of b with tau^2 integrated out, up to a constant:
/// -(b^T B^T B b - 2 b^T B^T Y) / (2 sigma2) + marginal prior.
inline double marginal_posterior_logdensity(const VectorXd& b, const DesignMatrix& design,
                                            const PenaltyMatrix& penalty, const VectorXd& y, double sigma2,
                                            const HyperPrior& hp) {
  require(sigma2 > 0.0, ErrorKind::NonPositiveInput, "sigma^2 must be > 0");
  require(design.rows() == y.size() && design.cols() == b.size(), ErrorKind::DimensionMismatch,
          "marginal_posterior_logdensity: size mismatch");
  const VectorXd fitted = design.values * b;
  const double quadratic = fitted.squaredNorm() - 2.0 * fitted.dot(y);
  return -0.5 * quadratic / sigma2 + marginal_prior_logdensity(b, penalty, hp);
}

}  // namespace penspline
