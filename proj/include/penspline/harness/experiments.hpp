#pragma once

// The simulation studies. Every replicate and factor cell draws from its own
// RNG stream (seed, experiment, factor..., replicate), and tasks write into
// their own slot, so results do not depend on thread count or scheduling.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "penspline/estimators.hpp"
#include "penspline/harness/config.hpp"
#include "penspline/harness/data.hpp"
#include "penspline/harness/results.hpp"
#include "penspline/harness/work_queue.hpp"
#include "penspline/priors.hpp"
#include "penspline/sampler.hpp"
#include "penspline/stats.hpp"

namespace penspline::harness {

inline std::string level(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::uint64_t experiment_id(Experiment e) { return static_cast<std::uint64_t>(e) + 1; }

inline ModelSpec model_spec(const ExperimentConfig& c, const SplineSpace& space) {
  return ModelSpec{space, c.q, c.hyperprior, c.prior, c.residual};
}

inline VectorXd grid(int points) { return VectorXd::LinSpaced(points, 0.0, 1.0); }

inline std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// ---------------------------------------------------------------- adaptivity

inline std::string adaptivity_cell(const std::string& f, const std::string& arm) { return "f=" + f + ";arm=" + arm; }

inline std::vector<std::pair<std::string, HyperPrior>> adaptivity_arms(const ExperimentConfig& c) {
  std::vector<std::pair<std::string, HyperPrior>> arms{{"hyperprior", c.hyperprior}};
  for (double v : c.fixed_tau2) arms.emplace_back("fixed:" + level(v), Fixed{v});
  return arms;
}

inline ResultTable run_adaptivity(const ExperimentConfig& c) {
  const auto space = SplineSpace::equidistant(c.order, c.interior_knots);
  const auto arms = adaptivity_arms(c);
  const auto eval = design_matrix(space, grid(c.grid_points));
  const std::uint64_t exp = experiment_id(c.experiment);
  const std::size_t nf = c.functions.size(), reps = static_cast<std::size_t>(c.replicates);
  std::vector<TestFunction> fs;
  for (const auto& name : c.functions) fs.push_back(test_function(name));

  std::vector<std::vector<Record>> slots(nf * reps);
  parallel_for(slots.size(), c.threads, [&](std::size_t task) {
    const std::size_t fi = task / reps, rep = task % reps;
    Rng rng(c.seed, {exp, fi, rep, 0});
    const auto data = gen_data(fs[fi], c.n, c.sigma0, c.design, rng);
    const auto design = design_matrix(space, data.x);
    const auto penalty = penalty_matrix(space, c.q);
    const VectorXd truth_grid = fs[fi](grid(c.grid_points));
    ResultTable local;
    for (std::size_t a = 0; a < arms.size(); ++a) {
      ModelSpec spec = model_spec(c, space);
      spec.hyperprior = arms[a].second;
      const auto chain = gibbs_run(spec, design, penalty, data.y, c.mcmc, stream_seed(c.seed, {exp, fi, rep, a + 1}));
      const VectorXd fhat = design.values * chain.draws_b.colwise().mean().transpose();
      const double mse = (fhat - data.f).squaredNorm() / c.n;
      const auto cell = adaptivity_cell(fs[fi].name, arms[a].first);
      local.add(cell, static_cast<int>(rep), "mse", mse);
      local.add(cell, static_cast<int>(rep), "log_mse", std::log(mse));
      if (!std::holds_alternative<Fixed>(arms[a].second)) {
        const auto band = posterior_summary(chain, eval);
        const double covered =
            ((band.lower.array() <= truth_grid.array()) && (truth_grid.array() <= band.upper.array())).cast<double>().mean();
        local.add(cell, static_cast<int>(rep), "coverage", covered);
        local.add(cell, static_cast<int>(rep), "acceptance", chain.acceptance_rate_tau2);
      }
    }
    slots[task] = std::move(local.records);
  });

  ResultTable out{to_string(c.experiment), c.seed, {}};
  for (const auto& s : slots) out.append(s);
  for (const auto& f : fs)
    for (const auto& arm : arms) {
      const auto cell = adaptivity_cell(f.name, arm.first);
      out.add(cell, -1, "mean_log_mse", stats::mean(out.values(cell, "log_mse")));
      if (!std::holds_alternative<Fixed>(arm.second))
        out.add(cell, -1, "mean_coverage", stats::mean(out.values(cell, "coverage")));
    }
  return out;
}

// -------------------------------------------------------------- proper-vs-mmr

inline std::string pvm_cell(const std::string& f, const std::string& flavor, std::optional<double> log10_poly = {}) {
  std::string cell = "f=" + f + ";flavor=" + flavor;
  if (log10_poly) cell += ";log10_tau2_poly=" + level(*log10_poly);
  return cell;
}

inline ResultTable run_proper_vs_mmr(const ExperimentConfig& c) {
  const auto space = SplineSpace::equidistant(c.order, c.interior_knots);
  const VectorXd xs = grid(c.grid_points);
  const auto eval = design_matrix(space, xs);
  const std::uint64_t exp = experiment_id(c.experiment);
  const std::size_t nf = c.functions.size(), np = c.log10_tau2_poly.size();
  const std::size_t variants = 1 + 2 * np;  // improper reference, then projection / MMR per tau2_poly

  struct FunctionData {
    TestFunction f;
    Dataset data;
    DesignMatrix design;
  };
  std::vector<FunctionData> fds;
  for (std::size_t fi = 0; fi < nf; ++fi) {
    Rng rng(c.seed, {exp, fi, 0});
    auto f = test_function(c.functions[fi]);
    auto data = gen_data(f, c.n, c.sigma0, c.design, rng);
    auto design = design_matrix(space, data.x);
    fds.push_back({f, std::move(data), std::move(design)});
  }
  const auto penalty = penalty_matrix(space, c.q);

  // Posterior mean coefficients per (function, variant). All variants of one
  // function share the chain seed so their differences reflect the prior only.
  std::vector<VectorXd> coef(nf * variants);
  parallel_for(coef.size(), c.threads, [&](std::size_t task) {
    const std::size_t fi = task / variants, v = task % variants;
    ModelSpec spec = model_spec(c, space);
    if (v == 0) {
      spec.prior = {PriorFlavor::Improper, 1.0};
    } else {
      const std::size_t pi = (v - 1) % np;
      spec.prior = {v <= np ? PriorFlavor::ProperProjection : PriorFlavor::ProperMMR,
                    std::pow(10.0, c.log10_tau2_poly[pi])};
    }
    const auto chain = gibbs_run(spec, fds[fi].design, penalty, fds[fi].data.y, c.mcmc, stream_seed(c.seed, {exp, fi, 1}));
    coef[task] = chain.draws_b.colwise().mean().transpose();
  });

  ResultTable out{to_string(c.experiment), c.seed, {}};
  for (std::size_t fi = 0; fi < nf; ++fi) {
    const auto& fd = fds[fi];
    const VectorXd reference = eval.values * coef[fi * variants];
    // Empirical projection of the reference onto span{1, x} at the design points.
    MatrixXd x1(fd.design.rows(), 2);
    x1.col(0).setOnes();
    x1.col(1) = fd.data.x;
    const VectorXd line = x1.colPivHouseholderQr().solve(fd.design.values * coef[fi * variants]);
    const VectorXd detrended = reference - (line(0) + line(1) * xs.array()).matrix();
    const auto ref_cell = pvm_cell(fd.f.name, "improper");
    for (Eigen::Index g = 0; g < xs.size(); ++g) {
      out.add(ref_cell, 0, "curve", reference(g), static_cast<int>(g));
      out.add(ref_cell, 0, "detrended", detrended(g), static_cast<int>(g));
    }
    for (std::size_t v = 1; v < variants; ++v) {
      const std::size_t pi = (v - 1) % np;
      const auto cell = pvm_cell(fd.f.name, v <= np ? "projection" : "mmr", c.log10_tau2_poly[pi]);
      const VectorXd curve = eval.values * coef[fi * variants + v];
      for (Eigen::Index g = 0; g < xs.size(); ++g) out.add(cell, 0, "curve", curve(g), static_cast<int>(g));
      out.add(cell, 0, "sup_to_reference", (curve - reference).cwiseAbs().maxCoeff());
      out.add(cell, 0, "sup_to_detrended", (curve - detrended).cwiseAbs().maxCoeff());
    }
  }
  return out;
}

// ------------------------------------------------------------- concentration

/// k0(n) = ceil(2 n^0.4).
inline int concentration_knots(int n) { return static_cast<int>(std::ceil(2.0 * std::pow(n, 0.4) - 1e-9)); }

inline std::string concentration_cell(const std::string& estimator, std::optional<int> n = {}) {
  return "estimator=" + estimator + (n ? ";n=" + std::to_string(*n) : std::string());
}

inline ResultTable run_concentration(const ExperimentConfig& c) {
  const std::uint64_t exp = experiment_id(c.experiment);
  const auto f0 = test_function(c.functions.at(0));
  const std::size_t nn = c.n_grid.size();
  const auto freq_reps = static_cast<std::size_t>(c.frequentist_replicates);
  const auto bayes_reps = static_cast<std::size_t>(c.replicates);
  std::vector<std::string> arms{"bayes_known"};
  if (c.unknown_variance_arm) arms.push_back("bayes_unknown");

  struct PerN {
    SplineSpace space;
    DesignMatrix design;
    PenaltyMatrix penalty;
    DrBasis dr;
    int cutoff;
  };
  require(c.design == DesignKind::Regular, ErrorKind::ConfigError, "concentration uses the regular design");
  std::vector<PerN> per_n;
  for (int n : c.n_grid) {
    auto space = SplineSpace::equidistant(c.order, concentration_knots(n));
    Rng unused(0);
    const auto points = gen_data(f0, n, 0.0, DesignKind::Regular, unused);
    auto design = design_matrix(space, points.x);
    auto penalty = penalty_matrix(space, c.q);
    auto dr = dr_basis(design, penalty, space);
    per_n.push_back({space, std::move(design), std::move(penalty), std::move(dr), theorem_cutoff(n, c.q, c.m0)});
  }

  const std::size_t freq_tasks = nn * freq_reps;
  const std::size_t bayes_tasks = nn * bayes_reps * arms.size();
  std::vector<std::vector<Record>> slots(freq_tasks + bayes_tasks);
  parallel_for(slots.size(), c.threads, [&](std::size_t task) {
    ResultTable local;
    if (task < freq_tasks) {
      const std::size_t ni = task / freq_reps, rep = task % freq_reps;
      const int n = c.n_grid[ni];
      Rng rng(c.seed, {exp, ni, rep, 0});
      const auto data = gen_data(f0, n, c.sigma0, DesignKind::Regular, rng);
      const auto fit = truncated_dr_fit(per_n[ni].dr, data.y, per_n[ni].cutoff);
      const double mse = (fit.fitted_values - data.f).squaredNorm() / n;
      const auto cell = concentration_cell("truncated_dr", n);
      local.add(cell, static_cast<int>(rep), "mse", mse);
      local.add(cell, static_cast<int>(rep), "log_mse", std::log(mse));
    } else {
      const std::size_t rest = task - freq_tasks;
      const std::size_t ai = rest % arms.size();
      const std::size_t rep = (rest / arms.size()) % bayes_reps;
      const std::size_t ni = rest / arms.size() / bayes_reps;
      const int n = c.n_grid[ni];
      Rng rng(c.seed, {exp, ni, rep, 0});  // same data as the frequentist replicate
      const auto data = gen_data(f0, n, c.sigma0, DesignKind::Regular, rng);
      ModelSpec spec = model_spec(c, per_n[ni].space);
      spec.hyperprior = corollary1_schedule(c.schedule, n);
      if (ai == 0) spec.residual = KnownVariance{c.sigma0 * c.sigma0};
      else if (std::holds_alternative<KnownVariance>(spec.residual)) spec.residual = InverseGammaVariance{1e-3, 1e-3};
      McmcOptions opts = c.mcmc;
      opts.thin = std::max(1, (opts.iters - opts.burn_in) / c.draws);
      const auto chain = gibbs_run(spec, per_n[ni].design, per_n[ni].penalty, data.y, opts,
                                   stream_seed(c.seed, {exp, ni, rep, ai + 1}));
      const Eigen::Index keep = std::min<Eigen::Index>(chain.size(), c.draws);
      const MatrixXd curves = per_n[ni].design.values * chain.draws_b.bottomRows(keep).transpose();  // n x keep
      std::vector<double> err(static_cast<std::size_t>(keep));
      for (Eigen::Index l = 0; l < keep; ++l)
        err[static_cast<std::size_t>(l)] = std::sqrt((curves.col(l) - data.f).squaredNorm() / n);
      const double radius = c.radius * epsilon_n(n, c.m0);
      const double outside =
          static_cast<double>(std::count_if(err.begin(), err.end(), [&](double e) { return e > radius; })) /
          static_cast<double>(keep);
      const double median = stats::quantile(err, 0.5);
      const auto cell = concentration_cell(arms[ai], n);
      local.add(cell, static_cast<int>(rep), "median_error", median);
      local.add(cell, static_cast<int>(rep), "log_median_error", std::log(median));
      local.add(cell, static_cast<int>(rep), "mass_outside", outside);
      local.add(cell, static_cast<int>(rep), "acceptance", chain.acceptance_rate_tau2);
    }
    slots[task] = std::move(local.records);
  });

  ResultTable out{to_string(c.experiment), c.seed, {}};
  for (const auto& s : slots) out.append(s);
  std::vector<double> logn;
  for (int n : c.n_grid) logn.push_back(std::log(static_cast<double>(n)));
  auto summarize = [&](const std::string& estimator, const std::string& metric, const std::string& mean_metric) {
    std::vector<double> means;
    for (std::size_t ni = 0; ni < nn; ++ni) {
      const auto cell = concentration_cell(estimator, c.n_grid[ni]);
      means.push_back(stats::mean(out.values(cell, metric)));
      out.add(cell, -1, mean_metric, means.back());
      if (estimator != "truncated_dr") out.add(cell, -1, "mean_mass_outside", stats::mean(out.values(cell, "mass_outside")));
    }
    if (nn >= 2) out.add(concentration_cell(estimator), -1, "slope", stats::least_squares_line(logn, means).slope);
  };
  summarize("truncated_dr", "log_mse", "mean_log_mse");
  for (const auto& arm : arms) summarize(arm, "log_median_error", "mean_log_median_error");
  return out;
}

// ------------------------------------------------------------------- prop5

inline std::string prop5_cell(int t) { return "t=" + std::to_string(t); }

struct Prop5Setup {
  SplineSpace space;
  DrBasis dr;
  VectorXd u;  // DR coefficients of the true spline
  VectorXd f;  // its values at the design points
};

inline Prop5Setup prop5_setup(const ExperimentConfig& c) {
  auto space = SplineSpace::equidistant(c.order, c.interior_knots);
  Rng rng(0);
  const auto data = gen_data(test_function(c.functions.at(0)), c.n, 0.0, c.design, rng);
  const auto design = design_matrix(space, data.x);
  auto dr = dr_basis(design, penalty_matrix(space, c.q), space);
  VectorXd u = dr_coords(dr, data.f);  // projection, so f is exactly a spline
  VectorXd f = dr.design * u;
  return {std::move(space), std::move(dr), std::move(u), std::move(f)};
}

inline ResultTable run_prop5(const ExperimentConfig& c) {
  require(c.design == DesignKind::Regular, ErrorKind::ConfigError, "prop5 uses the regular design");
  const auto setup = prop5_setup(c);
  const std::uint64_t exp = experiment_id(c.experiment);
  const int d = static_cast<int>(setup.dr.dimension());
  const double sigma2 = c.sigma0 * c.sigma0;
  std::vector<std::vector<Record>> slots(c.cutoffs.size());
  parallel_for(slots.size(), c.threads, [&](std::size_t ci) {
    const int t = c.cutoffs[ci] == 0 ? d : c.cutoffs[ci];
    const auto sim = simulate_prop5(setup.dr, setup.f, sigma2, t, c.lambda, c.reps, stream_seed(c.seed, {exp, ci, 0}));
    Rng rng(c.seed, {exp, ci, 1});
    const auto ref_t = prop5_reference_truncated(setup.u, sigma2, c.n, t, c.reps, rng);
    const auto ref_p = prop5_reference_penalized(setup.u, setup.dr.eigenvalues, sigma2, c.n, c.lambda, c.reps, rng);
    ResultTable local;
    const auto cell = prop5_cell(t);
    local.add(cell, 0, "ks_truncated", stats::ks_two_sample(sim.truncated, ref_t));
    local.add(cell, 0, "ks_penalized", stats::ks_two_sample(sim.penalized, ref_p));
    local.add(cell, 0, "mean_truncated", stats::mean(sim.truncated));
    local.add(cell, 0, "mean_truncated_theory", sigma2 * t / c.n + setup.u.tail(d - t).squaredNorm());
    local.add(cell, 0, "mean_penalized", stats::mean(sim.penalized));
    slots[ci] = std::move(local.records);
  });
  ResultTable out{to_string(c.experiment), c.seed, {}};
  for (const auto& s : slots) out.append(s);
  return out;
}

// ---------------------------------------------------------------- a5-screen

inline std::string a5_cell(const std::string& label, std::optional<double> n = {}) {
  return "schedule=" + label + (n ? ";n=" + level(*n) : std::string());
}

inline ResultTable run_a5_screen(const ExperimentConfig& c) {
  ResultTable out{to_string(c.experiment), c.seed, {}};
  for (const auto& e : c.a5_entries) {
    bool all = true;
    for (double n : c.a5_n) {
      const auto r = check_a5(e.schedule, n, e.c1, e.c2);
      const auto cell = a5_cell(e.label, n);
      out.add(cell, 0, "a", r.a);
      out.add(cell, 0, "b", r.b);
      out.add(cell, 0, "c", r.c);
      out.add(cell, 0, "n_eps_sq", r.n_eps_sq);
      if (std::isfinite(r.log_density)) out.add(cell, 0, "log_density", r.log_density);
      if (std::isfinite(r.log_tail)) out.add(cell, 0, "log_tail", r.log_tail);
      all = all && r.a && r.b && r.c;
    }
    out.add(a5_cell(e.label), -1, "all_true", all);
  }
  return out;
}

// ---------------------------------------------------------------------- fit

struct FitCurve {
  VectorXd x, mean, lower, upper;
};

struct RunOutput {
  ResultTable table;
  std::optional<FitCurve> curve;
};

inline RunOutput run_fit(const ExperimentConfig& c) {
  const std::uint64_t exp = experiment_id(c.experiment);
  Dataset data;
  if (!c.data_path.empty()) {
    data = read_xy_csv(c.data_path);
  } else {
    Rng rng(c.seed, {exp, 0});
    data = gen_data(test_function(c.functions.at(0)), c.n, c.sigma0, c.design, rng);
  }
  const auto n = static_cast<int>(data.x.size());
  const auto space = SplineSpace::equidistant(c.order, c.interior_knots);
  const auto design = design_matrix(space, data.x);
  const auto penalty = penalty_matrix(space, c.q);
  const auto chain = gibbs_run(model_spec(c, space), design, penalty, data.y, c.mcmc, stream_seed(c.seed, {exp, 1}));

  RunOutput out{ResultTable{to_string(c.experiment), c.seed, {}}, FitCurve{}};
  auto& table = out.table;
  const std::string cell = "model=" + describe(c.hyperprior);
  auto summarize = [&](const std::string& name, const VectorXd& draws) {
    const auto v = to_std(draws);
    table.add(cell, 0, name + "_mean", stats::mean(v));
    table.add(cell, 0, name + "_q025", stats::quantile(v, 0.025));
    table.add(cell, 0, name + "_q975", stats::quantile(v, 0.975));
  };
  summarize("tau2", chain.draws_tau2);
  summarize("sigma2", chain.draws_sigma2);
  table.add(cell, 0, "acceptance_tau2", chain.acceptance_rate_tau2);
  table.add(cell, 0, "ess_tau2", chain.ess.tau2);
  table.add(cell, 0, "ess_sigma2", chain.ess.sigma2);
  table.add(cell, 0, "ess_b_min", chain.ess.b_min);

  if (n >= space.dimension()) {
    const auto dr = dr_basis(design, penalty, space);
    const int t = c.cutoff > 0 ? c.cutoff : std::min(theorem_cutoff(n, c.q, c.m0), static_cast<int>(dr.dimension()));
    const auto fit = truncated_dr_fit(dr, data.y, t);
    table.add("estimator=truncated_dr", 0, "cutoff", t);
    table.add("estimator=truncated_dr", 0, "rss", (data.y - fit.fitted_values).squaredNorm());
    if (t < n) table.add("estimator=truncated_dr", 0, "sigma2_hat", sigma2_hat(data.y, fit));
  }

  const VectorXd xs = grid(c.grid_points);
  const auto band = posterior_summary(chain, design_matrix(space, xs));
  out.curve = FitCurve{xs, band.mean, band.lower, band.upper};
  for (Eigen::Index g = 0; g < xs.size(); ++g) {
    table.add(cell, 0, "curve_mean", band.mean(g), static_cast<int>(g));
    table.add(cell, 0, "curve_lower", band.lower(g), static_cast<int>(g));
    table.add(cell, 0, "curve_upper", band.upper(g), static_cast<int>(g));
  }
  return out;
}

inline RunOutput run_experiment(const ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::Adaptivity: return {run_adaptivity(c), {}};
    case Experiment::ProperVsMmr: return {run_proper_vs_mmr(c), {}};
    case Experiment::Concentration: return {run_concentration(c), {}};
    case Experiment::Prop5: return {run_prop5(c), {}};
    case Experiment::A5Screen: return {run_a5_screen(c), {}};
    case Experiment::Fit: return run_fit(c);
  }
  fail(ErrorKind::ConfigError, "unknown experiment");
}

inline std::string curve_csv(const FitCurve& curve) {
  std::string out = "x,mean,lower,upper\r\n";
  for (Eigen::Index g = 0; g < curve.x.size(); ++g)
    out += format_double(curve.x(g)) + "," + format_double(curve.mean(g)) + "," + format_double(curve.lower(g)) +
           "," + format_double(curve.upper(g)) + "\r\n";
  return out;
}

/// Writes results.csv, curve.csv (fit only) and manifest.json into `dir`.
inline void write_outputs(const std::filesystem::path& dir, const ExperimentConfig& c, const RunOutput& run,
                          double seconds) {
  std::filesystem::create_directories(dir);
  RunInfo info{c.threads, seconds, {}};
  const auto csv = to_csv(run.table);
  write_text(dir / "results.csv", csv);
  info.files.emplace_back("results.csv", sha1_hex(csv));
  if (run.curve) {
    const auto text = curve_csv(*run.curve);
    write_text(dir / "curve.csv", text);
    info.files.emplace_back("curve.csv", sha1_hex(text));
  }
  write_text(dir / "manifest.json", manifest(c, run.table, info).dump(2) + "\n");
}

}  // namespace penspline::harness
