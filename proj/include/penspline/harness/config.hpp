#pragma once

// Experiment configuration: JSON in, typed struct out. Unknown keys anywhere
// are rejected so a typo cannot silently fall back to a default.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "penspline/error.hpp"
#include "penspline/priors.hpp"
#include "penspline/sampler.hpp"

namespace penspline::harness {

using Json = nlohmann::json;

enum class Experiment { Adaptivity, ProperVsMmr, Concentration, Prop5, A5Screen, Fit };
enum class DesignKind { UniformRandom, Regular };

inline std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::Adaptivity: return "adaptivity";
    case Experiment::ProperVsMmr: return "proper-vs-mmr";
    case Experiment::Concentration: return "concentration";
    case Experiment::Prop5: return "prop5";
    case Experiment::A5Screen: return "a5-screen";
    case Experiment::Fit: return "fit";
  }
  return "unknown";
}

inline Experiment parse_experiment(const std::string& name) {
  for (auto e : {Experiment::Adaptivity, Experiment::ProperVsMmr, Experiment::Concentration, Experiment::Prop5,
                 Experiment::A5Screen, Experiment::Fit})
    if (to_string(e) == name) return e;
  fail(ErrorKind::ConfigError, "unknown experiment '" + name + "'");
}

struct A5Entry {
  std::string label;
  RateSchedule schedule;
  double c1 = 0.5;
  double c2 = 1.0;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::Fit;
  int n = 100;
  int replicates = 100;
  std::uint64_t seed = 1;
  double sigma0 = 0.25;
  DesignKind design = DesignKind::UniformRandom;
  int order = 4;
  int interior_knots = 20;
  int q = 2;
  HyperPrior hyperprior = Weibull{0.5, 1.0 / 500.0};
  ResidualVariance residual = InverseGammaVariance{1e-3, 1e-3};
  ProperPriorSpec prior{};
  McmcOptions mcmc{};
  int grid_points = 201;
  std::vector<std::string> functions;

  // adaptivity
  std::vector<double> fixed_tau2{0.5, 5.0, 50.0, 500.0, 5000.0};
  // proper-vs-mmr
  std::vector<double> log10_tau2_poly;
  // concentration
  std::vector<int> n_grid{250, 500, 1000, 2000, 4000};
  int frequentist_replicates = 200;
  int draws = 1000;
  double radius = 1.0;
  int m0 = 2;
  RateSchedule schedule{};
  bool unknown_variance_arm = true;
  // prop5
  std::vector<int> cutoffs{3, 6, 0};  // 0 = d
  double lambda = 1.0;  // O-splines smoothing parameter
  int reps = 5000;
  // a5-screen
  std::vector<double> a5_n{1e3, 1e4, 1e5};
  std::vector<A5Entry> a5_entries;
  // fit
  std::string data_path;
  int cutoff = 0;  // 0 = theorem cutoff

  int threads = 1;
  Json source;  // the parsed document, echoed into the manifest
};

namespace detail {

/// Walks a JSON object, handing out values by key and remembering which keys
/// were consumed; finish() rejects the rest.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j_.is_object(), ErrorKind::ConfigError, where_ + " must be a JSON object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  const Json& at(const std::string& key) {
    used_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::ConfigError, where_ + "." + key + ": " + e.what());
    }
  }

  template <class T>
  T need(const std::string& key) {
    require(has(key), ErrorKind::ConfigError, where_ + " is missing '" + key + "'");
    T out{};
    get(key, out);
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      require(used_.count(it.key()) > 0, ErrorKind::ConfigError, "unknown key '" + it.key() + "' in " + where_);
  }

  const std::string& where() const { return where_; }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> used_;
};

inline HyperPrior parse_hyperprior(const Json& j, const std::string& where) {
  ObjectReader r(j, where);
  const auto family = r.need<std::string>("family");
  HyperPrior hp;
  if (family == "inverse_gamma") hp = InverseGamma{r.need<double>("shape"), r.need<double>("scale")};
  else if (family == "gamma") hp = Gamma{r.need<double>("shape"), r.need<double>("rate")};
  else if (family == "weibull") hp = Weibull{r.need<double>("shape"), r.need<double>("rate")};
  else if (family == "uniform") hp = Uniform{r.need<double>("upper")};
  else if (family == "scaled_beta_prime")
    hp = ScaledBetaPrime{r.need<double>("alpha"), r.need<double>("beta"), r.need<double>("scale")};
  else if (family == "fixed") hp = Fixed{r.need<double>("value")};
  else fail(ErrorKind::ConfigError, where + ": unknown hyperprior family '" + family + "'");
  r.finish();
  try {
    validate(hp);
  } catch (const Error& e) {
    fail(ErrorKind::ConfigError, where + ": " + e.what());
  }
  return hp;
}

inline ResidualVariance parse_residual(const Json& j, const std::string& where) {
  ObjectReader r(j, where);
  const auto family = r.need<std::string>("family");
  ResidualVariance out;
  if (family == "known") {
    out = KnownVariance{r.need<double>("sigma2")};
    require(std::get<KnownVariance>(out).sigma2 > 0.0, ErrorKind::ConfigError, where + ".sigma2 must be > 0");
  } else if (family == "inverse_gamma") {
    const InverseGammaVariance v{r.need<double>("shape"), r.need<double>("scale")};
    require(v.shape > 0.0 && v.scale > 0.0, ErrorKind::ConfigError, where + " parameters must be > 0");
    out = v;
  } else {
    fail(ErrorKind::ConfigError, where + ": residual family must be 'known' or 'inverse_gamma'");
  }
  r.finish();
  return out;
}

inline ScheduleFamily parse_schedule_family(const std::string& s, const std::string& where) {
  if (s == "uniform") return ScheduleFamily::Uniform;
  if (s == "gamma") return ScheduleFamily::Gamma;
  if (s == "weibull") return ScheduleFamily::Weibull;
  if (s == "inverse_gamma") return ScheduleFamily::InverseGamma;
  if (s == "scaled_beta_prime") return ScheduleFamily::ScaledBetaPrime;
  fail(ErrorKind::ConfigError, where + ": unknown schedule family '" + s + "'");
}

inline void parse_schedule_fields(ObjectReader& r, RateSchedule& s) {
  s.family = parse_schedule_family(r.need<std::string>("family"), r.where());
  r.get("c", s.c);
  r.get("c_beta", s.c_beta);
  r.get("c_lambda", s.c_lambda);
  r.get("alpha", s.alpha);
  r.get("beta", s.beta);
  r.get("k", s.k);
  r.get("m0", s.m0);
}

inline std::vector<double> parse_log_grid(const Json& j, const std::string& where) {
  if (j.is_array()) return j.get<std::vector<double>>();
  ObjectReader r(j, where);
  const auto from = r.need<double>("from"), to = r.need<double>("to"), step = r.need<double>("step");
  r.finish();
  require(step > 0.0 && to >= from, ErrorKind::ConfigError, where + ": need step > 0 and to >= from");
  const auto count = static_cast<int>(std::llround((to - from) / step)) + 1;
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = from + step * i;
  out.back() = to;
  return out;
}

inline void apply_defaults(ExperimentConfig& c) {
  switch (c.experiment) {
    case Experiment::Adaptivity:
      c.functions = {"sin1", "sin2", "sin3", "sin4", "sin5", "sin6", "sin7"};
      break;
    case Experiment::ProperVsMmr:
      c.functions = {"linear", "linear_sin"};
      c.sigma0 = 0.1;
      c.replicates = 1;
      c.log10_tau2_poly = parse_log_grid(Json{{"from", -4.0}, {"to", -2.0}, {"step", 0.05}}, "default");
      break;
    case Experiment::Concentration:
      c.functions = {"sin3"};
      c.design = DesignKind::Regular;
      c.replicates = 20;
      c.mcmc.thin = 10;
      c.prior = {PriorFlavor::ProperProjection, 1.0};
      c.schedule.family = ScheduleFamily::Weibull;
      c.schedule.c_lambda = 0.01;
      c.radius = 0.3;
      break;
    case Experiment::Prop5:
      c.functions = {"sin3"};
      c.n = 200;
      c.interior_knots = 8;
      c.design = DesignKind::Regular;
      c.sigma0 = 0.5;
      c.lambda = 0.01;
      break;
    case Experiment::A5Screen:
      break;
    case Experiment::Fit:
      c.functions = {"sin3"};
      c.replicates = 1;
      break;
  }
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  detail::ObjectReader r(j, "config");
  ExperimentConfig c;
  c.source = j;
  c.experiment = parse_experiment(r.need<std::string>("experiment"));
  detail::apply_defaults(c);

  r.get("n", c.n);
  r.get("replicates", c.replicates);
  r.get("seed", c.seed);
  r.get("sigma0", c.sigma0);
  if (r.has("design")) {
    const auto d = r.need<std::string>("design");
    if (d == "uniform") c.design = DesignKind::UniformRandom;
    else if (d == "regular") c.design = DesignKind::Regular;
    else fail(ErrorKind::ConfigError, "design must be 'uniform' or 'regular'");
  }
  r.get("order", c.order);
  r.get("interior_knots", c.interior_knots);
  r.get("q", c.q);
  if (r.has("hyperprior")) c.hyperprior = detail::parse_hyperprior(r.at("hyperprior"), "hyperprior");
  if (r.has("residual")) c.residual = detail::parse_residual(r.at("residual"), "residual");
  if (r.has("prior")) {
    detail::ObjectReader p(r.at("prior"), "prior");
    const auto flavor = p.need<std::string>("flavor");
    if (flavor == "improper") c.prior.flavor = PriorFlavor::Improper;
    else if (flavor == "projection") c.prior.flavor = PriorFlavor::ProperProjection;
    else if (flavor == "mmr") c.prior.flavor = PriorFlavor::ProperMMR;
    else fail(ErrorKind::ConfigError, "prior.flavor must be improper, projection or mmr");
    p.get("tau2_poly", c.prior.tau2_poly);
    p.finish();
  }
  if (r.has("mcmc")) {
    detail::ObjectReader m(r.at("mcmc"), "mcmc");
    m.get("iters", c.mcmc.iters);
    m.get("burn_in", c.mcmc.burn_in);
    m.get("thin", c.mcmc.thin);
    m.get("target_acceptance", c.mcmc.target_acceptance);
    m.finish();
  }
  r.get("grid_points", c.grid_points);
  r.get("functions", c.functions);
  r.get("fixed_tau2", c.fixed_tau2);
  if (r.has("log10_tau2_poly")) c.log10_tau2_poly = detail::parse_log_grid(r.at("log10_tau2_poly"), "log10_tau2_poly");
  r.get("n_grid", c.n_grid);
  r.get("frequentist_replicates", c.frequentist_replicates);
  r.get("draws", c.draws);
  r.get("radius", c.radius);
  r.get("m0", c.m0);
  if (r.has("schedule")) {
    detail::ObjectReader s(r.at("schedule"), "schedule");
    detail::parse_schedule_fields(s, c.schedule);
    s.finish();
  }
  c.schedule.m0 = c.m0;
  r.get("unknown_variance_arm", c.unknown_variance_arm);
  r.get("cutoffs", c.cutoffs);
  r.get("lambda", c.lambda);
  r.get("reps", c.reps);
  r.get("a5_n", c.a5_n);
  if (r.has("a5_schedules")) {
    const Json& list = r.at("a5_schedules");
    require(list.is_array(), ErrorKind::ConfigError, "a5_schedules must be an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      detail::ObjectReader s(list[i], "a5_schedules[" + std::to_string(i) + "]");
      A5Entry e;
      detail::parse_schedule_fields(s, e.schedule);
      e.label = s.need<std::string>("label");
      s.get("c1", e.c1);
      s.get("c2", e.c2);
      s.finish();
      c.a5_entries.push_back(e);
    }
  }
  r.get("data", c.data_path);
  r.get("cutoff", c.cutoff);
  r.get("threads", c.threads);
  r.finish();

  require(c.n >= 1, ErrorKind::ConfigError, "n must be >= 1");
  require(c.replicates >= 1, ErrorKind::ConfigError, "replicates must be >= 1");
  require(c.sigma0 >= 0.0, ErrorKind::ConfigError, "sigma0 must be >= 0");
  require(c.order >= 2 && c.interior_knots >= 0, ErrorKind::ConfigError, "need order >= 2, interior_knots >= 0");
  require(c.q >= 1 && c.q <= c.order - 1, ErrorKind::ConfigError, "need 1 <= q <= order - 1");
  require(c.mcmc.iters > c.mcmc.burn_in && c.mcmc.burn_in >= 0 && c.mcmc.thin >= 1, ErrorKind::ConfigError,
          "mcmc needs iters > burn_in >= 0 and thin >= 1");
  require(c.grid_points >= 2, ErrorKind::ConfigError, "grid_points must be >= 2");
  require(c.threads >= 1, ErrorKind::ConfigError, "threads must be >= 1");
  require(c.draws >= 1 && c.reps >= 1 && c.frequentist_replicates >= 1, ErrorKind::ConfigError,
          "draws, reps and frequentist_replicates must be >= 1");
  for (int n : c.n_grid) require(n >= 2, ErrorKind::ConfigError, "n_grid entries must be >= 2");
  for (double v : c.a5_n) require(v >= 2.0, ErrorKind::ConfigError, "a5_n entries must be >= 2");
  const int d = c.order + c.interior_knots;
  if (c.experiment == Experiment::Prop5)
    require(c.n >= d, ErrorKind::ConfigError, "prop5 needs n >= d = " + std::to_string(d));
  if (c.experiment == Experiment::A5Screen && c.a5_entries.empty())
    fail(ErrorKind::ConfigError, "a5-screen needs a non-empty a5_schedules list");
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::ConfigError, "cannot open config file " + path);
  Json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::ConfigError, path + ": " + e.what());
  }
  return parse_config(j);
}

}  // namespace penspline::harness
