// penspline <experiment> --config <path.json> [--seed S] [--out DIR] [--threads T]
// penspline fit --data <csv with columns x,y> [--config ...]
//
// Exit codes: 0 success, 2 config error, 3 numerical failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "penspline/harness.hpp"

namespace h = penspline::harness;

int main(int argc, char** argv) {
  CLI::App app{"Bayesian penalized-spline regression experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool quiet = false;

  for (const char* name : {"adaptivity", "proper-vs-mmr", "concentration", "prop5", "a5-screen", "fit"}) {
    auto* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "experiment config (JSON)");
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", out_dir, "output directory (default results/<experiment>)");
    sub->add_option("--threads", threads, "worker threads");
    sub->add_flag("--quiet", quiet, "no summary on stdout");
    if (std::string(name) == "fit") sub->add_option("--data", data_path, "CSV with columns x,y");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  const std::string experiment = app.get_subcommands().front()->get_name();

  try {
    h::Json j;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in.good()) throw penspline::Error(penspline::ErrorKind::ConfigError, "cannot open " + config_path);
      try {
        in >> j;
      } catch (const h::Json::exception& e) {
        throw penspline::Error(penspline::ErrorKind::ConfigError, config_path + ": " + e.what());
      }
      if (!j.is_object())
        throw penspline::Error(penspline::ErrorKind::ConfigError, config_path + " must hold a JSON object");
      if (j.contains("experiment") && j["experiment"] != experiment)
        throw penspline::Error(penspline::ErrorKind::ConfigError,
                               "config is for experiment " + j["experiment"].dump() + ", not " + experiment);
    }
    j["experiment"] = experiment;
    if (seed) j["seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (!data_path.empty()) j["data"] = data_path;
    const auto config = h::parse_config(j);

    const auto start = std::chrono::steady_clock::now();
    const auto run = h::run_experiment(config);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::filesystem::path dir = out_dir.empty() ? std::filesystem::path("results") / experiment : std::filesystem::path(out_dir);
    h::write_outputs(dir, config, run, seconds);
    if (!quiet) {
      for (const auto& r : run.table.records) {
        if (r.replicate != -1) continue;
        std::printf("%-60s %-24s %.6g\n", r.cell.c_str(), r.metric.c_str(), r.value);
      }
      std::printf("%zu records written to %s (%.1f s)\n", run.table.records.size(), (dir / "results.csv").c_str(),
                  seconds);
    }
    return 0;
  } catch (const penspline::Error& e) {
    std::fprintf(stderr, "penspline: %s\n", e.what());
    return e.is_numerical() ? 3 : 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "penspline: %s\n", e.what());
    return 2;
  }
}
