#pragma once

// Test functions and synthetic data from Y_i = f0(x_i) + sigma0 z_i.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "penspline/error.hpp"
#include "penspline/harness/config.hpp"
#include "penspline/random.hpp"

namespace penspline::harness {

struct TestFunction {
  enum class Kind { Sine, Linear, LinearSine } kind = Kind::Sine;
  int k = 1;  // sin((k - 1) pi x) for Kind::Sine
  std::string name;

  double operator()(double x) const {
    constexpr double pi = std::numbers::pi;
    switch (kind) {
      case Kind::Sine: return std::sin((k - 1) * pi * x);
      case Kind::Linear: return 4.0 * x - 2.0;
      case Kind::LinearSine: return 4.0 * x - 2.0 + std::sin(2.0 * pi * x);
    }
    return 0.0;
  }

  double second_derivative(double x) const {
    constexpr double pi = std::numbers::pi;
    switch (kind) {
      case Kind::Sine: {
        const double w = (k - 1) * pi;
        return -w * w * std::sin(w * x);
      }
      case Kind::Linear: return 0.0;
      case Kind::LinearSine: return -4.0 * pi * pi * std::sin(2.0 * pi * x);
    }
    return 0.0;
  }

  VectorXd operator()(const VectorXd& x) const { return x.unaryExpr([this](double v) { return (*this)(v); }); }
};

/// "sin1".."sin9" (f_k(x) = sin((k-1) pi x)), "linear" (4x - 2) and
/// "linear_sin" (4x - 2 + sin(2 pi x)).
inline TestFunction test_function(const std::string& name) {
  TestFunction f;
  f.name = name;
  if (name == "linear") {
    f.kind = TestFunction::Kind::Linear;
  } else if (name == "linear_sin") {
    f.kind = TestFunction::Kind::LinearSine;
  } else if (name.size() == 4 && name.rfind("sin", 0) == 0 && name[3] >= '1' && name[3] <= '9') {
    f.kind = TestFunction::Kind::Sine;
    f.k = name[3] - '0';
  } else {
    fail(ErrorKind::UnknownTestFunction, "unknown test function '" + name + "'");
  }
  return f;
}

struct Dataset {
  VectorXd x;
  VectorXd y;
  VectorXd f;  // f0 at x
};

inline Dataset gen_data(const TestFunction& f0, int n, double sigma0, DesignKind design, Rng& rng) {
  require(n >= 1, ErrorKind::InvalidArgument, "n must be >= 1");
  require(sigma0 >= 0.0, ErrorKind::InvalidArgument, "sigma0 must be >= 0");
  Dataset out;
  out.x.resize(n);
  if (design == DesignKind::Regular) {
    for (int i = 0; i < n; ++i) out.x(i) = static_cast<double>(i + 1) / n;
  } else {
    for (int i = 0; i < n; ++i) out.x(i) = rng.uniform();
  }
  out.f = f0(out.x);
  out.y = out.f;
  if (sigma0 > 0.0)
    for (int i = 0; i < n; ++i) out.y(i) += sigma0 * rng.normal();
  return out;
}

inline Dataset gen_data(const std::string& f0, int n, double sigma0, DesignKind design, std::uint64_t seed) {
  Rng rng(seed);
  return gen_data(test_function(f0), n, sigma0, design, rng);
}

/// Reads a CSV with a header containing columns x and y (any order, other
/// columns ignored). Points must lie in [0, 1].
inline Dataset read_xy_csv(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrorKind::ConfigError, "cannot open data file " + path);
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
      cells.push_back(cell);
    }
    return cells;
  };
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::ConfigError, path + " is empty");
  const auto header = split(line);
  int ix = -1, iy = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "x") ix = static_cast<int>(i);
    if (header[i] == "y") iy = static_cast<int>(i);
  }
  require(ix >= 0 && iy >= 0, ErrorKind::ConfigError, path + " needs columns x and y");
  std::vector<double> xs, ys;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    require(static_cast<int>(cells.size()) > std::max(ix, iy), ErrorKind::ConfigError,
            path + ": row " + std::to_string(row) + " is short");
    try {
      xs.push_back(std::stod(cells[static_cast<std::size_t>(ix)]));
      ys.push_back(std::stod(cells[static_cast<std::size_t>(iy)]));
    } catch (const std::exception&) {
      fail(ErrorKind::ConfigError, path + ": row " + std::to_string(row) + " is not numeric");
    }
    require(xs.back() >= 0.0 && xs.back() <= 1.0, ErrorKind::ConfigError,
            path + ": row " + std::to_string(row) + " has x outside [0, 1]");
  }
  require(!xs.empty(), ErrorKind::ConfigError, path + " has no data rows");
  Dataset out;
  out.x = Eigen::Map<VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  out.y = Eigen::Map<VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return out;
}

}  // namespace penspline::harness
