#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace penspline {

enum class ErrorKind {
  NonIncreasingKnots,
  InvalidArgument,
  DerivativeOrderTooHigh,
  PointOutOfDomain,
  GramianNotPositiveDefinite,
  DimensionMismatch,
  SingularSystem,
  CutoffOutOfRange,
  DegreesOfFreedomExhausted,
  NonPositiveInput,
  ZeroRoughness,
  RankDeficientMonomialDesign,
  InvalidShape,
  SingularPrecision,
  NonFiniteLogPosterior,
  EmptyChain,
  UnknownTestFunction,
  ConfigError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonIncreasingKnots: return "NonIncreasingKnots";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DerivativeOrderTooHigh: return "DerivativeOrderTooHigh";
    case ErrorKind::PointOutOfDomain: return "PointOutOfDomain";
    case ErrorKind::GramianNotPositiveDefinite: return "GramianNotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::CutoffOutOfRange: return "CutoffOutOfRange";
    case ErrorKind::DegreesOfFreedomExhausted: return "DegreesOfFreedomExhausted";
    case ErrorKind::NonPositiveInput: return "NonPositiveInput";
    case ErrorKind::ZeroRoughness: return "ZeroRoughness";
    case ErrorKind::RankDeficientMonomialDesign: return "RankDeficientMonomialDesign";
    case ErrorKind::InvalidShape: return "InvalidShape";
    case ErrorKind::SingularPrecision: return "SingularPrecision";
    case ErrorKind::NonFiniteLogPosterior: return "NonFiniteLogPosterior";
    case ErrorKind::EmptyChain: return "EmptyChain";
    case ErrorKind::UnknownTestFunction: return "UnknownTestFunction";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Numerical failures map to CLI exit code 3, everything else to 2.
  bool is_numerical() const noexcept {
    switch (kind_) {
      case ErrorKind::GramianNotPositiveDefinite:
      case ErrorKind::SingularSystem:
      case ErrorKind::SingularPrecision:
      case ErrorKind::NonFiniteLogPosterior:
      case ErrorKind::ZeroRoughness:
      case ErrorKind::RankDeficientMonomialDesign:
      case ErrorKind::DegreesOfFreedomExhausted:
        return true;
      default:
        return false;
    }
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace penspline
