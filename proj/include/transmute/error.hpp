#pragma once

#include <stdexcept>
#include <string>

namespace transmute {

enum class ErrorCode {
  dimension,
  grid_too_small,
  invalid_argument,
  non_finite,
  ellipticity,
  singular_system,
  singular_operator,
  convergence,
  degenerate_input,
  degenerate_frequency,
  domain,
  weight_overflow,
  k_too_small,
  config,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::grid_too_small: return "grid_too_small";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::ellipticity: return "ellipticity";
    case ErrorCode::singular_system: return "singular_system";
    case ErrorCode::singular_operator: return "singular_operator";
    case ErrorCode::convergence: return "convergence";
    case ErrorCode::degenerate_input: return "degenerate_input";
    case ErrorCode::degenerate_frequency: return "degenerate_frequency";
    case ErrorCode::domain: return "domain";
    case ErrorCode::weight_overflow: return "weight_overflow";
    case ErrorCode::k_too_small: return "k_too_small";
    case ErrorCode::config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Convergence failures keep the last residual so callers can report it.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double final_residual, int iterations)
      : Error(ErrorCode::convergence, what),
        final_residual_(final_residual),
        iterations_(iterations) {}

  double final_residual() const noexcept { return final_residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double final_residual_;
  int iterations_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace transmute
