// Copyright 2026 The ebmvar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EBMVAR_ERRORS_HPP
#define EBMVAR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ebmvar {

// Broad classes used by the CLI to pick an exit code.
enum class ErrorClass { config, numerical, stability, argument };

enum class ErrorKind {
  invalid_argument,
  config,
  degenerate_branch,
  inadmissible_variance,
  step_too_large,
  no_convergence,
  singular_jacobian,
  not_positive_definite,
  unstable_drift,
  non_finite_state,
  unstable_k,
  solve_failed,
  param_out_of_range,
  empty_sample,
  non_positive_threshold,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument: return "InvalidArgument";
    case ErrorKind::config: return "ConfigError";
    case ErrorKind::degenerate_branch: return "DegenerateBranch";
    case ErrorKind::inadmissible_variance: return "InadmissibleVariance";
    case ErrorKind::step_too_large: return "StepTooLarge";
    case ErrorKind::no_convergence: return "NoConvergence";
    case ErrorKind::singular_jacobian: return "SingularJacobian";
    case ErrorKind::not_positive_definite: return "NotPositiveDefinite";
    case ErrorKind::unstable_drift: return "UnstableDrift";
    case ErrorKind::non_finite_state: return "NonFiniteState";
    case ErrorKind::unstable_k: return "UnstableK";
    case ErrorKind::solve_failed: return "SolveFailed";
    case ErrorKind::param_out_of_range: return "ParamOutOfRange";
    case ErrorKind::empty_sample: return "EmptySample";
    case ErrorKind::non_positive_threshold: return "NonPositiveThreshold";
  }
  return "Unknown";
}

inline ErrorClass error_class(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return ErrorClass::config;
    case ErrorKind::unstable_drift:
    case ErrorKind::unstable_k: return ErrorClass::stability;
    case ErrorKind::invalid_argument:
    case ErrorKind::param_out_of_range:
    case ErrorKind::non_positive_threshold: return ErrorClass::argument;
    default: return ErrorClass::numerical;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Newton failure carries its final state.
class NoConvergenceError : public Error {
 public:
  NoConvergenceError(int iterations, double residual)
      : Error(ErrorKind::no_convergence,
              "after " + std::to_string(iterations) + " iterations, residual " +
                  std::to_string(residual)),
        iterations_(iterations),
        residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::invalid_argument, what);
}

}  // namespace ebmvar

#endif  // EBMVAR_ERRORS_HPP
