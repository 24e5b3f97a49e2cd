#pragma once

#include <stdexcept>
#include <string>

namespace athpo {

// Bad user-supplied configuration (empty candidate set, invalid bounds, ...).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input file (CSV row/column context goes in the message).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite gradients while synthesizing a perturbation.
struct AttackError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training loss went non-finite or blew past the divergence cap.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// GP covariance could not be factorized even at maximum jitter.
struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A replay oracle was asked to cover keys the dataset does not contain.
struct CoverageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace athpo
