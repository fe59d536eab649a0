#pragma once

#include <stdexcept>
#include <string>

namespace kdgp {

/// A point or value lies outside the domain an operation is defined on
/// (e.g. evaluating a Hilbert eigenfunction outside [-L, L]^2).
struct OutOfDomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A numerical routine lost well-posedness (non-PD matrix after jitter,
/// negative variance beyond round-off, NaN in a solver).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An experiment configuration cannot be realized (e.g. no connected
/// deployment found within the retry budget).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace kdgp
