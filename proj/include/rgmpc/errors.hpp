#pragma once

#include <stdexcept>
#include <string>

namespace rgmpc {

/// An iterative solver exhausted its iteration budget. Carries the last
/// residual so the caller can decide whether the partial answer is usable.
class NoConvergenceError : public std::runtime_error {
public:
    NoConvergenceError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual(residual), iterations(iterations) {}

    double residual;
    int iterations;
};

/// A matrix that must be Schur stable (spectral radius < 1) is not.
class InstabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// No steady state exists for the requested reference.
class InfeasibleReferenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The constrained optimal control problem has an empty feasible set.
class InfeasibleOcpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The invariant set around the requested center would have level zero.
class DegenerateSetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The governor could not be initialized admissibly at (x0, v0).
class InitializationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A scenario or campaign configuration file is malformed.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace rgmpc
