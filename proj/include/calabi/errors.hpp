#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace calabi {

// Configuration or input rejected before any numerics ran.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A field failed validation (non-finite entries, grid mismatch, ...).
class InvalidFieldError : public std::runtime_error {
public:
    explicit InvalidFieldError(const std::string& what) : std::runtime_error(what) {}
};

// Metric positivity lost: smallest eigenvalue of delta + dd-bar(phi) fell
// below the admissibility floor. Carries the offending value and location.
class NonAdmissibleError : public std::runtime_error {
public:
    NonAdmissibleError(double min_eigenvalue, std::size_t flat_index)
        : std::runtime_error("metric not admissible: min eigenvalue "
                             + std::to_string(min_eigenvalue) + " at index "
                             + std::to_string(flat_index)),
          min_eigenvalue(min_eigenvalue), flat_index(flat_index) {}

    double min_eigenvalue;
    std::size_t flat_index;
};

// An iterative solver ran out of its iteration budget.
class NoConvergenceError : public std::runtime_error {
public:
    NoConvergenceError(const std::string& solver, int iterations, double residual)
        : std::runtime_error(solver + " did not converge: residual "
                             + std::to_string(residual) + " after "
                             + std::to_string(iterations) + " iterations"),
          iterations(iterations), residual(residual) {}

    int iterations;
    double residual;
};

// Time stepper could not produce an acceptable step at the minimum step size.
class StepFailureError : public std::runtime_error {
public:
    StepFailureError(double t, double dt, const std::string& reason)
        : std::runtime_error("step failure at t = " + std::to_string(t)
                             + ", dt = " + std::to_string(dt) + ": " + reason),
          t(t), dt(dt), reason(reason) {}

    double t;
    double dt;
    std::string reason;
};

// Quadratic form handed to CG turned out not to be positive definite.
class IndefiniteFormError : public std::runtime_error {
public:
    explicit IndefiniteFormError(const std::string& what) : std::runtime_error(what) {}
};

// Coefficient field on the disc lost uniform ellipticity.
class EllipticityLostError : public std::runtime_error {
public:
    EllipticityLostError(double witness, std::size_t node)
        : std::runtime_error("ellipticity lost: witness " + std::to_string(witness)
                             + " at node " + std::to_string(node)),
          witness(witness), node(node) {}

    double witness;
    std::size_t node;
};

// A diagnostics series did not contain enough usable records.
class InsufficientDataError : public std::runtime_error {
public:
    explicit InsufficientDataError(const std::string& what) : std::runtime_error(what) {}
};

// Energy series fell to or below zero where a log-linear fit was requested.
class NonPositiveEnergyError : public std::runtime_error {
public:
    explicit NonPositiveEnergyError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace calabi
