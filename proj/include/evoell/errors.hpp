#pragma once

#include <stdexcept>
#include <string>

namespace evoell {

// Bad arguments / misuse of an interface.
struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Input outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// A matrix that was required to be positive-definite is not.
struct NotPositiveDefinite : DomainError {
    NotPositiveDefinite(const std::string& what, double min_eig)
        : DomainError(what + " (min eigenvalue " + std::to_string(min_eig) + ")"),
          min_eigenvalue(min_eig) {}
    double min_eigenvalue;
};

// A configured cap (enumeration size, watch list, ...) was exceeded.
struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Discretization broke down (e.g. positive-definiteness lost at dt_min).
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace evoell
