#pragma once

#include <stdexcept>
#include <string>

namespace bsde {

// Invalid or inconsistent user-supplied data: bad grids, bad measures,
// divergent quadrature, mismatched discretizations.
class ConfigurationError : public std::runtime_error {
public:
    explicit ConfigurationError(const std::string& what) : std::runtime_error(what) {}
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::invalid_argument {
public:
    explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

// A numerical procedure failed (fixed point did not converge, etc.).
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace bsde
