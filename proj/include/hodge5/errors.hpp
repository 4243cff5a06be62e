#pragma once

#include <stdexcept>
#include <string>

namespace hodge5 {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed arguments: wrong tuple length, index out of range, bad sizes.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Input sits on a degenerate point of an operation (zero mode, zero eigenvalue).
class DegenerateError : public ArgumentError {
public:
    using ArgumentError::ArgumentError;
};

/// Form ranks that do not fit together (p + q > 5, mismatched ranks).
class RankError : public Error {
public:
    using Error::Error;
};

/// A metric that is not symmetric positive definite.
class MetricError : public Error {
public:
    using Error::Error;
};

/// Inconsistent discretization or experiment configuration.
class ConfigurationError : public Error {
public:
    using Error::Error;
};

/// An iterative method failed to reach its tolerance.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")")
        , m_residual(residual)
    {}

    double residual() const { return m_residual; }

private:
    double m_residual;
};

/// A numerical precondition of an operation was violated by its inputs.
class ContractError : public Error {
public:
    using Error::Error;
};

/// The eigenvalue window around a degenerate eigenvalue does not isolate it.
class GapTooSmallError : public ContractError {
public:
    using ContractError::ContractError;
};

/// A mathematical invariant failed numerically; signals a bug or a too-coarse tolerance.
class InvariantViolation : public Error {
public:
    using Error::Error;
};

} // namespace hodge5
