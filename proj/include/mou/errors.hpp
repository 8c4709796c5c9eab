#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mou {

/// Base class for every error raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix/vector dimensions do not match what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Input values are outside an operation's domain (non-finite entries,
/// negative time constants, malformed masks, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A matrix that must be invertible is singular within tolerance.
/// Carries the magnitude of the offending eigenvalue / pivot.
class SingularityError : public Error {
public:
    SingularityError(const std::string& msg, double offending_magnitude)
        : Error(msg), offending_magnitude_(offending_magnitude) {}
    double offending_magnitude() const noexcept { return offending_magnitude_; }

private:
    double offending_magnitude_;
};

/// A system matrix violates the Hurwitz stability requirement.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Inputs are degenerate for the requested statistic (constant vectors,
/// zero real part, empty graphs after the redraw budget, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical integration or iterative fitting left the stable regime.
class InstabilityError : public Error {
public:
    using Error::Error;
};

/// Too few samples for the requested computation.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Malformed file contents; the message names the offending row/column.
class FormatError : public Error {
public:
    using Error::Error;
};

/// An iterative procedure made no progress. Carries the objective trace.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& msg, std::vector<double> trace)
        : Error(msg), trace_(std::move(trace)) {}
    const std::vector<double>& objective_trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

/// Training diverged (non-finite loss).
class DivergenceError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure (unreadable/unwritable paths).
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mou
