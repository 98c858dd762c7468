#pragma once

#include <stdexcept>
#include <string>

namespace qbd {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document or a model that breaks a structural invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed: no convergence, singular system, failed split.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// The linear constraint on the free parameter y has no solution.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

} // namespace qbd
