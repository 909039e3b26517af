#pragma once

#include <stdexcept>
#include <string>

namespace diffpac {

/// Base class of every error raised by the library. The CLI maps these to
/// exit status 3 (numerical failure); configuration problems use ConfigError.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotSquareError : public Error {
public:
    using Error::Error;
};

class NotPositiveDefiniteError : public Error {
public:
    NotPositiveDefiniteError(const std::string& what, double min_eigenvalue)
        : Error(what), min_eigenvalue_(min_eigenvalue) {}

    double min_eigenvalue() const noexcept { return min_eigenvalue_; }

private:
    double min_eigenvalue_;
};

class DimensionMismatchError : public Error {
public:
    using Error::Error;
};

class ResidualTooLargeError : public Error {
public:
    using Error::Error;
};

class SpectralRadiusTooLargeError : public Error {
public:
    using Error::Error;
};

class InvalidRangeError : public Error {
public:
    using Error::Error;
};

class TooFewSamplesError : public Error {
public:
    using Error::Error;
};

class UnstableDynamicsError : public Error {
public:
    using Error::Error;
};

class SingularDesignError : public Error {
public:
    using Error::Error;
};

class InvalidSpecError : public Error {
public:
    using Error::Error;
};

/// Raised when an invariant that floating-point noise cannot explain is broken.
class InternalError : public Error {
public:
    using Error::Error;
};

/// Malformed input files or command-line configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace diffpac
