#pragma once

#include <stdexcept>
#include <string>

namespace driftfit {

/// Base class for all driftfit failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A covariance matrix failed its positive-definiteness check.
class NotSpdError : public Error {
public:
    using Error::Error;
};

/// Drift evaluation or integration produced a non-finite value.
class NonFiniteError : public Error {
public:
    using Error::Error;
};

/// Observed data collapses to a point in some dimension.
class DegenerateDomainError : public Error {
public:
    using Error::Error;
};

/// Normal-equation factorization failed without regularization.
class SingularSystemError : public Error {
public:
    using Error::Error;
};

/// Iterative fitting produced a non-finite loss.
class DivergedError : public Error {
public:
    using Error::Error;
};

/// Replay requested on an ensemble without recorded noise.
class MissingNoiseError : public Error {
public:
    using Error::Error;
};

/// Expression text could not be parsed; carries the byte offset of the fault.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Expression references a name that is neither a variable nor a function.
class UnknownIdentifierError : public ParseError {
public:
    using ParseError::ParseError;
};

/// A function was called with the wrong number of arguments.
class ArityError : public ParseError {
public:
    using ParseError::ParseError;
};

/// Configuration file violates the schema.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level read/write failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// File contents violate the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Persisted model written by an incompatible format version.
class VersionMismatchError : public Error {
public:
    using Error::Error;
};

} // namespace driftfit
