#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace mnlmdp {

/// Bad argument to a numerical routine (empty input, dimension mismatch, unreachable state).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// The input is mathematically fine but exceeds an implementation limit.
class UnsupportedSizeError : public DomainError {
public:
    using DomainError::DomainError;
};

/// A well-formed document or object violates a model invariant (norm bound, probability table).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed configuration document. `path` is a JSON-pointer-like location.
class ParseError : public std::invalid_argument {
public:
    ParseError(std::string path, const std::string& what)
        : std::invalid_argument(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// Inconsistent runtime configuration (missing estimator, bad experiment settings).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mnlmdp
