#pragma once

#include <stdexcept>
#include <string>

namespace tnvae {

/// Failure classes. The numeric values double as CLI exit codes.
enum class ErrorKind : int { usage = 1, data = 2, numeric = 3 };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Bad arguments, invalid configuration, mismatched shapes.
class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class ShapeError : public UsageError {
public:
    explicit ShapeError(const std::string& what) : UsageError("shape error: " + what) {}
};

class ConfigError : public UsageError {
public:
    explicit ConfigError(const std::string& what) : UsageError("config error: " + what) {}
};

/// Malformed or missing input data (CSV ingestion, manifests, records).
class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// Non-finite values or degenerate numerical configurations.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, int layer = -1)
        : Error(ErrorKind::numeric, what), layer_(layer) {}

    /// Index of the network layer that produced the value, or -1.
    int layer() const noexcept { return layer_; }

private:
    int layer_;
};

} // namespace tnvae
