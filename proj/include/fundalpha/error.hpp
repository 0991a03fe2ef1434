#pragma once

#include <stdexcept>
#include <string>

namespace fundalpha {

// Malformed input text (CSV cells, headers, dates).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Well-formed input that violates a data-model invariant
// (duplicate months, gaps, missing factor columns, misaligned funds).
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration values.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

enum class FitErrorKind { SingularDesign, InsufficientObservations, Degenerate, Mismatch };

class FitError : public std::runtime_error {
public:
    FitError(FitErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    FitErrorKind kind() const noexcept { return kind_; }

private:
    FitErrorKind kind_;
};

} // namespace fundalpha
