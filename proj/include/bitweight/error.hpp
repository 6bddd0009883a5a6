#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bitweight {

// Length mismatches, bad indices and out-of-domain parameters are reported
// with std::invalid_argument. The types below cover the remaining failure
// classes.

/// A value violated a runtime invariant (e.g. a non-positive weight handed to
/// a multiplicative update).
class InvalidStateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Binary file with wrong magic, version, dimensions or truncated payload.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text input that could not be parsed; carries the 1-based line number.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// The sampler ran out of distinct quadruplets within its rejection budget.
class ExhaustionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace bitweight
