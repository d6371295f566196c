#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rigidkit {

// Malformed input file (not valid JSON, wrong value types).
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input parsed but violates an invariant. The message names the offending field.
class ValidationError : public std::invalid_argument {
public:
    ValidationError(const std::string& field, const std::string& what)
        : std::invalid_argument(field + ": " + what), field_(field) {}

    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

// Non-finite values or a degenerate geometric construction.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NonFiniteState : public NumericalError {
public:
    explicit NonFiniteState(std::size_t step)
        : NumericalError("non-finite state at step " + std::to_string(step)), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace rigidkit
