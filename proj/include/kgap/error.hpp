#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgap {

// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Incompatible tensor shapes.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Unreadable or unparsable input stream.
class IngestError : public std::runtime_error {
public:
    IngestError(const std::string& what, std::size_t line = 0)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// Input parsed but violates a data invariant.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite values during training or checking.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace kgap
