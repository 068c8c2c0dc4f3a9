#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace srcatr {

// Malformed or inconsistent experiment / CLI configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: unreadable files, corrupt containers, inconsistent pools.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Byte-stream parse failure; offset points at the first offending byte.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t offset)
        : DataError(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

// The solver could not continue (e.g. repeated rank-deficient active sets).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace srcatr
