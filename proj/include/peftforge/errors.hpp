#pragma once

#include <stdexcept>
#include <string>

namespace peftforge {

// Error hierarchy used across the library. Tests match on the concrete type.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes are incompatible; the message names both shapes.
struct ShapeError : Error {
    using Error::Error;
};

// A configuration value is invalid for the target model or operation.
struct ConfigError : Error {
    using Error::Error;
};

// A precondition of an operation was violated by the caller.
struct ContractError : Error {
    using Error::Error;
};

// Non-finite values where finite ones are required.
struct NumericError : Error {
    using Error::Error;
};

// An id or index is out of range.
struct IndexError : Error {
    using Error::Error;
};

// Malformed input file; the message carries the position when known.
struct ParseError : Error {
    using Error::Error;
};

// Stored data fails an integrity check.
struct CorruptionError : Error {
    using Error::Error;
};

}  // namespace peftforge
