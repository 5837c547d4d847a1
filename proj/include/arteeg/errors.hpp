#pragma once

#include <stdexcept>
#include <string>

namespace arteeg {

// Base for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments, malformed files, impossible shape requests. CLI exit code 2.
struct UsageError : Error {
    using Error::Error;
};

struct ShapeError : UsageError {
    using UsageError::UsageError;
};

// A target-sequence mode needs a reference signal that was not provided.
struct MissingTarget : UsageError {
    using UsageError::UsageError;
};

// Checkpoint bytes fail structural or CRC validation.
struct CorruptCheckpoint : UsageError {
    using UsageError::UsageError;
};

// Checkpoint parameter names/shapes disagree with the receiving model.
struct ShapeMismatch : UsageError {
    using UsageError::UsageError;
};

// NaN/Inf or other numeric breakdown. CLI exit code 3.
struct NumericalError : Error {
    using Error::Error;
};

// A channel with (near-)zero variance where normalization is required.
struct DegenerateChannel : NumericalError {
    using NumericalError::NumericalError;
};

} // namespace arteeg
