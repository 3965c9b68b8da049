#pragma once

#include <stdexcept>
#include <string>

namespace striatum {

/// Base for every error the library raises on bad input or failed IO.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor or layer shapes that do not compose.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A caller-supplied value violates a documented precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// File-level failures (missing, unreadable, truncated, corrupted).
class IoError : public Error {
public:
    using Error::Error;
};

/// Training diverged or otherwise could not complete.
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace striatum
