#pragma once

#include <stdexcept>
#include <string>

namespace sg {

// Base class for all errors raised by this library. The CLI maps subclasses
// to process exit codes, so new error kinds should subclass one of these.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input data (file contents, schema violations).
class ParseError : public Error {
public:
    using Error::Error;
};

// Filesystem / OS level failures.
class IoError : public Error {
public:
    using Error::Error;
};

// Caller passed structurally invalid arguments (overlapping masks, bad spec).
class InputError : public Error {
public:
    using Error::Error;
};

// Shape/dimension mismatch between operands.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Numerical failure (NaN loss, divergence).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, int step = -1)
        : Error(what), step_index(step) {}
    int step_index;
};

// A grounding backend could not answer for a view / query.
class GroundingFailedError : public Error {
public:
    using Error::Error;
};

// Transport or protocol failure talking to a remote backend.
class BackendError : public Error {
public:
    explicit BackendError(const std::string& what, int retries = 0)
        : Error(what), retry_count(retries) {}
    int retry_count;
};

} // namespace sg
