#pragma once

#include <stdexcept>
#include <string>

namespace turbokv {

// All engine errors derive from Error so callers can catch the whole family,
// while tests can pin the exact category.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor/operand dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A value is outside its domain (negative position, token id >= vocab, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Inconsistent model/engine configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A softmax row with no attendable positions.
class DegenerateRowError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

// A cache or index file that cannot be parsed (bad magic, truncation, ...).
class FormatError : public Error {
public:
    using Error::Error;
};

// Lookup of an id that was never stored.
class NotFoundError : public Error {
public:
    using Error::Error;
};

// Stored cache does not match the current model config/weights.
class StaleCacheError : public Error {
public:
    using Error::Error;
};

// A question was asked against an empty store; the engine refuses to answer.
class NoContextError : public Error {
public:
    using Error::Error;
};

} // namespace turbokv
