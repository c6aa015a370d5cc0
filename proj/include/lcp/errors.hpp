#pragma once

#include <stdexcept>
#include <string>

namespace lcp {

/// Base for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor extents are inconsistent with the requested operation.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// An argument value is outside its documented domain.
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

/// A non-finite value appeared where finite math is required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

/// An object was used out of lifecycle order (e.g. a cache from another model).
class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error(msg) {}
};

/// File read/write failure.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// A dataset split request cannot be satisfied.
class SplitError : public Error {
public:
    explicit SplitError(const std::string& msg) : Error(msg) {}
};

/// Bad or unknown configuration content.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace lcp
