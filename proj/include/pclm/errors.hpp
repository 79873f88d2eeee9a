#pragma once

#include <stdexcept>
#include <string>

namespace pclm {

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shapes of inputs do not conform (row/column/extent mismatch).
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

/// Input values violate a documented precondition (bad partition, negative
/// smoothing parameter, malformed spec, ...).
class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// A numeric computation degenerated (singular system, negative variance,
/// redistribution over an all-zero group, ...).
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

/// A requested allocation exceeds the configured element budget.
class ResourceError : public Error {
public:
    explicit ResourceError(const std::string& msg) : Error(msg) {}
};

/// File parsing / consistency failures in the CLI layer.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

} // namespace pclm
