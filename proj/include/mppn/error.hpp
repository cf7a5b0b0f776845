#pragma once

#include <stdexcept>
#include <string>

namespace mppn {

// Error taxonomy. The CLI maps each family onto a process exit code:
// ConfigError -> 2, DataError -> 3, RuntimeFailure -> 4.

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shape disagreement. Treated as a configuration error at the CLI.
class DimensionError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Bad argument to a numeric routine (Q < 2, k < 1, even window, ...).
class ArgumentError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

// Malformed checkpoint or config file.
class FormatError : public DataError {
public:
    using DataError::DataError;
};

} // namespace mppn
