#pragma once

#include <stdexcept>
#include <string>

namespace trajmatch {

/// Base for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input data (malformed files, inconsistent rosters, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration or argument combination; the CLI maps this to exit 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during training (NaN loss, single-class data, ...).
class TrainingError : public Error {
public:
    using Error::Error;
};

}  // namespace trajmatch
