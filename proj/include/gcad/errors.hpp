#pragma once

#include <stdexcept>
#include <string>

namespace gcad {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an operation's preconditions.
struct ShapeError : Error {
    using Error::Error;
};

// An API was called outside its contract (e.g. backward from a non-scalar).
struct ContractError : Error {
    using Error::Error;
};

// Invalid configuration value.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or unusable input data (files, cells, NaN rows).
struct DataError : Error {
    using Error::Error;
};

// Non-finite values appeared where finite math was required.
struct NumericError : Error {
    using Error::Error;
};

// Optimization failed (e.g. loss diverged); message names the epoch.
struct TrainingError : Error {
    using Error::Error;
};

// Bernoulli window sampling produced no windows after retries.
struct SamplingError : Error {
    using Error::Error;
};

// Metric cannot be computed (e.g. single-class labels).
struct EvalError : Error {
    using Error::Error;
};

}  // namespace gcad
