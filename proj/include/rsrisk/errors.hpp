#pragma once

#include <stdexcept>
#include <string>

namespace rsrisk {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Distribution or model parameters outside their admissible domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Argument of an otherwise valid call outside its domain (e.g. MGF argument,
// lag < 1, mismatched lengths).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Characteristic-function argument outside the strip of regularity.
class StripError : public Error {
public:
    using Error::Error;
};

// Overflow/underflow of a special-function evaluation.
class RangeError : public Error {
public:
    using Error::Error;
};

// Filter or likelihood degeneracy (joint density underflow at some date).
class DegeneracyError : public Error {
public:
    using Error::Error;
};

// A numerical routine failed to reach its requested tolerance.
class NumericError : public Error {
public:
    using Error::Error;
};

// Invalid run/inversion/calibration configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace rsrisk
