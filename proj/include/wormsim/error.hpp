#pragma once

#include <stdexcept>
#include <string>

namespace wormsim {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad argument to a pure function (negative rate, unknown node, ...).
class InputError : public Error {
public:
    using Error::Error;
};

// A delay law violates a structural requirement (e.g. decreasing in load).
class ModelError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// Infinite delay: drop probability reached 1.
class SaturationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Reading or writing an artifact failed.
class IoError : public Error {
public:
    using Error::Error;
};

class AuditError : public Error {
public:
    using Error::Error;
};

}  // namespace wormsim
