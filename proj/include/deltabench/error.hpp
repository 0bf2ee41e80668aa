#pragma once

#include <stdexcept>
#include <string>

namespace deltabench {

/// Base class for every error raised by the library. `exit_code()` is the
/// process status the CLI reports for it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 2; }
};

class ParameterError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class FitError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class StateError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class EvaluationError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

} // namespace deltabench
