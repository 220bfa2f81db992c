#pragma once

#include <stdexcept>
#include <string>

namespace obcl {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeMismatch : Error {
    using Error::Error;
};

struct DegenerateVector : Error {
    using Error::Error;
};

struct ManifoldViolation : Error {
    explicit ManifoldViolation(const std::string& msg, double max_deviation)
        : Error(msg), max_deviation(max_deviation) {}
    double max_deviation;
};

struct BatchTooSmall : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace obcl
