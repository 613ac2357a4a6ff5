#pragma once

#include <stdexcept>
#include <string>

namespace fewshot {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed call: shape mismatch, out-of-range label, even k, ...
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Not enough samples to satisfy a request.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Dataset directory does not have the expected layout.
class StructuralError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SamplingError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace fewshot
