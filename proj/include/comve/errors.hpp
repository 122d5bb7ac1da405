#pragma once

#include <stdexcept>
#include <string>

namespace comve {

// Base of every error the library throws. The CLI maps subclasses onto
// exit codes (see cli.hpp).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit an operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// NaN/Inf where finite values are required.
class NumericError : public Error {
public:
    using Error::Error;
};

// Caller broke an API precondition (e.g. backward on a non-scalar).
class ContractError : public Error {
public:
    using Error::Error;
};

// Bad user-supplied values: empty corpus, out-of-range label, too-long sequence.
class InputError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Malformed data files (CSV, vocab, checkpoint).
class FormatError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

} // namespace comve
