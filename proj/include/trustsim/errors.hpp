#pragma once

#include <stdexcept>
#include <string>

namespace trustsim {

// Base for every error raised by the library. Callers that do not care about
// the specific failure can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OutOfRangeError : public Error {
public:
    using Error::Error;
};

// delivery_rate() with zero packets sent.
class NoTrafficError : public Error {
public:
    using Error::Error;
};

// delivered > sent; indicates broken packet accounting upstream.
class InvalidCountError : public Error {
public:
    using Error::Error;
};

class InvalidParamsError : public Error {
public:
    using Error::Error;
};

// A requirement check was handed inputs that violate its preconditions.
class InvalidTrialError : public Error {
public:
    using Error::Error;
};

class CorruptCounterexampleError : public Error {
public:
    using Error::Error;
};

class TopologyError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

} // namespace trustsim
