#pragma once

#include <stdexcept>
#include <string>

namespace fusion {

// Base class for every error thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid static configuration (model shape, search space, run config).
struct ConfigError : Error {
    using Error::Error;
};

// Invalid runtime input (bad sequence length, out-of-range span, bad record).
struct InputError : Error {
    using Error::Error;
};

// Non-finite value produced during a forward pass.
struct NumericError : Error {
    using Error::Error;
};

// A grader reply that cannot be mapped onto the rubric.
struct ParseError : Error {
    std::string raw_reply;
    ParseError(const std::string& what, std::string reply)
        : Error(what), raw_reply(std::move(reply)) {}
};

// Remote grading failed after exhausting retries.
struct GradingError : Error {
    using Error::Error;
};

// Filesystem problems while reading datasets or writing artifacts.
struct IoError : Error {
    using Error::Error;
};

}  // namespace fusion
