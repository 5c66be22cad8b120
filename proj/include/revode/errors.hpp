#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace revode {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration, unknown names, malformed requests. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input data (CSV parse failures, unsorted times). CLI exit code 2.
struct DataError : Error {
    using Error::Error;
};

// Non-finite values fed into an evaluation. CLI exit code 1.
struct DomainError : Error {
    using Error::Error;
};

// A solver stage produced a non-finite value.
struct DivergenceError : Error {
    DivergenceError(const std::string& msg, std::size_t step, std::size_t stage, double t)
        : Error(msg), step_index(step), stage_index(stage), time(t) {}
    std::size_t step_index;
    std::size_t stage_index;
    double time;
};

// Adaptive controller drove the step size below h_min.
struct StiffnessError : Error {
    StiffnessError(const std::string& msg, double t, double h)
        : Error(msg), time(t), step(h) {}
    double time;
    double step;
};

// Tape or checkpoint budget exhausted.
struct ResourceError : Error {
    using Error::Error;
};

// Backward reconstruction produced non-finite state or failed verification.
struct ReversibilityError : Error {
    ReversibilityError(const std::string& msg, std::size_t step)
        : Error(msg), step_index(step) {}
    std::size_t step_index;
};

}  // namespace revode
