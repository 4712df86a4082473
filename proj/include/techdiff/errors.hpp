#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace techdiff {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InputError : Error {
    using Error::Error;
};

// Malformed input file; the message names the file and line.
struct IngestError : InputError {
    using InputError::InputError;
};

struct DomainError : Error {
    using Error::Error;
};

struct ConnectivityError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct EstimationError : Error {
    using Error::Error;
};

struct GenerationError : Error {
    using Error::Error;
};

struct SizeError : Error {
    using Error::Error;
};

// Lanczos gave up before meeting the tolerance; the last Ritz value is kept.
struct ConvergenceError : Error {
    ConvergenceError(const std::string& what, double best, double resid)
        : Error(what), best_estimate(best), residual(resid) {}
    double best_estimate;
    double residual;
};

struct InferenceError : Error {
    InferenceError(const std::string& what, std::vector<std::string> log)
        : Error(what), failure_log(std::move(log)) {}
    std::vector<std::string> failure_log;
};

}  // namespace techdiff
