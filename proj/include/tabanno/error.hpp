#pragma once

#include <stdexcept>
#include <string>

namespace tabanno {

// Invalid configuration or arguments (CLI maps these to exit code 3).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent input data.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure during model execution (non-finite values, divergence).
struct ComputeError : std::runtime_error {
    explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tabanno
