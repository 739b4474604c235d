#pragma once

#include <stdexcept>
#include <string>

namespace gk {

/// Bad command-line usage or malformed configuration. CLI exit code 1.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Missing, malformed, or inconsistent input data. CLI exit code 2.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// NaN/Inf or other numeric breakdown. CLI exit code 3.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gk
