// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace depthdiff {

/// Bad config file or unknown/ill-typed key. CLI exit code 2.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Referenced file or directory missing or unreadable. CLI exit code 3.
struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure (solver divergence, NaN loss, ...). CLI exit code 4.
struct numeric_error : std::runtime_error {
    explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Contract violation on operation inputs (shape mismatch, bad range).
struct invalid_argument : std::invalid_argument {
    explicit invalid_argument(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace depthdiff
