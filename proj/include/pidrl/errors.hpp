#pragma once

#include <stdexcept>

namespace pidrl {

/// Invalid user input (flags or config file); maps to CLI exit code 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Filesystem failure (open/read/write); maps to CLI exit code 3.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace pidrl
