#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace nudgerl {

// Shortest round-trip decimal form of a double; used everywhere a file format
// must be byte-stable across runs on the same platform.
inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Error taxonomy shared across the library. The CLI maps these onto its
// exit-code contract (config -> 2, numeric -> 3).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DomainError : std::invalid_argument {
    explicit DomainError(const std::string& msg) : std::invalid_argument(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace nudgerl
