#pragma once

#include <stdexcept>
#include <string>

namespace uvmsim {

// Bad user-facing configuration (unknown policy name, zero capacity, ...).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed trace file; message carries "path:line".
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Eviction requested but no unpinned resident page exists.
struct NoVictimError : std::runtime_error {
    explicit NoVictimError(const std::string& what) : std::runtime_error(what) {}
};

// Classification window shorter than the minimum (caller keeps previous label).
struct InsufficientWindowError : std::runtime_error {
    explicit InsufficientWindowError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or other unrecoverable training state.
struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace uvmsim
