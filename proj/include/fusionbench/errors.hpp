#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fusionbench {

// Shape disagreement between tensor operands.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid scalar argument (zero dimension, non-positive sigma, ...).
struct ParameterError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent or invalid model/run configuration.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed file content; message carries the offending line number.
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Structurally valid file whose contents contradict its own manifest.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Checkpoint format version this build does not understand.
struct VersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
    DivergenceError(const std::string& msg, std::size_t epoch)
        : std::runtime_error(msg), epoch(epoch) {}
    std::size_t epoch;
};

}  // namespace fusionbench
