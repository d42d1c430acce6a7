#pragma once

#include <stdexcept>
#include <string>

namespace pkt {

// Exit codes used by the CLI. Exceptions below map onto them.
enum class ExitCode : int {
    ok = 0,
    config_error = 2,
    data_format_error = 3,
    numeric_error = 4,
    missing_artifact = 5,
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct FormatError : std::runtime_error {
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct MissingArtifact : std::runtime_error {
    explicit MissingArtifact(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace pkt
