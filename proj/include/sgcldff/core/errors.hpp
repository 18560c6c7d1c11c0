#pragma once

#include <stdexcept>
#include <string>

namespace sgcldff {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

struct CheckpointError : std::runtime_error {
    explicit CheckpointError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct TrainError : std::runtime_error {
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace sgcldff
