#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

namespace scanet {

// Bad shapes, ranges or flag values. Maps to std::invalid_argument so callers
// can catch either.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class IoError : public std::runtime_error {
public:
    IoError(const std::filesystem::path& path, const std::string& what)
        : std::runtime_error(what + ": " + path.string()), path_(path) {}
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

// Invalid or inconsistent run configuration (unknown keys, missing extractor,
// checkpoint/model mismatch).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised by the training loop when a loss component stops being finite.
class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(std::string component, const std::string& what)
        : std::runtime_error(what), component_(std::move(component)) {}
    const std::string& component() const noexcept { return component_; }

private:
    std::string component_;
};

}  // namespace scanet
