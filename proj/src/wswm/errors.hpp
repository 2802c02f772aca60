#pragma once

#include <stdexcept>
#include <string>

namespace wswm {

// Shape/length mismatches between tensors, frames or weight vectors.
class DimensionError : public std::runtime_error {
public:
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed binary containers: bad magic, truncation, version mismatch.
class FormatError : public std::runtime_error {
public:
    explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

class TruncationError : public FormatError {
public:
    explicit TruncationError(const std::string& msg) : FormatError(msg) {}
};

class VersionError : public FormatError {
public:
    explicit VersionError(const std::string& msg) : FormatError(msg) {}
};

class MissingSectionError : public FormatError {
public:
    explicit MissingSectionError(const std::string& msg) : FormatError(msg) {}
};

// Bad key=value files or invalid option combinations.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Violated runtime contracts that are not shape related (e.g. writing a
// transformer memory row twice, or rolling out with too few context frames).
class StateError : public std::runtime_error {
public:
    explicit StateError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wswm
