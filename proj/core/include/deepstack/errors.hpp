#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace deepstack {

/// A caller broke a documented precondition (shape mismatch, bad range, ...).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// A file or byte stream could not be decoded. `offset()` is the byte offset
/// (binary formats) or 1-based line number (text formats) of the problem.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : std::runtime_error(what), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Model file written by an incompatible format version.
class VersionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent user configuration (schedules, configs, degenerate data).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Requested combination has no implementation (e.g. contractive penalty on a linear encoder).
class UnsupportedConfiguration : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A dataset is not present in the local cache.
class DataUnavailable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace deepstack
