// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace fcl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Odd or otherwise unsupported tensor dimensions.
class SizeError : public Error {
public:
    using Error::Error;
};

/// An argument is outside the documented domain of an operation.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the byte offset where decoding failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::uint64_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), detail_(what), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }
    const std::string& detail() const noexcept { return detail_; }

    /// Same error with file context prepended.
    FormatError in_file(const std::string& file) const { return FormatError(file + ": " + detail_, offset_); }

private:
    std::string detail_;
    std::uint64_t offset_;
};

class CostModelError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergedError : public Error {
public:
    explicit DivergedError(std::uint64_t iteration)
        : Error("training diverged: non-finite loss at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}
    DivergedError(std::uint64_t iteration, const std::string& what) : Error(what), iteration_(iteration) {}

    std::uint64_t iteration() const noexcept { return iteration_; }

private:
    std::uint64_t iteration_;
};

/// Network spec is inconsistent (channel arithmetic, class count, ...).
class SpecError : public Error {
public:
    using Error::Error;
};

class CheckpointError : public Error {
public:
    using Error::Error;
};

/// Raised by verification oracles when their own preconditions fail.
class OracleError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fcl
