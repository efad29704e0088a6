#pragma once

#include <stdexcept>
#include <string>

namespace mcpaudit {

// Base for every error the pipeline raises on bad input.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed syntax (JSON Lines, JSON documents).
class ParseError : public Error {
public:
    using Error::Error;
};

// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

class DuplicateError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class AcquisitionError : public Error {
public:
    AcquisitionError(std::string source, const std::string& detail)
        : Error("cannot acquire '" + source + "': " + detail), source_(std::move(source)) {}

    const std::string& source() const noexcept { return source_; }

private:
    std::string source_;
};

class VersionError : public Error {
public:
    using Error::Error;
};

// Internal inconsistency between pipeline stages (a bug, not bad input).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

} // namespace mcpaudit
