#pragma once

#include <stdexcept>
#include <string>

namespace coa {

/// Base class for every error this library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated an operation precondition (empty input, bad range, ...).
class InvalidInputError : public Error {
public:
    using Error::Error;
};

/// The action catalog handed to the prompt builder is missing an action or
/// lists one twice.
class InvalidCatalogError : public Error {
public:
    using Error::Error;
};

/// Chain markup could not be parsed. Carries the raw model output so the
/// caller can log or retry.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(message) {}
    ParseError(const std::string& message, std::string raw_output)
        : Error(message), raw_output_(std::move(raw_output)) {}

    const std::string& raw_output() const { return raw_output_; }

private:
    std::string raw_output_;
};

/// A final-answer prompt was requested for a chain with unresolved nodes.
class ChainNotProcessedError : public Error {
public:
    using Error::Error;
};

/// The verification candidate tokenizes to nothing; faith scores are
/// undefined on empty candidates.
class EmptyCandidateError : public Error {
public:
    using Error::Error;
};

/// MRFS was requested against an empty reference list.
class NoReferencesError : public Error {
public:
    using Error::Error;
};

/// Top-k query against a store with no chunks.
class EmptyStoreError : public Error {
public:
    using Error::Error;
};

/// Filesystem-level failure while reading or writing an artifact.
class IoError : public Error {
public:
    using Error::Error;
};

/// A persisted store file failed to parse. Carries the 1-based line number.
class CorruptStoreError : public Error {
public:
    CorruptStoreError(const std::string& message, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// An action could not retrieve anything (search client down, store missing,
/// data source unreadable). The executor degrades instead of failing.
class RetrievalFailedError : public Error {
public:
    using Error::Error;
};

/// Transport-level backend failure that persisted through the retry budget.
class BackendUnavailableError : public Error {
public:
    using Error::Error;
};

/// The provider answered with a non-2xx status and an error body.
class BackendRejectedError : public Error {
public:
    BackendRejectedError(int status, const std::string& message)
        : Error("backend rejected request (status " + std::to_string(status) + "): " + message),
          status_(status) {}

    int status() const { return status_; }

private:
    int status_;
};

/// A question could not be answered: the model produced unparseable chain
/// markup twice in a row. Carries the last raw output.
class QuestionFailedError : public Error {
public:
    QuestionFailedError(const std::string& message, std::string raw_output)
        : Error(message), raw_output_(std::move(raw_output)) {}

    const std::string& raw_output() const { return raw_output_; }

private:
    std::string raw_output_;
};

/// Engine configuration file is missing, malformed, or out of range.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A dataset file failed to load. Carries the 1-based line number when the
/// failure is tied to one line.
class DatasetLoadError : public Error {
public:
    explicit DatasetLoadError(const std::string& message) : Error(message), line_(0) {}
    DatasetLoadError(const std::string& message, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// An operation was invoked with a configuration that violates its stated
/// precondition (e.g. mislead-rate with verification disabled).
class PreconditionError : public Error {
public:
    using Error::Error;
};

}  // namespace coa
