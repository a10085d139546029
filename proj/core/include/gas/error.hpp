#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gas {

// Error taxonomy shared by every module. The CLI maps categories to exit
// codes; library code throws and never calls exit().
enum class ErrorCode {
    invalid_argument,    // precondition violated by the caller
    condition_not_found, // backend has no registered condition
    backend,             // transport or remote-model failure
    parse,               // unparseable client response or file
    malformed_plan,      // structurally inconsistent plan draft
    grounding_failure,   // a phrase produced no usable mask
    degenerate_plan,     // plan with empty masks / empty union
    diverged,            // optimization blew past the norm guard
    config,              // bad configuration value or unknown hook
};

inline const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::condition_not_found: return "condition_not_found";
        case ErrorCode::backend: return "backend";
        case ErrorCode::parse: return "parse";
        case ErrorCode::malformed_plan: return "malformed_plan";
        case ErrorCode::grounding_failure: return "grounding_failure";
        case ErrorCode::degenerate_plan: return "degenerate_plan";
        case ErrorCode::diverged: return "diverged";
        case ErrorCode::config: return "config";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

// Transport-level failure after the retry budget is exhausted.
class BackendError : public Error {
public:
    BackendError(const std::string& message, int attempts, bool retryable)
        : Error(ErrorCode::backend, message), attempts_(attempts), retryable_(retryable) {}

    int attempts() const { return attempts_; }
    bool retryable() const { return retryable_; }

private:
    int attempts_;
    bool retryable_;
};

// Carries the raw text that failed to parse so callers can log or replay it.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::string raw_text)
        : Error(ErrorCode::parse, message), raw_(std::move(raw_text)) {}

    const std::string& raw_text() const { return raw_; }

private:
    std::string raw_;
};

class DivergedError : public Error {
public:
    DivergedError(const std::string& message, int step)
        : Error(ErrorCode::diverged, message), step_(step) {}

    int step() const { return step_; }

private:
    int step_;
};

}  // namespace gas
