#pragma once

#include <stdexcept>
#include <string>

namespace arqa {

// Base class for every error raised by this library.  Callers that want a
// single catch-all can catch Error; the subclasses exist so that tests and
// the CLI can map failures to distinct exit codes.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or inconsistent configuration (bad threshold, unknown mode,
// missing template placeholder, ...).  Nothing was executed.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

// A chat backend could not produce a response: transport failure after all
// retries, non-2xx status, or unparseable payload.
class ProviderError : public Error {
public:
    explicit ProviderError(const std::string& what) : Error(what) {}
};

// A scripted backend was asked for a request it has no entry for.  In a
// closed-world run this is always a bug in the script or the caller, so it
// gets its own type rather than folding into ProviderError.
class ScriptMiss : public ProviderError {
public:
    explicit ScriptMiss(const std::string& what) : ProviderError(what) {}
};

// A synthetic world declared itself closed but the pipeline escaped the
// script.  Raised by simlab verification, not by normal execution.
class ClosureViolation : public Error {
public:
    explicit ClosureViolation(const std::string& what) : Error(what) {}
};

// Question diversification produced too few usable variants even after a
// retry (< ceil(k/2)).
class DiversificationFailure : public Error {
public:
    explicit DiversificationFailure(const std::string& what) : Error(what) {}
};

// Two lists that must be index-aligned had different lengths.
class LengthMismatch : public Error {
public:
    explicit LengthMismatch(const std::string& what) : Error(what) {}
};

// The retrieval layer could not reach its source at all (as opposed to a
// successful search that found nothing).
class RetrieverUnavailable : public Error {
public:
    explicit RetrieverUnavailable(const std::string& what) : Error(what) {}
};

}  // namespace arqa
