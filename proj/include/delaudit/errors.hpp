#pragma once

#include <stdexcept>
#include <string>

namespace delaudit {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Scenario/config problems: CLI maps these to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// Script referenced a token or response that does not exist.
struct ScriptError : Error {
    using Error::Error;
};

struct SessionLimitExceeded : Error {
    using Error::Error;
};

struct UnknownParty : Error {
    using Error::Error;
};

struct UnknownProtocol : Error {
    using Error::Error;
};

struct UnknownProtocolIndex : Error {
    using Error::Error;
};

// Counter collector ran out of fresh lambda-bit identifiers.
struct DomainExhausted : Error {
    using Error::Error;
};

struct ForwarderFailure : Error {
    using Error::Error;
};

struct MalformedView : Error {
    using Error::Error;
};

// Replayed response differs from the recorded one. Diagnostic evidence that
// the collector is not deterministic after init or uses non-separable
// randomness; the weak auditor counts it as a mismatch.
struct ReplayDivergence : Error {
    using Error::Error;
};

struct ExtractorFailure : Error {
    using Error::Error;
};

struct BudgetExceeded : Error {
    using Error::Error;
};

// ADS-level invalid transition (duplicate insert under unique keys, corrupt rep).
struct InvalidOp : Error {
    using Error::Error;
};

}  // namespace delaudit
