#pragma once

#include <stdexcept>
#include <string>

namespace promptcare {

// Base class for all toolkit errors. Callers that want a single catch point
// can catch this; the CLI maps any uncaught Error to exit code 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (out-of-range value, missing file, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or incompatible serialized artifact (wrong magic, version, ...).
struct FormatError : Error {
    using Error::Error;
};

// An operation was applied to the wrong kind of prompt artifact
// (e.g. a token-level edit on a continuous prompt).
struct KindError : Error {
    using Error::Error;
};

}  // namespace promptcare
