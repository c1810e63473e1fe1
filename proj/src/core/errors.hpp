#pragma once

#include <stdexcept>
#include <string>

namespace idminer {

// Error taxonomy shared by the whole library. Each kind maps 1:1 onto a
// status code of the C API, so new kinds must be added in both places.
enum class ErrorKind {
    Shape,       // dimension mismatch between arrays
    Domain,      // value outside the mathematical domain (zero vector, tau <= 0, bad level)
    Format,      // malformed external data (CSV cell, JSON layout)
    Config,      // invalid or missing configuration entry
    Usage,       // API called outside its contract (empty sequence, missing cache)
    Capacity,    // dataset too small for the requested batch shape
    Protocol,    // manifest lacks a provenance set required by the protocol
    Integrity,   // corrupted or inconsistent stored state (duplicate ids, bad checkpoint)
    Numeric,     // non-finite value where finiteness is an invariant
    Io,          // filesystem failure
    Capability,  // operation unsupported by the selected detector
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace idminer
