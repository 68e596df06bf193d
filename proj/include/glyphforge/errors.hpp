#ifndef GLYPHFORGE_ERRORS_HPP
#define GLYPHFORGE_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace gf {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument values (shape mismatch, out-of-range scalar, empty list).
struct ArgumentError : Error {
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Input outside the configured domain (unknown char id, missing registry entry).
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Internal API contract violated (missing token type, frozen flag not set).
struct ContractError : Error {
    explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Configuration invalid or inconsistent with a loaded checkpoint.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File / serialization problems.
struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// A planner or remote model replied with something that does not parse or
// violates the protocol. Carries the raw response for diagnosis.
struct ProtocolError : Error {
    std::string raw_response;
    ProtocolError(const std::string& msg, std::string raw)
        : Error(msg + " | raw response: " + raw), raw_response(std::move(raw)) {}
};

// A remote client failed at the transport level. Carries retry metadata.
struct TransportError : Error {
    int attempts = 0;
    TransportError(const std::string& msg, int attempts_made)
        : Error(msg + " (after " + std::to_string(attempts_made) + " attempts)"),
          attempts(attempts_made) {}
};

}  // namespace gf

#endif
