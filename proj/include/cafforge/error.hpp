#pragma once

#include <stdexcept>
#include <string>

namespace cafforge {

/// Broad failure classes. The CLI maps these onto process exit codes.
enum class ErrorKind {
    precondition,  // caller violated a documented precondition
    config,        // bad configuration or usage
    data,          // input data failed validation
    parse,         // a model response could not be parsed
    gateway,       // chat transport failure
    forecaster,    // forecaster adapter failure
    io,            // filesystem failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Thrown by extract_windows when a series admits no window at all; lets
/// callers tell "too short" apart from an empty result.
class NoWindowsError : public Error {
public:
    explicit NoWindowsError(const std::string& what) : Error(ErrorKind::data, what) {}
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, const std::string& what) {
    if (!condition) {
        throw Error(ErrorKind::precondition, what);
    }
}

/// 0 success, 1 usage/config, 2 data validation, 3 gateway/forecaster failure.
inline int exit_code_for(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::config:
            return 1;
        case ErrorKind::precondition:
        case ErrorKind::data:
        case ErrorKind::parse:
        case ErrorKind::io:
            return 2;
        case ErrorKind::gateway:
        case ErrorKind::forecaster:
            return 3;
    }
    return 2;
}

}  // namespace cafforge
