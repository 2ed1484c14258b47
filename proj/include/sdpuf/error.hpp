#pragma once

#include <stdexcept>
#include <string>

namespace sdpuf {

enum class ErrorCode {
    InvalidArgument,
    Malformed,
    NoConvergence,
    NoFlip,
    EmptySet,
    SizeMismatch,
    Unreachable,
    Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Exception carrying one of the documented failure categories.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the category prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

inline const char* to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Malformed: return "MALFORMED";
    case ErrorCode::NoConvergence: return "NO_CONVERGENCE";
    case ErrorCode::NoFlip: return "NO_FLIP";
    case ErrorCode::EmptySet: return "EMPTY_SET";
    case ErrorCode::SizeMismatch: return "SIZE_MISMATCH";
    case ErrorCode::Unreachable: return "UNREACHABLE";
    case ErrorCode::Io: return "IO_ERROR";
    }
    return "UNKNOWN";
}

} // namespace sdpuf
