#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canids {

enum class ErrorCode {
    // log / wire format
    MalformedLine,
    BadIdWidth,
    PayloadTooLong,
    IoError,
    BadMagic,
    BadVersion,
    TruncatedPayload,
    // bus
    BusClosed,
    // graph / detector
    BatchTooSmall,
    ZeroVector,
    InsufficientData,
    // emulator
    RateExceedsBusCapacity,
    WindowOutOfRange,
    // scenarios
    SpawnFailure,
    ChannelBroken,
    QueueOverflow,
    // bench
    EmptyRun,
    InvalidArgument,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; `code()` tells callers which
/// contract was violated.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace canids
