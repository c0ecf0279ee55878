#include "canids/error.hpp"

namespace canids {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::MalformedLine: return "MalformedLine";
        case ErrorCode::BadIdWidth: return "BadIdWidth";
        case ErrorCode::PayloadTooLong: return "PayloadTooLong";
        case ErrorCode::IoError: return "IoError";
        case ErrorCode::BadMagic: return "BadMagic";
        case ErrorCode::BadVersion: return "BadVersion";
        case ErrorCode::TruncatedPayload: return "TruncatedPayload";
        case ErrorCode::BusClosed: return "BusClosed";
        case ErrorCode::BatchTooSmall: return "BatchTooSmall";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::RateExceedsBusCapacity: return "RateExceedsBusCapacity";
        case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
        case ErrorCode::SpawnFailure: return "SpawnFailure";
        case ErrorCode::ChannelBroken: return "ChannelBroken";
        case ErrorCode::QueueOverflow: return "QueueOverflow";
        case ErrorCode::EmptyRun: return "EmptyRun";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

}  // namespace canids
