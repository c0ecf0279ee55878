#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canids/error.hpp"

namespace canids {

using CanId = std::uint32_t;

inline constexpr CanId kStandardIdLimit = 1u << 11;
inline constexpr CanId kExtendedIdLimit = 1u << 29;
inline constexpr std::uint8_t kMaxDlc = 8;

// One classic CAN frame. Bytes past `dlc` are kept zero so that frames
// compare equal iff their meaningful content is equal.
struct CanFrame {
    std::uint64_t timestamp_ns = 0;
    CanId can_id = 0;
    bool extended = false;
    std::uint8_t dlc = 0;
    std::array<std::uint8_t, 8> data{};

    /// Builds a canonical frame; throws Error on out-of-range id or payload.
    static CanFrame make(CanId id, std::span<const std::uint8_t> payload,
                         std::uint64_t timestamp_ns = 0, bool extended = false);

    std::span<const std::uint8_t> payload() const noexcept { return {data.data(), dlc}; }

    bool valid() const noexcept;

    friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

// A full detection window of `w` frames in collection order.
struct FrameBatch {
    std::vector<CanFrame> frames;
    std::uint64_t window_index = 0;
    std::uint64_t first_collect_ns = 0;
    std::uint64_t last_collect_ns = 0;

    std::size_t size() const noexcept { return frames.size(); }

    // Collection stamps are local to the process that collected the batch and
    // are not carried on the wire, so equality covers the wire content only.
    friend bool operator==(const FrameBatch& a, const FrameBatch& b) {
        return a.window_index == b.window_index && a.frames == b.frames;
    }
};

/// Thrown by read_log_file; carries the 1-based line number of the failure.
class LogLineError : public Error {
public:
    LogLineError(ErrorCode code, std::size_t line, const std::string& what)
        : Error(code, "line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// candump -L style: "(<secs>.<micros>) <iface> <IDHEX>#<DATAHEX>"
CanFrame parse_log_line(std::string_view line);
std::string format_log_line(const CanFrame& frame, std::string_view iface = "vcan0");

std::vector<CanFrame> read_log_file(const std::filesystem::path& path);
void write_log_file(const std::filesystem::path& path, std::span<const CanFrame> frames,
                    std::string_view iface = "vcan0");

// "CANB" wire format, little-endian:
//   magic "CANB" | version u8 | window_index u64 | count u32
//   count x { timestamp_ns u64 | can_id u32 (bit 31 = extended) | dlc u8 | data[8] }
inline constexpr std::size_t kBatchHeaderSize = 17;
inline constexpr std::size_t kWireFrameSize = 21;
inline constexpr std::uint8_t kBatchWireVersion = 1;

constexpr std::size_t serialized_size(std::size_t frame_count) noexcept {
    return kBatchHeaderSize + kWireFrameSize * frame_count;
}

std::vector<std::byte> serialize_batch(const FrameBatch& batch);
FrameBatch deserialize_batch(std::span<const std::byte> bytes);

/// Validates a header and returns the frame count it declares. Used to
/// delimit batches on a byte stream.
std::uint32_t read_batch_header(std::span<const std::byte> header);

}  // namespace canids
