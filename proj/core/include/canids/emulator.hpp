#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "canids/can_frame.hpp"
#include "canids/clock.hpp"
#include "canids/virtual_bus.hpp"

namespace canids {

// 250 kbit/s J1939 bus with 8-byte frames: 250000 / (128 + 3).
inline constexpr double kBusCapacityFramesPerSec = 1908.0;
inline constexpr double kDefaultRate = 1000.0;

// One periodic ECU message.
struct EcuSignal {
    CanId can_id = 0;
    std::chrono::nanoseconds period{0};
    std::uint8_t dlc = 8;
};

/// The stock 20-id dictionary (periods 5..100 ms) used for synthetic traffic.
std::vector<EcuSignal> default_ecu_signals();

/// Merges the periodic emissions of all signals (first emission at t = 0) by
/// emission time, ties broken by ascending CAN id, and returns the first
/// `total` frames. Payload bytes carry a per-signal counter. Deterministic.
std::vector<CanFrame> synth_schedule(std::span<const EcuSignal> signals, std::size_t total);

struct AttackSpec {
    CanId attack_id = 0x244;
    bool extended = false;
    std::vector<std::uint8_t> payload{0x0F, 0xFF};
    std::uint64_t start_window = 0;
    std::uint64_t end_window = 0;  // exclusive
    std::uint32_t injection_rate = 250;  // fabricated frames per 1000 legitimate
    std::size_t window_size = 1000;      // legitimate frames per window
    // 0 = evenly spaced; up to 1 shifts each insertion by a seeded uniform
    // offset of at most half the spacing.
    double jitter = 0.0;
    std::uint64_t seed = 1;

    void validate() const;
};

struct SpliceResult {
    std::vector<CanFrame> frames;
    std::vector<bool> injected;  // parallel to frames
    std::size_t injected_count = 0;
};

/// Inserts fabricated frames into the legitimate windows
/// [start_window, end_window). Legitimate frames keep their relative order.
SpliceResult splice_attack_marked(std::span<const CanFrame> frames, const AttackSpec& spec);
std::vector<CanFrame> splice_attack(std::span<const CanFrame> frames, const AttackSpec& spec);

struct ReplayConfig {
    std::optional<std::filesystem::path> log_path;  // unset: synthetic schedule
    std::size_t synthetic_frames = 10'000;
    std::optional<std::size_t> frame_budget;  // truncates the source
    double rate_msgs_per_sec = kDefaultRate;
    ClockKind clock = ClockKind::RealTime;
    bool allow_over_capacity = false;
    std::optional<AttackSpec> attack;

    /// Throws InvalidArgument / RateExceedsBusCapacity.
    void validate() const;
    std::chrono::nanoseconds frame_period() const;
};

/// Reads or synthesizes the source, applies the attack splice and budget.
std::vector<CanFrame> load_frames(const ReplayConfig& cfg);

struct ReplayReport {
    std::uint64_t sent_count = 0;
    std::int64_t started_ns = 0;
    std::int64_t elapsed_ns = 0;
    std::vector<std::int64_t> publish_ns;  // one stamp per published frame

    double elapsed_seconds() const noexcept { return static_cast<double>(elapsed_ns) / 1e9; }
};

// Paces a frame list onto a bus: frame k is due at start + k / rate. Each
// published frame is restamped with its publish time.
class Replayer {
public:
    Replayer(std::span<const CanFrame> frames, double rate_msgs_per_sec, std::int64_t start_ns);

    bool done() const noexcept { return next_ >= frames_.size(); }
    std::size_t published() const noexcept { return next_; }
    std::int64_t next_due_ns() const noexcept;
    std::int64_t end_ns() const noexcept;  // slot end of the last frame

    /// Publishes the next frame stamped at `now_ns`.
    void publish_next(VirtualBus& bus, std::int64_t now_ns);
    /// Publishes every frame due at or before `until_ns`, each at its due time.
    std::size_t publish_due(VirtualBus& bus, std::int64_t until_ns);

    ReplayReport report(std::int64_t finished_ns) const;

private:
    std::int64_t due_ns(std::size_t k) const noexcept;

    std::span<const CanFrame> frames_;
    double period_ns_;
    std::int64_t start_ns_;
    std::size_t next_ = 0;
    std::vector<std::int64_t> publish_ns_;
};

/// Publishes all frames in order with pacing from `clock`. Elapsed time is
/// measured to the end of the last frame's slot (n / rate).
ReplayReport replay(const ReplayConfig& cfg, std::span<const CanFrame> frames, VirtualBus& bus, Clock& clock);

/// Loads the configured source and replays it with the configured clock kind.
ReplayReport replay(const ReplayConfig& cfg, VirtualBus& bus);

/// Durations to publish each consecutive group of `w` frames.
std::vector<std::int64_t> chunk_send_times(const ReplayReport& report, std::size_t w);

}  // namespace canids
