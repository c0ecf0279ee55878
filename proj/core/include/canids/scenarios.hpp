#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "canids/can_frame.hpp"
#include "canids/detector.hpp"
#include "canids/emulator.hpp"
#include "canids/virtual_bus.hpp"

namespace canids {

// How the bus monitor and the detection engine are placed.
//  Inline          one loop: collect w frames, then evaluate them in place.
//                  Frames arriving during evaluation pile up in the bus
//                  buffer and overflow.
//  WorkerPerBatch  the monitor never stops collecting; every full batch is
//                  handed to a fresh, detached child process together with
//                  the previous batch so the child can rebuild the reference.
//  TwoThreads      monitor thread -> bounded queue -> detector thread.
//  TwoProcesses    monitor process -> byte stream of "CANB" batches ->
//                  long-lived detector process -> JSON verdict lines back.
enum class Architecture { Inline = 1, WorkerPerBatch = 2, TwoThreads = 3, TwoProcesses = 4 };

std::string_view to_string(Architecture a) noexcept;
std::optional<Architecture> architecture_from_number(int n) noexcept;

inline constexpr std::size_t kDefaultQueueCapacity = 8;

struct ScenarioMode {
    Architecture architecture = Architecture::TwoThreads;
    // Batches waiting between monitor and detector (TwoThreads/TwoProcesses).
    // nullopt = unbounded. Overflow evicts the oldest waiting batch.
    std::optional<std::size_t> queue_capacity = kDefaultQueueCapacity;
};

struct ScenarioOptions {
    std::size_t buffer_capacity = kDefaultBufferCapacity;
    // Executable providing the `_worker` subcommand; empty = /proc/self/exe.
    std::filesystem::path worker_executable;
    // How long the end of a run waits for outstanding worker verdicts.
    std::chrono::milliseconds drain_timeout{15'000};
    std::chrono::milliseconds poll_interval{50};
};

struct WindowRecord {
    std::uint64_t window_index = 0;
    std::int64_t collect_start_ns = 0;
    std::int64_t collect_end_ns = 0;
    std::int64_t eval_end_ns = 0;
    Verdict verdict;
};

struct RunRecord {
    ScenarioMode mode;
    ReplayConfig replay_config;
    DetectorConfig detector_config;
    std::size_t buffer_capacity = kDefaultBufferCapacity;

    std::vector<WindowRecord> windows;  // sorted by window index
    BusStats bus;                       // subscription 0 is the monitor
    ReplayReport replay;
    std::vector<std::int64_t> send_times_ns;  // per w frames published

    std::uint64_t batches_collected = 0;
    std::uint64_t leftover_frames = 0;  // trailing partial batch
    std::uint64_t queue_dropped = 0;    // batches evicted from the queue
    std::uint64_t workers_spawned = 0;
    std::uint64_t workers_unreaped = 0;

    std::uint64_t published() const noexcept { return bus.published; }
    std::uint64_t dropped() const noexcept;
    double loss_ratio() const noexcept;
    bool any_anomalous() const noexcept;
    std::vector<Verdict> verdicts() const;
};

/// Runs the replay and the monitor/detector pipeline under `mode` until the
/// source is exhausted.
///
/// Real-time clock: the replay runs in its own thread paced by the steady
/// clock; all stamps are CLOCK_MONOTONIC nanoseconds.
///
/// Simulated clock: a deterministic discrete-event run in virtual time
/// starting at 0. Detection still goes through the real transport of each
/// mode (thread queue, pipes, child processes), but evaluation is charged
/// exactly `eval_padding` of virtual time and the queue is modelled in
/// virtual time, so loss and timing are reproducible.
RunRecord run_scenario(const ScenarioMode& mode, const ReplayConfig& replay, const DetectorConfig& detector,
                       const ScenarioOptions& options = {});

/// Same, with an explicit frame list instead of the configured source.
RunRecord run_scenario(const ScenarioMode& mode, std::span<const CanFrame> frames, const ReplayConfig& replay,
                       const DetectorConfig& detector, const ScenarioOptions& options = {});

/// Expected loss of the inline loop when nothing is buffered during
/// evaluation: eval / (send + eval).
double predicted_loss_ratio(double send_seconds, double eval_seconds);

/// Per-architecture steady-state prediction: inline as above; the queued
/// and per-batch-worker designs lose nothing while eval < send, and the
/// queued designs shed 1 - send/eval of the batches beyond that.
double predicted_loss_ratio(Architecture arch, double send_seconds, double eval_seconds);

}  // namespace canids
