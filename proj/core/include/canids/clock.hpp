#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>

namespace canids {

// Monotonic nanosecond clock. The steady implementation reads
// CLOCK_MONOTONIC, which is shared by every process on the host, so stamps
// taken in a child process are comparable with the parent's.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now_ns() const = 0;
    virtual void sleep_until_ns(std::int64_t deadline_ns) = 0;

    void sleep_for(std::chrono::nanoseconds d) { sleep_until_ns(now_ns() + d.count()); }
};

class SteadyClock final : public Clock {
public:
    std::int64_t now_ns() const override;
    void sleep_until_ns(std::int64_t deadline_ns) override;
};

// Virtual time: sleeping jumps the clock forward instantly.
class SimulatedClock final : public Clock {
public:
    explicit SimulatedClock(std::int64_t start_ns = 0) : now_(start_ns) {}

    std::int64_t now_ns() const override { return now_.load(std::memory_order_acquire); }
    void sleep_until_ns(std::int64_t deadline_ns) override;
    void advance(std::chrono::nanoseconds d) { now_.fetch_add(d.count(), std::memory_order_acq_rel); }

private:
    std::atomic<std::int64_t> now_;
};

enum class ClockKind { RealTime, Simulated };

std::int64_t monotonic_now_ns();

}  // namespace canids
