#include "canids/clock.hpp"

#include <thread>

namespace canids {

std::int64_t monotonic_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::int64_t SteadyClock::now_ns() const { return monotonic_now_ns(); }

void SteadyClock::sleep_until_ns(std::int64_t deadline_ns) {
    std::this_thread::sleep_until(std::chrono::steady_clock::time_point(std::chrono::nanoseconds(deadline_ns)));
}

void SimulatedClock::sleep_until_ns(std::int64_t deadline_ns) {
    auto current = now_.load(std::memory_order_acquire);
    while (current < deadline_ns &&
           !now_.compare_exchange_weak(current, deadline_ns, std::memory_order_acq_rel)) {
    }
}

}  // namespace canids
