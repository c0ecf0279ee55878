#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include "canids/can_frame.hpp"

namespace canids {

inline constexpr std::size_t kDefaultBufferCapacity = 16;

struct SubscriptionStats {
    std::uint64_t published_since_subscribe = 0;
    std::uint64_t received = 0;  // accepted into the receive buffer
    std::uint64_t dropped = 0;   // arrived while the buffer was full
    std::size_t buffered = 0;
};

struct BusStats {
    std::uint64_t published = 0;
    std::vector<SubscriptionStats> subscriptions;
};

class VirtualBus;

// Bounded receive FIFO of one listener. Drop-newest on overflow, like a
// controller RX FIFO overrun. Single consumer.
class BusSubscription {
public:
    BusSubscription(const BusSubscription&) = delete;
    BusSubscription& operator=(const BusSubscription&) = delete;

    /// Oldest buffered frame, or nullopt once `timeout` elapses with nothing
    /// buffered. Throws BusClosed when the bus is closed and the buffer is empty.
    std::optional<CanFrame> next_frame(std::chrono::nanoseconds timeout);

    /// Non-blocking variant; same BusClosed contract.
    std::optional<CanFrame> try_next_frame();

    std::size_t capacity() const noexcept { return capacity_; }
    SubscriptionStats stats() const;

private:
    friend class VirtualBus;
    explicit BusSubscription(std::size_t capacity) : capacity_(capacity) {}

    // called with the bus lock held
    void offer(const CanFrame& frame);
    void close();
    SubscriptionStats snapshot() const;

    const std::size_t capacity_;

    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<CanFrame> buffer_;
    std::uint64_t received_ = 0;
    std::uint64_t dropped_ = 0;
    std::uint64_t published_seen_ = 0;
    bool closed_ = false;
};

// Single-segment broadcast bus. Every published frame is offered to every
// subscription exactly once.
class VirtualBus {
public:
    VirtualBus() = default;
    VirtualBus(const VirtualBus&) = delete;
    VirtualBus& operator=(const VirtualBus&) = delete;

    std::shared_ptr<BusSubscription> subscribe(std::size_t buffer_capacity = kDefaultBufferCapacity);

    void publish(const CanFrame& frame);

    /// Wakes all readers; they drain what is buffered and then see BusClosed.
    void close();
    bool closed() const;

    BusStats stats() const;

private:
    mutable std::mutex mutex_;
    std::vector<std::shared_ptr<BusSubscription>> subscriptions_;
    std::uint64_t published_ = 0;
    bool closed_ = false;
};

}  // namespace canids
