#pragma once

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>

namespace canids {

// MPSC hand-off queue between the bus monitor and the detection engine.
// With a capacity, a push onto a full queue evicts the oldest element
// (drop-oldest) and counts it; without one the queue is unbounded.
template <typename T>
class BoundedQueue {
public:
    explicit BoundedQueue(std::optional<std::size_t> capacity = std::nullopt) : capacity_(capacity) {}

    BoundedQueue(const BoundedQueue&) = delete;
    BoundedQueue& operator=(const BoundedQueue&) = delete;

    /// Returns false if the queue is closed (the item is discarded).
    bool push(T item) {
        {
            std::lock_guard lock(mutex_);
            if (closed_) return false;
            if (capacity_ && items_.size() >= *capacity_) {
                items_.pop_front();
                ++dropped_;
            }
            items_.push_back(std::move(item));
            high_water_ = std::max(high_water_, items_.size());
        }
        ready_.notify_one();
        return true;
    }

    /// Blocks until an item is available; nullopt once closed and drained.
    std::optional<T> pop() {
        std::unique_lock lock(mutex_);
        ready_.wait(lock, [&] { return !items_.empty() || closed_; });
        if (items_.empty()) return std::nullopt;
        T item = std::move(items_.front());
        items_.pop_front();
        return item;
    }

    void close() {
        {
            std::lock_guard lock(mutex_);
            closed_ = true;
        }
        ready_.notify_all();
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return items_.size();
    }
    std::uint64_t dropped() const {
        std::lock_guard lock(mutex_);
        return dropped_;
    }
    std::size_t high_water() const {
        std::lock_guard lock(mutex_);
        return high_water_;
    }
    std::optional<std::size_t> capacity() const noexcept { return capacity_; }

private:
    const std::optional<std::size_t> capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<T> items_;
    std::uint64_t dropped_ = 0;
    std::size_t high_water_ = 0;
    bool closed_ = false;
};

}  // namespace canids
