#include "canids/virtual_bus.hpp"

namespace canids {

void BusSubscription::offer(const CanFrame& frame) {
    {
        std::lock_guard lock(mutex_);
        ++published_seen_;
        if (buffer_.size() >= capacity_) {
            ++dropped_;
            return;
        }
        buffer_.push_back(frame);
        ++received_;
    }
    ready_.notify_one();
}

void BusSubscription::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

std::optional<CanFrame> BusSubscription::next_frame(std::chrono::nanoseconds timeout) {
    std::unique_lock lock(mutex_);
    ready_.wait_for(lock, timeout, [&] { return !buffer_.empty() || closed_; });
    if (buffer_.empty()) {
        if (closed_) throw Error(ErrorCode::BusClosed, "bus closed");
        return std::nullopt;
    }
    CanFrame f = buffer_.front();
    buffer_.pop_front();
    return f;
}

std::optional<CanFrame> BusSubscription::try_next_frame() {
    std::lock_guard lock(mutex_);
    if (buffer_.empty()) {
        if (closed_) throw Error(ErrorCode::BusClosed, "bus closed");
        return std::nullopt;
    }
    CanFrame f = buffer_.front();
    buffer_.pop_front();
    return f;
}

SubscriptionStats BusSubscription::snapshot() const {
    std::lock_guard lock(mutex_);
    return {published_seen_, received_, dropped_, buffer_.size()};
}

SubscriptionStats BusSubscription::stats() const { return snapshot(); }

std::shared_ptr<BusSubscription> VirtualBus::subscribe(std::size_t buffer_capacity) {
    if (buffer_capacity == 0) throw Error(ErrorCode::InvalidArgument, "buffer capacity must be positive");
    std::lock_guard lock(mutex_);
    std::shared_ptr<BusSubscription> sub(new BusSubscription(buffer_capacity));
    if (closed_) sub->close();
    subscriptions_.push_back(sub);
    return sub;
}

void VirtualBus::publish(const CanFrame& frame) {
    std::lock_guard lock(mutex_);
    if (closed_) throw Error(ErrorCode::BusClosed, "publish on closed bus");
    ++published_;
    for (auto& sub : subscriptions_) sub->offer(frame);
}

void VirtualBus::close() {
    std::lock_guard lock(mutex_);
    closed_ = true;
    for (auto& sub : subscriptions_) sub->close();
}

bool VirtualBus::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

BusStats VirtualBus::stats() const {
    std::lock_guard lock(mutex_);
    BusStats s;
    s.published = published_;
    s.subscriptions.reserve(subscriptions_.size());
    for (const auto& sub : subscriptions_) s.subscriptions.push_back(sub->snapshot());
    return s;
}

}  // namespace canids
