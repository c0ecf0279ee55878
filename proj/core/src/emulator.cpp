#include "canids/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace canids {

using namespace std::chrono_literals;

std::vector<EcuSignal> default_ecu_signals() {
    return {
        {0x080, 10ms}, {0x0C1, 5ms},  {0x0D0, 20ms},  {0x110, 10ms}, {0x130, 20ms},
        {0x1A0, 50ms}, {0x201, 10ms}, {0x213, 20ms},  {0x230, 25ms}, {0x244, 20ms},
        {0x260, 40ms}, {0x2A0, 50ms}, {0x300, 100ms}, {0x320, 50ms}, {0x340, 100ms},
        {0x342, 40ms}, {0x344, 40ms}, {0x3B0, 100ms}, {0x420, 100ms}, {0x4F0, 100ms},
    };
}

std::vector<CanFrame> synth_schedule(std::span<const EcuSignal> signals, std::size_t total) {
    for (const auto& s : signals) {
        if (s.period.count() <= 0) throw Error(ErrorCode::InvalidArgument, "signal period must be positive");
        if (s.dlc > kMaxDlc) throw Error(ErrorCode::PayloadTooLong, "signal dlc > 8");
        if (s.can_id >= kStandardIdLimit) throw Error(ErrorCode::InvalidArgument, "signal id must be 11-bit");
    }
    std::vector<CanFrame> out;
    if (signals.empty() || total == 0) return out;
    out.reserve(total);

    struct Next {
        std::int64_t due;
        CanId id;
        std::size_t index;
        std::uint64_t seq;
    };
    auto later = [](const Next& a, const Next& b) { return a.due != b.due ? a.due > b.due : a.id > b.id; };
    std::priority_queue<Next, std::vector<Next>, decltype(later)> heap(later);
    for (std::size_t i = 0; i < signals.size(); ++i) heap.push({0, signals[i].can_id, i, 0});

    while (out.size() < total) {
        Next n = heap.top();
        heap.pop();
        const auto& sig = signals[n.index];
        CanFrame f;
        f.timestamp_ns = static_cast<std::uint64_t>(n.due);
        f.can_id = sig.can_id;
        f.dlc = sig.dlc;
        for (std::size_t b = 0; b < sig.dlc; ++b)
            f.data[b] = static_cast<std::uint8_t>((n.seq >> (8 * (b % 4))) + b);
        out.push_back(f);
        heap.push({n.due + sig.period.count(), n.id, n.index, n.seq + 1});
    }
    return out;
}

void AttackSpec::validate() const {
    if (injection_rate == 0) throw Error(ErrorCode::InvalidArgument, "injection rate must be positive");
    if (payload.size() > kMaxDlc) throw Error(ErrorCode::PayloadTooLong, "attack payload > 8 bytes");
    if (window_size == 0) throw Error(ErrorCode::InvalidArgument, "attack window size must be positive");
    if (start_window > end_window) throw Error(ErrorCode::WindowOutOfRange, "start_window > end_window");
    if (!(jitter >= 0.0 && jitter <= 1.0)) throw Error(ErrorCode::InvalidArgument, "jitter must be in [0,1]");
    if (attack_id >= (extended ? kExtendedIdLimit : kStandardIdLimit))
        throw Error(ErrorCode::InvalidArgument, "attack id out of range");
}

SpliceResult splice_attack_marked(std::span<const CanFrame> frames, const AttackSpec& spec) {
    spec.validate();
    const std::size_t w = spec.window_size;
    const std::size_t windows = (frames.size() + w - 1) / w;
    if (spec.end_window > windows)
        throw Error(ErrorCode::WindowOutOfRange, "attack ends at window " + std::to_string(spec.end_window) +
                                                     " but the source has " + std::to_string(windows));

    const CanFrame forged = CanFrame::make(spec.attack_id, spec.payload, 0, spec.extended);
    std::mt19937_64 rng(spec.seed);

    SpliceResult r;
    r.frames.reserve(frames.size() + frames.size() * spec.injection_rate / 1000 + 1);
    r.injected.reserve(r.frames.capacity());

    auto emit = [&](const CanFrame& f, bool fake) {
        r.frames.push_back(f);
        r.injected.push_back(fake);
        if (fake) ++r.injected_count;
    };

    for (std::size_t win = 0; win < windows; ++win) {
        const std::size_t begin = win * w;
        const std::size_t len = std::min(w, frames.size() - begin);
        const auto legit = frames.subspan(begin, len);
        if (win < spec.start_window || win >= spec.end_window) {
            for (const auto& f : legit) emit(f, false);
            continue;
        }

        const auto n = static_cast<std::size_t>(
            std::llround(static_cast<double>(len) * spec.injection_rate / 1000.0));
        // attack i goes after `slots[i]` legitimate frames of this window
        std::vector<std::size_t> slots(n);
        const double spacing = n ? static_cast<double>(len) / static_cast<double>(n) : 0.0;
        std::uniform_real_distribution<double> offset(-0.5, 0.5);
        for (std::size_t i = 0; i < n; ++i) {
            double pos = std::floor(static_cast<double>(i + 1) * spacing);
            if (spec.jitter > 0.0) pos = std::round(pos + offset(rng) * spec.jitter * spacing);
            slots[i] = static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(len)));
        }
        std::sort(slots.begin(), slots.end());

        std::size_t next_slot = 0;
        for (std::size_t k = 0; k <= len; ++k) {
            while (next_slot < n && slots[next_slot] == k) {
                CanFrame f = forged;
                f.timestamp_ns = k > 0 ? legit[k - 1].timestamp_ns : legit[0].timestamp_ns;
                emit(f, true);
                ++next_slot;
            }
            if (k < len) emit(legit[k], false);
        }
    }
    return r;
}

std::vector<CanFrame> splice_attack(std::span<const CanFrame> frames, const AttackSpec& spec) {
    return splice_attack_marked(frames, spec).frames;
}

void ReplayConfig::validate() const {
    if (!(rate_msgs_per_sec > 0.0) || !std::isfinite(rate_msgs_per_sec))
        throw Error(ErrorCode::InvalidArgument, "rate must be positive");
    if (rate_msgs_per_sec > kBusCapacityFramesPerSec && !allow_over_capacity)
        throw Error(ErrorCode::RateExceedsBusCapacity,
                    std::to_string(rate_msgs_per_sec) + " msg/s exceeds 1908 msg/s bus capacity");
    if (attack) attack->validate();
}

std::chrono::nanoseconds ReplayConfig::frame_period() const {
    return std::chrono::nanoseconds(std::llround(1e9 / rate_msgs_per_sec));
}

std::vector<CanFrame> load_frames(const ReplayConfig& cfg) {
    cfg.validate();
    std::vector<CanFrame> frames;
    if (cfg.log_path) {
        frames = read_log_file(*cfg.log_path);
    } else {
        const auto signals = default_ecu_signals();
        frames = synth_schedule(signals, cfg.synthetic_frames);
    }
    if (cfg.attack) frames = splice_attack(frames, *cfg.attack);
    if (cfg.frame_budget && frames.size() > *cfg.frame_budget) frames.resize(*cfg.frame_budget);
    return frames;
}

Replayer::Replayer(std::span<const CanFrame> frames, double rate_msgs_per_sec, std::int64_t start_ns)
    : frames_(frames), period_ns_(1e9 / rate_msgs_per_sec), start_ns_(start_ns) {
    if (!(rate_msgs_per_sec > 0.0)) throw Error(ErrorCode::InvalidArgument, "rate must be positive");
    publish_ns_.reserve(frames.size());
}

std::int64_t Replayer::due_ns(std::size_t k) const noexcept {
    return start_ns_ + std::llround(static_cast<double>(k) * period_ns_);
}

std::int64_t Replayer::next_due_ns() const noexcept { return due_ns(next_); }

std::int64_t Replayer::end_ns() const noexcept { return due_ns(frames_.size()); }

void Replayer::publish_next(VirtualBus& bus, std::int64_t now_ns) {
    CanFrame f = frames_[next_];
    f.timestamp_ns = static_cast<std::uint64_t>(now_ns);
    bus.publish(f);
    publish_ns_.push_back(now_ns);
    ++next_;
}

std::size_t Replayer::publish_due(VirtualBus& bus, std::int64_t until_ns) {
    std::size_t n = 0;
    while (!done() && next_due_ns() <= until_ns) {
        publish_next(bus, next_due_ns());
        ++n;
    }
    return n;
}

ReplayReport Replayer::report(std::int64_t finished_ns) const {
    ReplayReport r;
    r.sent_count = next_;
    r.started_ns = start_ns_;
    r.elapsed_ns = finished_ns - start_ns_;
    r.publish_ns = publish_ns_;
    return r;
}

ReplayReport replay(const ReplayConfig& cfg, std::span<const CanFrame> frames, VirtualBus& bus, Clock& clock) {
    cfg.validate();
    const std::int64_t start = clock.now_ns();
    Replayer replayer(frames, cfg.rate_msgs_per_sec, start);
    while (!replayer.done()) {
        clock.sleep_until_ns(replayer.next_due_ns());
        replayer.publish_next(bus, clock.now_ns());
    }
    if (frames.empty()) return replayer.report(start);
    clock.sleep_until_ns(replayer.end_ns());
    return replayer.report(clock.now_ns());
}

ReplayReport replay(const ReplayConfig& cfg, VirtualBus& bus) {
    const auto frames = load_frames(cfg);
    if (cfg.clock == ClockKind::Simulated) {
        SimulatedClock clock;
        return replay(cfg, frames, bus, clock);
    }
    SteadyClock clock;
    return replay(cfg, frames, bus, clock);
}

std::vector<std::int64_t> chunk_send_times(const ReplayReport& report, std::size_t w) {
    std::vector<std::int64_t> out;
    if (w == 0) return out;
    const auto& ts = report.publish_ns;
    const std::int64_t finished = report.started_ns + report.elapsed_ns;
    for (std::size_t k = 0; (k + 1) * w <= ts.size(); ++k) {
        const std::size_t next = (k + 1) * w;
        const std::int64_t end = next < ts.size() ? ts[next] : finished;
        out.push_back(end - ts[k * w]);
    }
    return out;
}

}  // namespace canids
