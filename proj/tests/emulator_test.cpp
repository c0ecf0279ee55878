#include <gtest/gtest.h>

#include <set>

#include "canids/detector.hpp"
#include "canids/emulator.hpp"
#include "support/fixtures.hpp"

using namespace canids;
using namespace std::chrono_literals;

namespace {

std::vector<CanId> ids_of(std::span<const CanFrame> frames) {
    std::vector<CanId> ids;
    for (const auto& f : frames) ids.push_back(f.can_id);
    return ids;
}

}  // namespace

TEST(SynthSchedule, EqualPeriodsAlternateByAscendingId) {
    const std::vector<EcuSignal> sig{{0x200, 10ms}, {0x100, 10ms}};
    const auto ids = ids_of(synth_schedule(sig, 8));
    EXPECT_EQ(ids, (std::vector<CanId>{0x100, 0x200, 0x100, 0x200, 0x100, 0x200, 0x100, 0x200}));
}

TEST(SynthSchedule, HandMergedPattern) {
    const std::vector<EcuSignal> sig{{0xA, 1ms}, {0xB, 2ms}};
    // A at 0,1,2,3,...  B at 0,2,4,...
    EXPECT_EQ(ids_of(synth_schedule(sig, 6)), (std::vector<CanId>{0xA, 0xB, 0xA, 0xA, 0xB, 0xA}));
}

TEST(SynthSchedule, TimestampsFollowEmissionTimes) {
    const std::vector<EcuSignal> sig{{0xA, 1ms}, {0xB, 2ms}};
    const auto frames = synth_schedule(sig, 6);
    const std::vector<std::uint64_t> expected{0, 0, 1'000'000, 2'000'000, 2'000'000, 3'000'000};
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(frames[i].timestamp_ns, expected[i]);
}

TEST(SynthSchedule, Deterministic) {
    const auto a = synth_schedule(default_ecu_signals(), 5000);
    const auto b = synth_schedule(default_ecu_signals(), 5000);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 5000u);
}

TEST(SynthSchedule, DefaultDictionary) {
    const auto sig = default_ecu_signals();
    ASSERT_EQ(sig.size(), 20u);
    std::set<CanId> ids;
    for (const auto& s : sig) {
        ids.insert(s.can_id);
        EXPECT_GE(s.period, 5ms);
        EXPECT_LE(s.period, 100ms);
    }
    EXPECT_EQ(ids.size(), 20u);
    EXPECT_TRUE(ids.count(0x244));
    const auto frames = synth_schedule(sig, 1000);
    std::set<CanId> seen;
    for (const auto& f : frames) seen.insert(f.can_id);
    EXPECT_EQ(seen.size(), 20u);
}

TEST(SynthSchedule, RejectsBadSignals) {
    const std::vector<EcuSignal> zero{{0x1, 0ms}};
    EXPECT_THROW(synth_schedule(zero, 10), Error);
    EXPECT_TRUE(synth_schedule({}, 10).empty());
}

TEST(SpliceAttack, EmptyRangeIsIdentity) {
    const auto frames = synth_schedule(default_ecu_signals(), 3000);
    AttackSpec spec;
    spec.start_window = 1;
    spec.end_window = 1;
    EXPECT_EQ(splice_attack(frames, spec), frames);
}

TEST(SpliceAttack, EveryFifthFrameInOneWindow) {
    const auto frames = synth_schedule(default_ecu_signals(), 1000);
    AttackSpec spec;
    spec.start_window = 0;
    spec.end_window = 1;
    const auto out = splice_attack(frames, spec);
    ASSERT_EQ(out.size(), 1250u);

    std::vector<std::size_t> attack_positions;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const auto& f = out[i];
        if (f.can_id == 0x244 && f.dlc == 2 && f.data[0] == 0x0F && f.data[1] == 0xFF) attack_positions.push_back(i);
    }
    ASSERT_EQ(attack_positions.size(), 250u);
    for (std::size_t k = 0; k < attack_positions.size(); ++k) EXPECT_EQ(attack_positions[k], 5 * k + 4);

    std::vector<CanFrame> legit;
    for (std::size_t i = 0; i < out.size(); ++i)
        if (i % 5 != 4) legit.push_back(out[i]);
    EXPECT_EQ(legit, frames);
}

TEST(SpliceAttack, OnlyTouchesRequestedWindows) {
    const auto frames = synth_schedule(default_ecu_signals(), 5000);
    AttackSpec spec;
    spec.start_window = 2;
    spec.end_window = 4;
    spec.injection_rate = 100;
    const auto r = splice_attack_marked(frames, spec);
    EXPECT_EQ(r.injected_count, 200u);
    EXPECT_EQ(r.frames.size(), 5200u);
    std::size_t legit_seen = 0;
    for (std::size_t i = 0; i < r.frames.size(); ++i) {
        if (r.injected[i]) {
            EXPECT_GE(legit_seen, 2000u);
            EXPECT_LE(legit_seen, 4000u);
        } else {
            EXPECT_EQ(r.frames[i], frames[legit_seen]);
            ++legit_seen;
        }
    }
}

TEST(SpliceAttack, JitterIsSeededAndKeepsOrder) {
    const auto frames = synth_schedule(default_ecu_signals(), 3000);
    AttackSpec spec;
    spec.start_window = 0;
    spec.end_window = 3;
    spec.jitter = 1.0;
    spec.seed = 42;
    const auto a = splice_attack_marked(frames, spec);
    const auto b = splice_attack_marked(frames, spec);
    EXPECT_EQ(a.frames, b.frames);
    EXPECT_EQ(a.injected_count, 750u);
    spec.seed = 43;
    EXPECT_NE(splice_attack(frames, spec), a.frames);
    std::vector<CanFrame> legit;
    for (std::size_t i = 0; i < a.frames.size(); ++i)
        if (!a.injected[i]) legit.push_back(a.frames[i]);
    EXPECT_EQ(legit, frames);
}

TEST(SpliceAttack, Errors) {
    const auto frames = synth_schedule(default_ecu_signals(), 2000);
    AttackSpec spec;
    spec.start_window = 1;
    spec.end_window = 3;
    try {
        splice_attack(frames, spec);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::WindowOutOfRange);
    }
    spec.end_window = 2;
    spec.injection_rate = 0;
    EXPECT_THROW(splice_attack(frames, spec), Error);
}

TEST(SpliceAttack, LowersSimilarityOfAttackedWindow) {
    const auto frames = synth_schedule(default_ecu_signals(), 4000);
    AttackSpec spec;
    spec.start_window = 2;
    spec.end_window = 3;
    const auto clean = make_windows(frames, 1000);
    const auto spliced = splice_attack(frames, spec);
    FrameBatch attacked;
    attacked.frames.assign(spliced.begin() + 2000, spliced.begin() + 3250);

    const auto reference = build_msg(clean[1]);
    EXPECT_LT(cosine_similarity(reference, build_msg(attacked)), cosine_similarity(reference, build_msg(clean[2])));
}

TEST(Replay, SimulatedElapsedIsExact) {
    const auto frames = synth_schedule(default_ecu_signals(), 1000);
    ReplayConfig cfg;
    cfg.clock = ClockKind::Simulated;
    VirtualBus bus;
    SimulatedClock clock;
    const auto r = replay(cfg, frames, bus, clock);
    EXPECT_EQ(r.sent_count, 1000u);
    EXPECT_EQ(r.elapsed_ns, 1'000'000'000);
    EXPECT_EQ(bus.stats().published, 1000u);
    ASSERT_EQ(r.publish_ns.size(), 1000u);
    EXPECT_EQ(r.publish_ns[1] - r.publish_ns[0], 1'000'000);
}

TEST(Replay, RealTimeElapsedNearOneSecond) {
    const auto frames = synth_schedule(default_ecu_signals(), 1000);
    ReplayConfig cfg;
    VirtualBus bus;
    auto sub = bus.subscribe(2000);
    SteadyClock clock;
    const auto r = replay(cfg, frames, bus, clock);
    EXPECT_EQ(r.sent_count, 1000u);
    EXPECT_GE(r.elapsed_seconds(), 0.95);
    EXPECT_LE(r.elapsed_seconds(), 1.05);
    const auto chunks = chunk_send_times(r, 1000);
    ASSERT_EQ(chunks.size(), 1u);
    EXPECT_NEAR(static_cast<double>(chunks[0]), 1e9, 0.05e9);
    // frames are restamped with their publish time
    const auto first = sub->try_next_frame();
    EXPECT_EQ(static_cast<std::int64_t>(first->timestamp_ns), r.publish_ns[0]);
}

TEST(Replay, EmptySource) {
    ReplayConfig cfg;
    VirtualBus bus;
    SteadyClock clock;
    const auto r = replay(cfg, std::span<const CanFrame>{}, bus, clock);
    EXPECT_EQ(r.sent_count, 0u);
    EXPECT_EQ(r.elapsed_ns, 0);
}

TEST(Replay, RateAboveBusCapacity) {
    ReplayConfig cfg;
    cfg.rate_msgs_per_sec = 2000;
    try {
        cfg.validate();
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RateExceedsBusCapacity);
    }
    cfg.allow_over_capacity = true;
    EXPECT_NO_THROW(cfg.validate());
    cfg.rate_msgs_per_sec = 0;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(Replay, ReplayerPublishesDueFrames) {
    const auto frames = synth_schedule(default_ecu_signals(), 10);
    VirtualBus bus;
    auto sub = bus.subscribe(16);
    Replayer r(frames, 1000.0, 5'000);
    EXPECT_EQ(r.next_due_ns(), 5'000);
    EXPECT_EQ(r.publish_due(bus, 5'000 + 2'500'000), 3u);
    EXPECT_EQ(r.published(), 3u);
    EXPECT_EQ(sub->try_next_frame()->timestamp_ns, 5'000u);
    EXPECT_EQ(sub->try_next_frame()->timestamp_ns, 1'005'000u);
    EXPECT_EQ(r.end_ns(), 5'000 + 10'000'000);
    r.publish_due(bus, r.end_ns());
    EXPECT_TRUE(r.done());
}

TEST(LoadFrames, LogWithBudgetAndAttack) {
    fixtures::TempDir dir;
    const auto frames = synth_schedule(default_ecu_signals(), 3000);
    write_log_file(dir / "s.log", frames);

    ReplayConfig cfg;
    cfg.log_path = dir / "s.log";
    EXPECT_EQ(load_frames(cfg), frames);

    AttackSpec spec;
    spec.start_window = 1;
    spec.end_window = 2;
    cfg.attack = spec;
    EXPECT_EQ(load_frames(cfg).size(), 3250u);

    cfg.frame_budget = 1100;
    EXPECT_EQ(load_frames(cfg).size(), 1100u);
}

TEST(LoadFrames, SyntheticCount) {
    ReplayConfig cfg;
    cfg.synthetic_frames = 1234;
    EXPECT_EQ(load_frames(cfg).size(), 1234u);
}

TEST(ChunkSendTimes, GroupsOfW) {
    ReplayReport r;
    for (int i = 0; i < 25; ++i) r.publish_ns.push_back(i * 10);
    r.started_ns = 0;
    r.elapsed_ns = 250;
    r.sent_count = 25;
    const auto chunks = chunk_send_times(r, 10);
    ASSERT_EQ(chunks.size(), 2u);
    EXPECT_EQ(chunks[0], 100);
    EXPECT_EQ(chunks[1], 100);
}
