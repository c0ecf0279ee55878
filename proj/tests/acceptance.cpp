// Acceptance run: prints one [PASS]/[FAIL] line per criterion and exits
// non-zero if any criterion fails.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "canids/bench.hpp"
#include "canids/detector.hpp"
#include "canids/emulator.hpp"
#include "canids/scenarios.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace canids;
using namespace std::chrono_literals;

namespace {

// Pinned tolerances and settings.
constexpr double kRate = 1000.0;
constexpr std::size_t kWindow = 1000;
constexpr std::size_t kZeroLossWindows = 20;
constexpr double kInlineLossLow = 0.12;
constexpr double kInlineLossHigh = 0.16;
constexpr auto kInlineEvalPadding = 149ms;
constexpr std::size_t kInlineBuffer = 4;
constexpr std::size_t kInlineWindows = 20;
constexpr auto kSweepEvalTime = 50ms;
constexpr double kResponseLimitMs = 2500.0;
constexpr std::size_t kResponseWindows = 10;
constexpr double kMinRecall = 0.9;
constexpr double kMaxFpr = 0.05;
constexpr std::uint32_t kInjectionRate = 250;
constexpr std::size_t kCalibrationWindows = 30;
constexpr std::size_t kDetectionWindows = 50;
constexpr double kOracleTolerance = 1e-9;
constexpr double kIdentityTolerance = 1e-12;
constexpr int kMathTrials = 1000;
constexpr int kWireTrials = 10'000;

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
    Outcome o;
    try {
        o = check();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %s %s: %s\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

ScenarioOptions options(std::size_t buffer = kDefaultBufferCapacity) {
    ScenarioOptions o;
    o.buffer_capacity = buffer;
    o.worker_executable = CANIDS_TOOL_PATH;
    return o;
}

ReplayConfig realtime_replay(std::size_t windows) {
    ReplayConfig r;
    r.synthetic_frames = windows * kWindow;
    r.rate_msgs_per_sec = kRate;
    return r;
}

DetectorConfig detector() {
    DetectorConfig d;
    d.window_size = kWindow;
    return d;
}

std::optional<RunRecord> s3_record, s4_record;

// Cumulative hypervisor steal time in seconds, or -1 when unavailable.
double steal_seconds() {
    std::ifstream in("/proc/stat");
    std::string cpu;
    double field = 0;
    std::vector<double> fields;
    if (!(in >> cpu) || cpu != "cpu") return -1;
    for (int i = 0; i < 8 && in >> field; ++i) fields.push_back(field);
    if (fields.size() < 8) return -1;
    return fields[7] / static_cast<double>(::sysconf(_SC_CLK_TCK));
}

Outcome zero_loss() {
    const double steal_before = steal_seconds();
    s3_record = run_scenario({Architecture::TwoThreads}, realtime_replay(kZeroLossWindows), detector(), options());
    s4_record = run_scenario({Architecture::TwoProcesses}, realtime_replay(kZeroLossWindows), detector(), options());
    const double steal = steal_before < 0 ? -1 : steal_seconds() - steal_before;
    const bool pass = s3_record->loss_ratio() == 0.0 && s4_record->loss_ratio() == 0.0 &&
                      s3_record->windows.size() >= kZeroLossWindows && s4_record->windows.size() >= kZeroLossWindows;
    return {pass, fmt("S3 loss=%.6f dropped=%llu windows=%zu, S4 loss=%.6f dropped=%llu windows=%zu, "
                      "buffer=%zu, host steal during runs=%.2fs",
                      s3_record->loss_ratio(), static_cast<unsigned long long>(s3_record->dropped()),
                      s3_record->windows.size(), s4_record->loss_ratio(),
                      static_cast<unsigned long long>(s4_record->dropped()), s4_record->windows.size(),
                      kDefaultBufferCapacity, steal)};
}

Outcome inline_loss() {
    auto det = detector();
    det.eval_padding = kInlineEvalPadding;
    // frames published during each evaluation are lost, so send enough for kInlineWindows full windows
    auto replay = realtime_replay(kInlineWindows);
    replay.synthetic_frames = kInlineWindows * (kWindow + 150);
    const auto rec = run_scenario({Architecture::Inline}, replay, det, options(kInlineBuffer));
    const double loss = rec.loss_ratio();
    const double eval_s = std::chrono::duration<double>(kInlineEvalPadding).count();
    const double model = predicted_loss_ratio(1.0, eval_s);
    // the buffer holds kInlineBuffer of the frames sent during each evaluation
    const double lost = eval_s * kRate - static_cast<double>(kInlineBuffer);
    const double buffered_model = lost / (static_cast<double>(kWindow) + lost);
    return {loss >= kInlineLossLow && loss <= kInlineLossHigh,
            fmt("loss=%.4f band=[%.2f,%.2f] model=%.4f buffered_model=%.4f buffer=%zu eval_padding=149ms windows=%zu",
                loss, kInlineLossLow, kInlineLossHigh, model, buffered_model, kInlineBuffer, rec.windows.size())};
}

Outcome loss_monotonicity() {
    auto det = detector();
    det.eval_padding = kSweepEvalTime;
    ReplayConfig base;
    base.synthetic_frames = 10 * kWindow;
    base.clock = ClockKind::Simulated;
    base.allow_over_capacity = true;
    const std::vector<double> durations{0.5, 1.0, 2.0, 4.0};
    std::vector<double> rates;
    for (double d : durations) rates.push_back(static_cast<double>(kWindow) / d);
    const auto rows = sweep_loss_vs_rate({Architecture::Inline}, rates, base, det, options());

    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].ok()) return {false, "row failed: " + rows[i].error};
        detail += fmt("%s%.1fs:%.4f", i ? " " : "", durations[i], *rows[i].loss_ratio);
        if (i > 0 && *rows[i].loss_ratio > *rows[i - 1].loss_ratio) pass = false;
    }
    pass = pass && *rows.back().loss_ratio == 0.0;
    return {pass, "loss by batch duration " + detail};
}

Outcome response_time() {
    const auto s1 = run_scenario({Architecture::Inline}, realtime_replay(kResponseWindows), detector(), options());
    if (!s3_record || !s4_record) return {false, "zero-loss runs missing"};
    const auto m1 = summarize(s1);
    const auto m3 = summarize(*s3_record);
    const auto m4 = summarize(*s4_record);
    const bool response_ok =
        m1.response_ms_avg < kResponseLimitMs && m3.response_ms_avg < kResponseLimitMs && m4.response_ms_avg < kResponseLimitMs;
    const bool eval_ok = m3.eval_ms.max < m3.send_ms.min && m4.eval_ms.max < m4.send_ms.min;
    return {response_ok && eval_ok,
            fmt("response avg S1=%.1fms S3=%.1fms S4=%.1fms; eval max/send min S3=%.3f/%.1fms S4=%.3f/%.1fms",
                m1.response_ms_avg, m3.response_ms_avg, m4.response_ms_avg, m3.eval_ms.max, m3.send_ms.min,
                m4.eval_ms.max, m4.send_ms.min)};
}

Outcome detection_efficacy() {
    // Clean traffic for calibration followed by the detection stream.
    const std::size_t legit_needed = (kCalibrationWindows + kDetectionWindows) * kWindow;
    const auto schedule = synth_schedule(default_ecu_signals(), legit_needed);
    const std::span<const CanFrame> all(schedule);

    const auto calibration = make_windows(all.first(kCalibrationWindows * kWindow), kWindow);
    const auto cal = calibrate_threshold(calibration);

    const std::vector<std::size_t> attacked_windows{4, 9, 10, 17, 23, 24, 25, 31, 38, 46};
    std::vector<bool> attacked(kDetectionWindows, false);
    for (auto w : attacked_windows) attacked[w] = true;

    // Each attacked window holds 800 legitimate frames and 200 injected ones.
    const std::size_t legit_per_attacked = kWindow * 1000 / (1000 + kInjectionRate);
    std::vector<CanFrame> stream;
    std::vector<bool> truth(kDetectionWindows, false);
    std::size_t cursor = kCalibrationWindows * kWindow;
    for (std::size_t w = 0; w < kDetectionWindows; ++w) {
        if (!attacked[w]) {
            stream.insert(stream.end(), all.begin() + cursor, all.begin() + cursor + kWindow);
            cursor += kWindow;
            continue;
        }
        AttackSpec spec;
        spec.window_size = legit_per_attacked;
        spec.start_window = 0;
        spec.end_window = 1;
        spec.injection_rate = kInjectionRate;
        const auto spliced = splice_attack_marked(all.subspan(cursor, legit_per_attacked), spec);
        stream.insert(stream.end(), spliced.frames.begin(), spliced.frames.end());
        truth[w] = spliced.injected_count > 0;
        cursor += legit_per_attacked;
    }
    if (stream.size() != kDetectionWindows * kWindow) return {false, "fixture does not tile into windows"};

    auto det = detector();
    det.threshold = cal.threshold;
    det.reference = ReferencePolicy::LastNormal;
    ReplayConfig replay;
    replay.clock = ClockKind::Simulated;
    const auto rec = run_scenario({Architecture::TwoThreads}, stream, replay, det, options());
    if (rec.windows.size() != kDetectionWindows) return {false, "unexpected window count"};

    std::size_t tp = 0, positives = 0, fp = 0, negatives = 0;
    for (std::size_t w = 1; w < kDetectionWindows; ++w) {  // window 0 is warmup
        const bool flagged = rec.windows[w].verdict.label == Label::Anomalous;
        if (truth[w]) {
            ++positives;
            tp += flagged;
        } else {
            ++negatives;
            fp += flagged;
        }
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double fpr = static_cast<double>(fp) / static_cast<double>(negatives);
    return {recall >= kMinRecall && fpr <= kMaxFpr,
            fmt("tau=%.6f recall=%.3f (%zu/%zu) fpr=%.3f (%zu/%zu) reference=last-normal", cal.threshold, recall, tp,
                positives, fpr, fp, negatives)};
}

Outcome math_oracles() {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int i = 0; i < kMathTrials; ++i) {
        std::vector<Edge> ea, eb;
        const auto ids = 2 + rng() % 30;
        for (auto n = 1 + rng() % 60; n > 0; --n)
            ea.push_back({static_cast<NodeId>(rng() % ids), static_cast<NodeId>(rng() % ids), 1 + rng() % 1000});
        for (auto n = 1 + rng() % 60; n > 0; --n)
            eb.push_back({static_cast<NodeId>(rng() % ids), static_cast<NodeId>(rng() % ids), 1 + rng() % 1000});
        const auto a = MessagesSequenceGraph::from_edges(ea);
        const auto b = MessagesSequenceGraph::from_edges(eb);
        worst = std::max(worst, std::abs(cosine_similarity(a, b) - oracle::cosine(oracle::to_map(a), oracle::to_map(b))));
    }

    int bad_sums = 0;
    double worst_identity = 0.0;
    for (int i = 0; i < kMathTrials; ++i) {
        const std::size_t w = 2 + rng() % 2000;
        FrameBatch batch;
        for (std::size_t k = 0; k < w; ++k)
            batch.frames.push_back(CanFrame::make(static_cast<CanId>(rng() % 40), {}, k));
        const auto g = build_msg(batch);
        if (g.total_count() != w - 1) ++bad_sums;
        worst_identity = std::max(worst_identity, std::abs(cosine_similarity(g, g) - 1.0));
    }
    return {worst <= kOracleTolerance && bad_sums == 0 && worst_identity <= kIdentityTolerance,
            fmt("max |cos-oracle|=%.3g, edge-sum mismatches=%d, max |cos(g,g)-1|=%.3g over %d trials", worst,
                bad_sums, worst_identity, kMathTrials)};
}

Outcome transport_equivalence() {
    ReplayConfig replay;
    replay.synthetic_frames = 15 * kWindow;
    replay.clock = ClockKind::Simulated;
    AttackSpec attack;
    attack.start_window = 5;
    attack.end_window = 8;
    replay.attack = attack;
    auto det = detector();
    det.threshold = 0.98;
    const auto s3 = run_scenario({Architecture::TwoThreads}, replay, det, options());
    const auto s4 = run_scenario({Architecture::TwoProcesses}, replay, det, options());
    const auto v3 = s3.verdicts();
    const auto v4 = s4.verdicts();
    std::size_t anomalous = 0;
    for (const auto& v : v3) anomalous += v.label == Label::Anomalous;
    return {v3 == v4 && !v3.empty(),
            fmt("S3 verdicts=%zu S4 verdicts=%zu identical=%s anomalous=%zu", v3.size(), v4.size(),
                v3 == v4 ? "yes" : "no", anomalous)};
}

Outcome serialization() {
    std::mt19937_64 rng(8);
    int mismatches = 0, bad_sizes = 0;
    for (int i = 0; i < kWireTrials; ++i) {
        FrameBatch b;
        b.window_index = rng();
        for (auto n = rng() % 40; n > 0; --n) b.frames.push_back(fixtures::random_frame(rng));
        const auto bytes = serialize_batch(b);
        if (bytes.size() != 17 + 21 * b.frames.size()) ++bad_sizes;
        if (!(deserialize_batch(bytes) == b)) ++mismatches;
    }
    return {mismatches == 0 && bad_sizes == 0,
            fmt("%d batches, round-trip mismatches=%d, size mismatches=%d", kWireTrials, mismatches, bad_sizes)};
}

}  // namespace

int main() {
    report("AC1", "zero-loss S3/S4 real-time", zero_loss);
    report("AC2", "inline S1 loss band", inline_loss);
    report("AC3", "S1 loss non-increasing with slower sending", loss_monotonicity);
    report("AC4", "response time and eval < send", response_time);
    report("AC5", "detection efficacy", detection_efficacy);
    report("AC6", "math oracles", math_oracles);
    report("AC7", "S3/S4 transport equivalence", transport_equivalence);
    report("AC8", "CANB serialization", serialization);
    std::printf("%d of 8 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
