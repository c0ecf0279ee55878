#include "canids/detector.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace canids {

std::string_view to_string(Label label) noexcept {
    switch (label) {
        case Label::Normal: return "Normal";
        case Label::Anomalous: return "Anomalous";
        case Label::Warmup: return "Warmup";
    }
    return "Warmup";
}

std::optional<Label> parse_label(std::string_view s) noexcept {
    if (s == "Normal") return Label::Normal;
    if (s == "Anomalous") return Label::Anomalous;
    if (s == "Warmup") return Label::Warmup;
    return std::nullopt;
}

std::string_view to_string(WarmupPolicy p) noexcept {
    return p == WarmupPolicy::ReportNormal ? "report-normal" : "report-unknown";
}

std::optional<WarmupPolicy> parse_warmup_policy(std::string_view s) noexcept {
    if (s == "report-normal") return WarmupPolicy::ReportNormal;
    if (s == "report-unknown") return WarmupPolicy::ReportUnknown;
    return std::nullopt;
}

std::string_view to_string(ReferencePolicy p) noexcept {
    return p == ReferencePolicy::PreviousWindow ? "previous" : "last-normal";
}

std::optional<ReferencePolicy> parse_reference_policy(std::string_view s) noexcept {
    if (s == "previous") return ReferencePolicy::PreviousWindow;
    if (s == "last-normal") return ReferencePolicy::LastNormal;
    return std::nullopt;
}

void DetectorConfig::validate() const {
    if (window_size < 2) throw Error(ErrorCode::InvalidArgument, "window size must be >= 2");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw Error(ErrorCode::InvalidArgument, "threshold must be in [0,1]");
    if (eval_padding.count() < 0) throw Error(ErrorCode::InvalidArgument, "eval padding must be >= 0");
}

std::string to_json_line(const Verdict& v) {
    nlohmann::ordered_json j;
    j["t"] = v.window_index;
    if (v.similarity)
        j["sim"] = *v.similarity;
    else
        j["sim"] = nullptr;
    j["label"] = std::string(to_string(v.label));
    j["eval_ms"] = v.eval_ms();
    j["eval_start_ns"] = v.eval_started_ns;
    j["eval_end_ns"] = v.eval_finished_ns;
    return j.dump();
}

Verdict parse_verdict_line(std::string_view line) {
    try {
        const auto j = nlohmann::json::parse(line);
        Verdict v;
        v.window_index = j.at("t").get<std::uint64_t>();
        if (!j.at("sim").is_null()) v.similarity = j.at("sim").get<double>();
        auto label = parse_label(j.at("label").get<std::string>());
        if (!label) throw Error(ErrorCode::MalformedLine, "unknown label");
        v.label = *label;
        v.eval_started_ns = j.value("eval_start_ns", std::int64_t{0});
        v.eval_finished_ns = j.value("eval_end_ns", std::int64_t{0});
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedLine, std::string("verdict line: ") + e.what());
    }
}

WindowEvaluation evaluate_window(const DetectorState& state, const FrameBatch& batch, const DetectorConfig& cfg,
                                 Clock& clock) {
    if (batch.frames.size() != cfg.window_size && batch.frames.size() >= 2)
        throw Error(ErrorCode::InvalidArgument, "batch has " + std::to_string(batch.frames.size()) +
                                                    " frames, window size is " + std::to_string(cfg.window_size));

    WindowEvaluation out;
    Verdict& v = out.verdict;
    v.window_index = batch.window_index;
    v.eval_started_ns = clock.now_ns();

    const std::optional<NodeId> carry = cfg.carry_boundary_edge ? state.last_node : std::nullopt;
    auto graph = build_msg(batch, carry);

    bool becomes_reference = true;
    if (!state.reference) {
        v.label = cfg.warmup == WarmupPolicy::ReportUnknown ? Label::Warmup : Label::Normal;
    } else {
        const double sim = cosine_similarity(*state.reference, graph);
        v.similarity = sim;
        v.label = sim < cfg.threshold ? Label::Anomalous : Label::Normal;
        if (v.label == Label::Anomalous && cfg.reference == ReferencePolicy::LastNormal) becomes_reference = false;
    }

    out.state.reference = becomes_reference ? std::optional(std::move(graph)) : state.reference;
    out.state.last_node = node_of(batch.frames.back());

    if (cfg.eval_padding.count() > 0) clock.sleep_for(cfg.eval_padding);
    v.eval_finished_ns = clock.now_ns();
    return out;
}

Detector::Detector(DetectorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

Verdict Detector::evaluate(const FrameBatch& batch) { return evaluate(batch, clock_); }

Verdict Detector::evaluate(const FrameBatch& batch, Clock& clock) {
    auto result = evaluate_window(state_, batch, cfg_, clock);
    state_ = std::move(result.state);
    return result.verdict;
}

std::vector<double> similarity_series(std::span<const FrameBatch> windows, bool carry_boundary_edge) {
    std::vector<double> series;
    if (windows.empty()) return series;
    series.reserve(windows.size() - 1);
    auto previous = build_msg(windows[0]);
    for (std::size_t i = 1; i < windows.size(); ++i) {
        std::optional<NodeId> carry;
        if (carry_boundary_edge) carry = node_of(windows[i - 1].frames.back());
        auto current = build_msg(windows[i], carry);
        series.push_back(cosine_similarity(previous, current));
        previous = std::move(current);
    }
    return series;
}

double nearest_rank_percentile(std::span<const double> values, double p) {
    if (values.empty()) throw Error(ErrorCode::InsufficientData, "percentile of empty series");
    if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorCode::InvalidArgument, "percentile must be in [0,100]");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

double threshold_from_series(std::span<const double> series, double percentile, double margin) {
    if (series.size() < 2)
        throw Error(ErrorCode::InsufficientData, "need >= 2 similarity values, got " + std::to_string(series.size()));
    return std::clamp(nearest_rank_percentile(series, percentile) - margin, 0.0, 1.0);
}

CalibrationResult calibrate_threshold(std::span<const FrameBatch> normal_windows, double percentile, double margin,
                                      bool carry_boundary_edge) {
    if (normal_windows.size() < 3)
        throw Error(ErrorCode::InsufficientData,
                    "need >= 3 windows, got " + std::to_string(normal_windows.size()));
    CalibrationResult r;
    r.series = similarity_series(normal_windows, carry_boundary_edge);
    r.percentile_value = nearest_rank_percentile(r.series, percentile);
    r.threshold = threshold_from_series(r.series, percentile, margin);
    return r;
}

std::vector<FrameBatch> make_windows(std::span<const CanFrame> frames, std::size_t w) {
    if (w == 0) throw Error(ErrorCode::InvalidArgument, "window size must be positive");
    std::vector<FrameBatch> windows;
    windows.reserve(frames.size() / w);
    for (std::size_t start = 0; start + w <= frames.size(); start += w) {
        FrameBatch b;
        b.window_index = windows.size();
        b.frames.assign(frames.begin() + static_cast<std::ptrdiff_t>(start),
                        frames.begin() + static_cast<std::ptrdiff_t>(start + w));
        b.first_collect_ns = b.frames.front().timestamp_ns;
        b.last_collect_ns = b.frames.back().timestamp_ns;
        windows.push_back(std::move(b));
    }
    return windows;
}

}  // namespace canids
