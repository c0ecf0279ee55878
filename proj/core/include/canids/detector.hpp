#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "canids/can_frame.hpp"
#include "canids/clock.hpp"
#include "canids/msg_graph.hpp"

namespace canids {

enum class WarmupPolicy { ReportNormal, ReportUnknown };

// Which graph the next window is compared against.
//  PreviousWindow: always the immediately preceding window.
//  LastNormal: the most recent window that was not flagged, so a burst of
//  injected windows is compared against clean traffic and does not become
//  the reference for the window after it.
enum class ReferencePolicy { PreviousWindow, LastNormal };

enum class Label { Normal, Anomalous, Warmup };

std::string_view to_string(Label label) noexcept;
std::optional<Label> parse_label(std::string_view s) noexcept;
std::string_view to_string(WarmupPolicy p) noexcept;
std::optional<WarmupPolicy> parse_warmup_policy(std::string_view s) noexcept;
std::string_view to_string(ReferencePolicy p) noexcept;
std::optional<ReferencePolicy> parse_reference_policy(std::string_view s) noexcept;

inline constexpr std::size_t kDefaultWindowSize = 1000;

struct DetectorConfig {
    std::size_t window_size = kDefaultWindowSize;
    double threshold = 0.9;
    WarmupPolicy warmup = WarmupPolicy::ReportUnknown;
    bool carry_boundary_edge = false;
    ReferencePolicy reference = ReferencePolicy::PreviousWindow;
    // Extra time spent inside every evaluation; emulates a slower analysis
    // module when reproducing a given evaluation-time regime.
    std::chrono::nanoseconds eval_padding{0};

    /// Throws InvalidArgument when w < 2 or the threshold is outside [0, 1].
    void validate() const;
};

struct Verdict {
    std::uint64_t window_index = 0;
    std::optional<double> similarity;
    Label label = Label::Warmup;
    std::int64_t eval_started_ns = 0;
    std::int64_t eval_finished_ns = 0;

    double eval_ms() const noexcept { return static_cast<double>(eval_finished_ns - eval_started_ns) / 1e6; }

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

// {"t":..,"sim":..|null,"label":"..","eval_ms":..,"eval_start_ns":..,"eval_end_ns":..}
std::string to_json_line(const Verdict& v);
Verdict parse_verdict_line(std::string_view line);

struct DetectorState {
    std::optional<MessagesSequenceGraph> reference;
    std::optional<NodeId> last_node;  // last frame of the previous window
};

struct WindowEvaluation {
    Verdict verdict;
    DetectorState state;
};

/// One detection step: builds the window graph, compares it with the
/// reference graph in `state` and labels the window against the threshold.
WindowEvaluation evaluate_window(const DetectorState& state, const FrameBatch& batch, const DetectorConfig& cfg,
                                 Clock& clock);

// Stateful wrapper; single consumer.
class Detector {
public:
    explicit Detector(DetectorConfig cfg);

    Verdict evaluate(const FrameBatch& batch);
    Verdict evaluate(const FrameBatch& batch, Clock& clock);

    const DetectorConfig& config() const noexcept { return cfg_; }
    const DetectorState& state() const noexcept { return state_; }
    void reset() { state_ = {}; }

private:
    DetectorConfig cfg_;
    DetectorState state_;
    SteadyClock clock_;
};

/// Similarities of each window against its predecessor (n windows -> n-1 values).
std::vector<double> similarity_series(std::span<const FrameBatch> windows, bool carry_boundary_edge = false);

/// Nearest-rank percentile, p in [0, 100]; p = 0 gives the minimum.
double nearest_rank_percentile(std::span<const double> values, double p);

struct CalibrationResult {
    double threshold = 0.0;
    double percentile_value = 0.0;
    std::vector<double> series;
};

inline constexpr double kDefaultCalibrationPercentile = 1.0;
inline constexpr double kDefaultCalibrationMargin = 0.01;

/// threshold = percentile(series, p) - margin, clamped to [0, 1].
/// Needs at least 3 windows; throws InsufficientData otherwise.
CalibrationResult calibrate_threshold(std::span<const FrameBatch> normal_windows,
                                      double percentile = kDefaultCalibrationPercentile,
                                      double margin = kDefaultCalibrationMargin,
                                      bool carry_boundary_edge = false);

/// Same rule applied to a precomputed series (>= 2 values).
double threshold_from_series(std::span<const double> series, double percentile, double margin);

/// Splits frames into consecutive full windows of `w`; a trailing partial
/// window is dropped.
std::vector<FrameBatch> make_windows(std::span<const CanFrame> frames, std::size_t w);

}  // namespace canids
