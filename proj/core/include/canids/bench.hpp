#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "canids/scenarios.hpp"

namespace canids {

struct Aggregate {
    double min = 0.0;
    double max = 0.0;
    double avg = 0.0;

    static Aggregate of(std::span<const double> values);
};

struct HostInfo {
    std::string os;
    std::string cpu;
};

HostInfo host_info();

// The three measured quantities of a run plus an echo of its configuration.
//   eval time     = eval_end - batch_collect_end
//   response time = eval_end - batch_collect_start
//   loss ratio    = dropped / published on the monitor's subscription
struct MetricsSummary {
    Architecture scenario = Architecture::Inline;

    // config echo
    std::size_t window_size = 0;
    double rate_msgs_per_sec = 0.0;
    double threshold = 0.0;
    std::optional<std::size_t> queue_capacity;
    std::size_t buffer_capacity = 0;
    ClockKind clock = ClockKind::RealTime;
    double eval_padding_ms = 0.0;
    std::string source;

    Aggregate send_ms;
    Aggregate eval_ms;
    double response_ms_avg = 0.0;
    double response_ms_max = 0.0;
    double loss_ratio = 0.0;

    std::uint64_t published = 0;
    std::uint64_t dropped = 0;
    std::uint64_t windows = 0;
    std::uint64_t anomalous_windows = 0;
    std::uint64_t queue_dropped = 0;
    std::uint64_t workers_spawned = 0;
    std::uint64_t workers_unreaped = 0;

    HostInfo host;
};

/// Throws EmptyRun if the record has no completed window.
MetricsSummary summarize(const RunRecord& record);

struct SweepRow {
    double rate_msgs_per_sec = 0.0;
    double batch_send_seconds = 0.0;  // w / rate
    std::optional<double> measured_send_ms;
    std::optional<double> loss_ratio;
    std::uint64_t windows = 0;
    std::string error;  // non-empty: the run failed

    bool ok() const noexcept { return error.empty(); }
};

/// One run per rate; a failing run yields a row with `error` set.
std::vector<SweepRow> sweep_loss_vs_rate(const ScenarioMode& mode, std::span<const double> rates,
                                         const ReplayConfig& base_replay, const DetectorConfig& detector,
                                         const ScenarioOptions& options = {});

enum class ReportFormat { Json, Csv };

std::string to_json(const MetricsSummary& s);
std::string to_csv(const MetricsSummary& s);
std::string to_json(std::span<const SweepRow> rows);
std::string to_csv(std::span<const SweepRow> rows);

/// Header-first RFC 4180 CSV or a JSON document with a fixed field order.
void emit_report(const MetricsSummary& s, ReportFormat format, const std::filesystem::path& path);
void emit_report(std::span<const SweepRow> rows, ReportFormat format, const std::filesystem::path& path);

/// Minimal SVG line chart of loss ratio against batch send time.
std::string sweep_svg(std::span<const SweepRow> rows);

std::string csv_escape(std::string_view field);

}  // namespace canids
