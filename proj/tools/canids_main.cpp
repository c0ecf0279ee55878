#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <string_view>
#include <unistd.h>
#include <vector>

#include "canids/bench.hpp"
#include "canids/can_frame.hpp"
#include "canids/detector.hpp"
#include "canids/emulator.hpp"
#include "canids/error.hpp"
#include "canids/scenarios.hpp"
#include "canids/virtual_bus.hpp"
#include "canids/worker.hpp"

namespace {

using namespace canids;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitAnomaly = 2;
constexpr int kExitUsage = 64;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SourceOptions {
    std::string input;
    bool synthetic = false;
    std::optional<std::size_t> frames;

    void add(CLI::App& cmd) {
        auto* in = cmd.add_option("--input", input, "candump -L log to replay")->check(CLI::ExistingFile);
        auto* syn = cmd.add_flag("--synthetic", synthetic, "use the built-in 20-id ECU schedule");
        in->excludes(syn);
        cmd.add_option("--frames", frames, "synthetic frame count, or a cap on the log length")
            ->check(CLI::PositiveNumber);
    }

    void apply(ReplayConfig& cfg) const {
        if (!input.empty()) {
            cfg.log_path = input;
            cfg.frame_budget = frames;
        } else if (frames) {
            cfg.synthetic_frames = *frames;
        }
    }
};

struct PipelineOptions {
    SourceOptions source;
    double rate = kDefaultRate;
    std::size_t window = kDefaultWindowSize;
    double threshold = 0.9;
    std::string clock = "real";
    std::size_t buffer_capacity = kDefaultBufferCapacity;
    std::size_t queue_capacity = kDefaultQueueCapacity;
    double eval_delay_ms = 0.0;
    std::string reference = "previous";
    std::string warmup = "report-unknown";
    bool carry_boundary_edge = false;
    bool allow_over_capacity = false;

    std::string attack_id = "0x244";
    std::optional<std::uint32_t> attack_rate;
    std::uint64_t attack_start = 1;
    std::optional<std::uint64_t> attack_end;
    double attack_jitter = 0.0;
    std::uint64_t attack_seed = 1;

    void add(CLI::App& cmd, bool with_rate) {
        source.add(cmd);
        if (with_rate) cmd.add_option("--rate", rate, "replay rate in msgs/s")->check(CLI::PositiveNumber);
        cmd.add_option("--window", window, "frames per detection window")->check(CLI::Range(2, 1'000'000));
        cmd.add_option("--threshold", threshold, "similarity threshold")->check(CLI::Range(0.0, 1.0));
        cmd.add_option("--clock", clock, "real or sim")->check(CLI::IsMember({"real", "sim"}));
        cmd.add_option("--buffer-capacity", buffer_capacity, "monitor subscription buffer (frames)")
            ->check(CLI::PositiveNumber);
        cmd.add_option("--queue-capacity", queue_capacity, "batch queue for scenarios 3/4, 0 = unbounded");
        cmd.add_option("--eval-delay-ms", eval_delay_ms, "padding added to every evaluation")
            ->check(CLI::NonNegativeNumber);
        cmd.add_option("--reference", reference, "previous or last-normal")
            ->check(CLI::IsMember({"previous", "last-normal"}));
        cmd.add_option("--warmup", warmup, "report-unknown or report-normal")
            ->check(CLI::IsMember({"report-unknown", "report-normal"}));
        cmd.add_flag("--carry-boundary-edge", carry_boundary_edge, "count the edge across window boundaries");
        cmd.add_flag("--allow-over-capacity", allow_over_capacity, "permit rates above 1908 msgs/s");

        cmd.add_option("--attack-id", attack_id, "injected CAN id (hex)");
        cmd.add_option("--attack-rate", attack_rate, "fabricated frames per 1000 legitimate; enables the attack")
            ->check(CLI::PositiveNumber);
        cmd.add_option("--attack-start", attack_start, "first attacked window");
        cmd.add_option("--attack-end", attack_end, "window after the last attacked one (default start + 1)");
        cmd.add_option("--attack-jitter", attack_jitter, "0 = evenly spaced, up to 1")->check(CLI::Range(0.0, 1.0));
        cmd.add_option("--attack-seed", attack_seed, "seed for the jitter");
    }

    ReplayConfig replay_config() const {
        ReplayConfig cfg;
        source.apply(cfg);
        cfg.rate_msgs_per_sec = rate;
        cfg.clock = clock == "sim" ? ClockKind::Simulated : ClockKind::RealTime;
        cfg.allow_over_capacity = allow_over_capacity;
        if (attack_rate) {
            AttackSpec a;
            a.attack_id = parse_can_id(attack_id);
            a.extended = a.attack_id > 0x7FF;
            a.injection_rate = *attack_rate;
            a.start_window = attack_start;
            a.end_window = attack_end.value_or(attack_start + 1);
            a.window_size = window;
            a.jitter = attack_jitter;
            a.seed = attack_seed;
            cfg.attack = a;
        }
        return cfg;
    }

    DetectorConfig detector_config() const {
        DetectorConfig d;
        d.window_size = window;
        d.threshold = threshold;
        d.warmup = *parse_warmup_policy(warmup);
        d.reference = *parse_reference_policy(reference);
        d.carry_boundary_edge = carry_boundary_edge;
        d.eval_padding = std::chrono::nanoseconds(static_cast<std::int64_t>(eval_delay_ms * 1e6));
        return d;
    }

    ScenarioOptions scenario_options() const {
        ScenarioOptions o;
        o.buffer_capacity = buffer_capacity;
        return o;
    }

    static CanId parse_can_id(std::string_view s) {
        if (s.starts_with("0x") || s.starts_with("0X")) s.remove_prefix(2);
        CanId id = 0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id, 16);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || id > 0x1FFFFFFF)
            throw UsageError("--attack-id: not a CAN id: " + std::string(s));
        return id;
    }
};

ScenarioMode make_mode(int scenario, std::size_t queue_capacity) {
    ScenarioMode m;
    m.architecture = *architecture_from_number(scenario);
    m.queue_capacity = queue_capacity == 0 ? std::nullopt : std::optional<std::size_t>(queue_capacity);
    return m;
}

ReportFormat format_for(const std::string& path, const std::string& explicit_format) {
    if (explicit_format == "csv") return ReportFormat::Csv;
    if (explicit_format == "json") return ReportFormat::Json;
    return path.ends_with(".csv") ? ReportFormat::Csv : ReportFormat::Json;
}

std::vector<double> parse_rates(std::string_view text) {
    std::vector<double> rates;
    while (true) {
        const auto comma = text.find(',');
        auto field = text.substr(0, comma);
        while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
        while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
        double r = 0.0;
        auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), r);
        if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size() || !(r > 0.0))
            throw UsageError("--rates: malformed rate '" + std::string(field) + "'");
        rates.push_back(r);
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return rates;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out || !(out << text) || !out.flush()) throw Error(ErrorCode::IoError, "cannot write " + path);
}

// ---------------------------------------------------------------- replay

struct ReplayCmd {
    PipelineOptions opts;
    std::string export_path;
    std::string iface = "vcan0";
    bool dry_run = false;

    int operator()() const {
        const auto cfg = opts.replay_config();
        cfg.validate();
        const auto frames = load_frames(cfg);
        if (!export_path.empty()) write_log_file(export_path, frames, iface);
        if (dry_run) {
            std::cout << "frames " << frames.size() << "\n";
            return kExitOk;
        }
        VirtualBus bus;
        const auto report = replay(cfg, frames, bus, cfg.clock == ClockKind::Simulated
                                                         ? static_cast<Clock&>(sim_clock())
                                                         : static_cast<Clock&>(steady_clock()));
        const auto chunks = chunk_send_times(report, opts.window);
        nlohmann::ordered_json j;
        j["sent"] = report.sent_count;
        j["published"] = bus.stats().published;
        j["elapsed_s"] = report.elapsed_seconds();
        j["rate"] = cfg.rate_msgs_per_sec;
        std::vector<double> ms;
        for (auto t : chunks) ms.push_back(static_cast<double>(t) / 1e6);
        const auto agg = Aggregate::of(ms);
        j["send_ms"] = {{"min", agg.min}, {"max", agg.max}, {"avg", agg.avg}};
        std::cout << j.dump(2) << "\n";
        return kExitOk;
    }

    static SimulatedClock& sim_clock() {
        static SimulatedClock c;
        return c;
    }
    static SteadyClock& steady_clock() {
        static SteadyClock c;
        return c;
    }
};

// ---------------------------------------------------------------- calibrate

struct CalibrateCmd {
    SourceOptions source;
    std::size_t window = kDefaultWindowSize;
    double percentile = kDefaultCalibrationPercentile;
    double margin = kDefaultCalibrationMargin;
    bool carry_boundary_edge = false;
    std::string out;

    int operator()() const {
        ReplayConfig cfg;
        source.apply(cfg);
        const auto frames = load_frames(cfg);
        const auto windows = make_windows(frames, window);
        const auto result = calibrate_threshold(windows, percentile, margin, carry_boundary_edge);

        nlohmann::ordered_json j;
        j["tau"] = result.threshold;
        j["percentile"] = percentile;
        j["margin"] = margin;
        j["percentile_value"] = result.percentile_value;
        j["w"] = window;
        j["windows"] = windows.size();
        j["source"] = source.input.empty() ? "synthetic" : source.input;
        j["series"] = result.series;
        const auto text = j.dump(2) + "\n";
        if (out.empty())
            std::cout << text;
        else
            write_file(out, text);
        return kExitOk;
    }
};

// ---------------------------------------------------------------- run

struct RunCmd {
    PipelineOptions opts;
    int scenario = 0;
    std::string report;
    std::string format;
    std::string verdicts;

    int operator()() const {
        const auto replay_cfg = opts.replay_config();
        const auto detector_cfg = opts.detector_config();
        replay_cfg.validate();
        detector_cfg.validate();
        const auto record = run_scenario(make_mode(scenario, opts.queue_capacity), replay_cfg, detector_cfg,
                                         opts.scenario_options());
        const auto summary = summarize(record);

        if (!verdicts.empty()) {
            std::string lines;
            for (const auto& w : record.windows) lines += to_json_line(w.verdict) + "\n";
            write_file(verdicts, lines);
        }
        if (report.empty()) {
            std::cout << (format_for(report, format) == ReportFormat::Csv ? to_csv(summary) : to_json(summary));
        } else {
            emit_report(summary, format_for(report, format), report);
            std::printf("%s windows=%llu anomalous=%llu loss_ratio=%.6f eval_ms_avg=%.3f response_ms_avg=%.3f\n",
                        std::string(to_string(summary.scenario)).c_str(),
                        static_cast<unsigned long long>(summary.windows),
                        static_cast<unsigned long long>(summary.anomalous_windows), summary.loss_ratio,
                        summary.eval_ms.avg, summary.response_ms_avg);
        }
        return record.any_anomalous() ? kExitAnomaly : kExitOk;
    }
};

// ---------------------------------------------------------------- sweep

struct SweepCmd {
    PipelineOptions opts;
    int scenario = 0;
    std::string rates;
    std::string report;
    std::string format;
    std::string svg;

    int operator()() const {
        const auto rate_list = parse_rates(rates);
        const auto detector_cfg = opts.detector_config();
        detector_cfg.validate();
        const auto rows = sweep_loss_vs_rate(make_mode(scenario, opts.queue_capacity), rate_list,
                                             opts.replay_config(), detector_cfg, opts.scenario_options());
        const auto fmt = format.empty() ? ReportFormat::Csv : format_for(report, format);
        if (report.empty())
            std::cout << (fmt == ReportFormat::Csv ? to_csv(rows) : to_json(rows));
        else
            emit_report(rows, fmt, report);
        if (!svg.empty()) write_file(svg, sweep_svg(rows));

        bool any_ok = false;
        for (const auto& r : rows) {
            if (r.ok())
                any_ok = true;
            else
                std::cerr << "rate " << r.rate_msgs_per_sec << ": " << r.error << "\n";
        }
        return any_ok ? kExitOk : kExitRuntime;
    }
};

// ---------------------------------------------------------------- _worker

int worker_main(int argc, char** argv) {
    CLI::App app{"detector worker"};
    WorkerOptions w;
    std::string warmup = "report-unknown";
    std::string reference = "previous";
    std::int64_t padding_ns = 0;
    app.add_option("--window", w.detector.window_size)->required();
    app.add_option("--threshold", w.detector.threshold)->required();
    app.add_option("--warmup", warmup);
    app.add_option("--reference", reference);
    app.add_option("--eval-padding-ns", padding_ns);
    app.add_flag("--carry-boundary-edge", w.detector.carry_boundary_edge);
    app.add_flag("--emit-last", w.emit_last_only);
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    auto wp = parse_warmup_policy(warmup);
    auto rp = parse_reference_policy(reference);
    if (!wp || !rp) {
        std::cerr << "_worker: bad --warmup or --reference\n";
        return kExitUsage;
    }
    w.detector.warmup = *wp;
    w.detector.reference = *rp;
    w.detector.eval_padding = std::chrono::nanoseconds(padding_ns);
    return run_worker(w, STDIN_FILENO, STDOUT_FILENO);
}

int exit_code_for(const Error& e) {
    switch (e.code()) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::RateExceedsBusCapacity:
        case ErrorCode::WindowOutOfRange:
            return kExitUsage;
        default:
            return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    if (argc >= 2 && std::string_view(argv[1]) == kWorkerSubcommand) return worker_main(argc - 1, argv + 1);

    CLI::App app{"CAN bus intrusion detection: messages-sequence graphs and architecture benchmarks"};
    app.require_subcommand(1);
    app.set_config("--config", "", "TOML/INI file with default option values")->envname("CANIDS_CONFIG");

    ReplayCmd replay_cmd;
    auto* replay_app = app.add_subcommand("replay", "pace a frame source onto a virtual bus");
    replay_cmd.opts.add(*replay_app, true);
    replay_app->add_option("--export", replay_cmd.export_path, "write the frames as a candump -L log");
    replay_app->add_option("--iface", replay_cmd.iface, "interface name in the exported log");
    replay_app->add_flag("--dry-run", replay_cmd.dry_run, "only load/export, do not replay");

    CalibrateCmd calibrate_cmd;
    auto* calibrate_app = app.add_subcommand("calibrate", "derive a threshold from attack-free traffic");
    calibrate_cmd.source.add(*calibrate_app);
    calibrate_app->add_option("--window", calibrate_cmd.window)->check(CLI::Range(2, 1'000'000));
    calibrate_app->add_option("--percentile", calibrate_cmd.percentile)->check(CLI::Range(0.0, 100.0));
    calibrate_app->add_option("--margin", calibrate_cmd.margin)->check(CLI::Range(0.0, 1.0));
    calibrate_app->add_flag("--carry-boundary-edge", calibrate_cmd.carry_boundary_edge);
    calibrate_app->add_option("--out", calibrate_cmd.out, "output JSON (default stdout)");

    RunCmd run_cmd;
    auto* run_app = app.add_subcommand("run", "run one architecture scenario and report metrics");
    run_app->add_option("--scenario", run_cmd.scenario, "1 inline, 2 worker per batch, 3 threads, 4 processes")
        ->required()
        ->check(CLI::Range(1, 4));
    run_cmd.opts.add(*run_app, true);
    run_app->add_option("--report", run_cmd.report, "report path (.json or .csv)");
    run_app->add_option("--format", run_cmd.format)->check(CLI::IsMember({"json", "csv"}));
    run_app->add_option("--verdicts", run_cmd.verdicts, "write JSON-line verdicts");

    SweepCmd sweep_cmd;
    auto* sweep_app = app.add_subcommand("sweep", "loss ratio against replay rate");
    sweep_app->add_option("--scenario", sweep_cmd.scenario)->required()->check(CLI::Range(1, 4));
    sweep_app->add_option("--rates", sweep_cmd.rates, "comma-separated rates in msgs/s")->required();
    sweep_cmd.opts.add(*sweep_app, false);
    sweep_app->add_option("--report", sweep_cmd.report, "CSV (default) or JSON path");
    sweep_app->add_option("--format", sweep_cmd.format)->check(CLI::IsMember({"json", "csv"}));
    sweep_app->add_option("--svg", sweep_cmd.svg, "plot of loss against batch send time");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*replay_app) return replay_cmd();
        if (*calibrate_app) return calibrate_cmd();
        if (*run_app) return run_cmd();
        if (*sweep_app) return sweep_cmd();
    } catch (const UsageError& e) {
        std::cerr << "canids: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "canids: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "canids: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
