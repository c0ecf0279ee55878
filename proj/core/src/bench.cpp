#include "canids/bench.hpp"

#include <sys/utsname.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace canids {

namespace {

constexpr double kNsPerMs = 1e6;

std::string clock_name(ClockKind k) { return k == ClockKind::Simulated ? "simulated" : "real-time"; }

std::string source_name(const ReplayConfig& cfg) {
    std::string s = cfg.log_path ? "log:" + cfg.log_path->string() : "synthetic:" + std::to_string(cfg.synthetic_frames);
    if (cfg.attack) {
        char buf[96];
        std::snprintf(buf, sizeof buf, " attack:0x%X@%u/1000[%llu,%llu)", cfg.attack->attack_id,
                      cfg.attack->injection_rate, static_cast<unsigned long long>(cfg.attack->start_window),
                      static_cast<unsigned long long>(cfg.attack->end_window));
        s += buf;
    }
    return s;
}

nlohmann::ordered_json aggregate_json(const Aggregate& a) {
    nlohmann::ordered_json j;
    j["min"] = a.min;
    j["max"] = a.max;
    j["avg"] = a.avg;
    return j;
}

std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot create " + path.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

}  // namespace

Aggregate Aggregate::of(std::span<const double> values) {
    if (values.empty()) return {};
    Aggregate a;
    a.min = *std::min_element(values.begin(), values.end());
    a.max = *std::max_element(values.begin(), values.end());
    a.avg = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    return a;
}

HostInfo host_info() {
    HostInfo h;
    utsname u{};
    if (::uname(&u) == 0) {
        h.os = std::string(u.sysname) + " " + u.release;
        h.cpu = u.machine;
    }
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
        if (line.rfind("model name", 0) == 0) {
            if (auto colon = line.find(':'); colon != std::string::npos) {
                auto name = line.substr(colon + 1);
                name.erase(0, name.find_first_not_of(' '));
                h.cpu = name;
            }
            break;
        }
    }
    return h;
}

MetricsSummary summarize(const RunRecord& record) {
    if (record.windows.empty()) throw Error(ErrorCode::EmptyRun, "run completed no window");

    MetricsSummary s;
    s.scenario = record.mode.architecture;
    s.window_size = record.detector_config.window_size;
    s.rate_msgs_per_sec = record.replay_config.rate_msgs_per_sec;
    s.threshold = record.detector_config.threshold;
    s.queue_capacity = record.mode.queue_capacity;
    s.buffer_capacity = record.buffer_capacity;
    s.clock = record.replay_config.clock;
    s.eval_padding_ms = static_cast<double>(record.detector_config.eval_padding.count()) / kNsPerMs;
    s.source = source_name(record.replay_config);

    std::vector<double> eval, response, send;
    for (const auto& w : record.windows) {
        eval.push_back(static_cast<double>(w.eval_end_ns - w.collect_end_ns) / kNsPerMs);
        response.push_back(static_cast<double>(w.eval_end_ns - w.collect_start_ns) / kNsPerMs);
        if (w.verdict.label == Label::Anomalous) ++s.anomalous_windows;
    }
    for (auto t : record.send_times_ns) send.push_back(static_cast<double>(t) / kNsPerMs);

    s.eval_ms = Aggregate::of(eval);
    s.send_ms = Aggregate::of(send);
    const auto resp = Aggregate::of(response);
    s.response_ms_avg = resp.avg;
    s.response_ms_max = resp.max;

    s.published = record.published();
    s.dropped = record.dropped();
    s.loss_ratio = record.loss_ratio();
    s.windows = record.windows.size();
    s.queue_dropped = record.queue_dropped;
    s.workers_spawned = record.workers_spawned;
    s.workers_unreaped = record.workers_unreaped;
    s.host = host_info();
    return s;
}

std::vector<SweepRow> sweep_loss_vs_rate(const ScenarioMode& mode, std::span<const double> rates,
                                         const ReplayConfig& base_replay, const DetectorConfig& detector,
                                         const ScenarioOptions& options) {
    if (rates.empty()) throw Error(ErrorCode::InvalidArgument, "sweep needs at least one rate");
    std::vector<SweepRow> rows;
    rows.reserve(rates.size());
    for (double rate : rates) {
        SweepRow row;
        row.rate_msgs_per_sec = rate;
        row.batch_send_seconds = rate > 0.0 ? static_cast<double>(detector.window_size) / rate : 0.0;
        try {
            ReplayConfig cfg = base_replay;
            cfg.rate_msgs_per_sec = rate;
            const auto record = run_scenario(mode, cfg, detector, options);
            row.loss_ratio = record.loss_ratio();
            row.windows = record.windows.size();
            if (!record.send_times_ns.empty()) {
                double total = 0.0;
                for (auto t : record.send_times_ns) total += static_cast<double>(t);
                row.measured_send_ms = total / static_cast<double>(record.send_times_ns.size()) / kNsPerMs;
            }
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string to_json(const MetricsSummary& s) {
    nlohmann::ordered_json j;
    j["scenario"] = std::string(to_string(s.scenario));
    auto& c = j["config"];
    c["w"] = s.window_size;
    c["rate"] = s.rate_msgs_per_sec;
    c["tau"] = s.threshold;
    if (s.queue_capacity)
        c["queue_capacity"] = *s.queue_capacity;
    else
        c["queue_capacity"] = nullptr;
    c["buffer_capacity"] = s.buffer_capacity;
    c["clock"] = clock_name(s.clock);
    c["eval_padding_ms"] = s.eval_padding_ms;
    c["source"] = s.source;
    auto& m = j["metrics"];
    m["send_ms"] = aggregate_json(s.send_ms);
    m["eval_ms"] = aggregate_json(s.eval_ms);
    m["response_ms_avg"] = s.response_ms_avg;
    m["response_ms_max"] = s.response_ms_max;
    m["loss_ratio"] = s.loss_ratio;
    m["published"] = s.published;
    m["dropped"] = s.dropped;
    m["queue_dropped"] = s.queue_dropped;
    m["anomalous_windows"] = s.anomalous_windows;
    m["workers_spawned"] = s.workers_spawned;
    m["workers_unreaped"] = s.workers_unreaped;
    j["host"]["os"] = s.host.os;
    j["host"]["cpu"] = s.host.cpu;
    j["windows"] = s.windows;
    return j.dump(2) + "\n";
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string to_csv(const MetricsSummary& s) {
    std::ostringstream out;
    out << "scenario,w,rate,tau,queue_capacity,buffer_capacity,clock,send_ms_min,send_ms_max,send_ms_avg,"
           "eval_ms_min,eval_ms_max,eval_ms_avg,response_ms_avg,loss_ratio,published,dropped,windows\r\n";
    out << to_string(s.scenario) << ',' << s.window_size << ',' << format_number(s.rate_msgs_per_sec) << ','
        << format_number(s.threshold) << ',' << (s.queue_capacity ? std::to_string(*s.queue_capacity) : "") << ','
        << s.buffer_capacity << ',' << clock_name(s.clock) << ',' << format_number(s.send_ms.min) << ','
        << format_number(s.send_ms.max) << ',' << format_number(s.send_ms.avg) << ',' << format_number(s.eval_ms.min)
        << ',' << format_number(s.eval_ms.max) << ',' << format_number(s.eval_ms.avg) << ','
        << format_number(s.response_ms_avg) << ',' << format_number(s.loss_ratio) << ',' << s.published << ','
        << s.dropped << ',' << s.windows << "\r\n";
    return out.str();
}

std::string to_json(std::span<const SweepRow> rows) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["rate"] = r.rate_msgs_per_sec;
        j["batch_send_s"] = r.batch_send_seconds;
        j["measured_send_ms"] = r.measured_send_ms ? nlohmann::ordered_json(*r.measured_send_ms) : nullptr;
        j["loss_ratio"] = r.loss_ratio ? nlohmann::ordered_json(*r.loss_ratio) : nullptr;
        j["windows"] = r.windows;
        j["status"] = r.ok() ? "ok" : "failed";
        j["error"] = r.error;
        arr.push_back(std::move(j));
    }
    return arr.dump(2) + "\n";
}

std::string to_csv(std::span<const SweepRow> rows) {
    std::ostringstream out;
    out << "rate,batch_send_s,measured_send_ms,loss_ratio,windows,status,error\r\n";
    for (const auto& r : rows) {
        out << format_number(r.rate_msgs_per_sec) << ',' << format_number(r.batch_send_seconds) << ','
            << (r.measured_send_ms ? format_number(*r.measured_send_ms) : "") << ','
            << (r.loss_ratio ? format_number(*r.loss_ratio) : "") << ',' << r.windows << ','
            << (r.ok() ? "ok" : "failed") << ',' << csv_escape(r.error) << "\r\n";
    }
    return out.str();
}

void emit_report(const MetricsSummary& s, ReportFormat format, const std::filesystem::path& path) {
    write_text(path, format == ReportFormat::Json ? to_json(s) : to_csv(s));
}

void emit_report(std::span<const SweepRow> rows, ReportFormat format, const std::filesystem::path& path) {
    write_text(path, format == ReportFormat::Json ? to_json(rows) : to_csv(rows));
}

std::string sweep_svg(std::span<const SweepRow> rows) {
    constexpr double width = 480, height = 320, margin = 48;
    std::vector<const SweepRow*> points;
    for (const auto& r : rows)
        if (r.ok() && r.loss_ratio) points.push_back(&r);
    std::sort(points.begin(), points.end(),
              [](auto* a, auto* b) { return a->batch_send_seconds < b->batch_send_seconds; });

    double max_x = 0.0, max_y = 0.0;
    for (auto* p : points) {
        max_x = std::max(max_x, p->batch_send_seconds);
        max_y = std::max(max_y, *p->loss_ratio);
    }
    if (max_x <= 0.0) max_x = 1.0;
    if (max_y <= 0.0) max_y = 1.0;
    auto px = [&](double x) { return margin + x / max_x * (width - 2 * margin); };
    auto py = [&](double y) { return height - margin - y / max_y * (height - 2 * margin); };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\"" << width - margin << "\" y2=\""
        << height - margin << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\"" << height - margin
        << "\" stroke=\"black\"/>\n"
        << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">seconds to send one batch</text>\n"
        << "<text x=\"14\" y=\"" << height / 2 << "\" transform=\"rotate(-90 14 " << height / 2
        << ")\" text-anchor=\"middle\" font-size=\"12\">message loss ratio (max " << format_number(max_y)
        << ")</text>\n";
    if (!points.empty()) {
        svg << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
        for (auto* p : points) svg << px(p->batch_send_seconds) << ',' << py(*p->loss_ratio) << ' ';
        svg << "\"/>\n";
        for (auto* p : points)
            svg << "<circle cx=\"" << px(p->batch_send_seconds) << "\" cy=\"" << py(*p->loss_ratio)
                << "\" r=\"3\" fill=\"steelblue\"/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace canids
