#include "canids/scenarios.hpp"

#include <signal.h>

#include <algorithm>
#include <atomic>
#include <deque>
#include <exception>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "canids/bounded_queue.hpp"
#include "canids/worker.hpp"
#include "process.hpp"

namespace canids {

std::string_view to_string(Architecture a) noexcept {
    switch (a) {
        case Architecture::Inline: return "S1_Inline";
        case Architecture::WorkerPerBatch: return "S2_WorkerPerBatch";
        case Architecture::TwoThreads: return "S3_TwoTasksOneProcess";
        case Architecture::TwoProcesses: return "S4_TwoProcesses";
    }
    return "unknown";
}

std::optional<Architecture> architecture_from_number(int n) noexcept {
    if (n < 1 || n > 4) return std::nullopt;
    return static_cast<Architecture>(n);
}

std::uint64_t RunRecord::dropped() const noexcept {
    return bus.subscriptions.empty() ? 0 : bus.subscriptions.front().dropped;
}

double RunRecord::loss_ratio() const noexcept {
    return bus.published == 0 ? 0.0 : static_cast<double>(dropped()) / static_cast<double>(bus.published);
}

bool RunRecord::any_anomalous() const noexcept {
    return std::any_of(windows.begin(), windows.end(),
                       [](const WindowRecord& w) { return w.verdict.label == Label::Anomalous; });
}

std::vector<Verdict> RunRecord::verdicts() const {
    std::vector<Verdict> out;
    out.reserve(windows.size());
    for (const auto& w : windows) out.push_back(w.verdict);
    return out;
}

double predicted_loss_ratio(double send_seconds, double eval_seconds) {
    if (!(send_seconds > 0.0) || eval_seconds < 0.0)
        throw Error(ErrorCode::InvalidArgument, "send time must be > 0 and eval time >= 0");
    return eval_seconds / (send_seconds + eval_seconds);
}

double predicted_loss_ratio(Architecture arch, double send_seconds, double eval_seconds) {
    switch (arch) {
        case Architecture::Inline: return predicted_loss_ratio(send_seconds, eval_seconds);
        case Architecture::WorkerPerBatch:
            predicted_loss_ratio(send_seconds, eval_seconds);  // argument check
            return 0.0;
        case Architecture::TwoThreads:
        case Architecture::TwoProcesses:
            predicted_loss_ratio(send_seconds, eval_seconds);
            return eval_seconds < send_seconds ? 0.0 : 1.0 - send_seconds / eval_seconds;
    }
    return 0.0;
}

namespace {

using detail::FileDescriptor;

// Where full batches go. submit() is called from the monitor loop; finish()
// flushes and returns every verdict that was produced.
class DetectionBackend {
public:
    virtual ~DetectionBackend() = default;
    virtual void submit(FrameBatch batch) = 0;
    virtual std::vector<Verdict> finish() = 0;
    virtual std::uint64_t queue_dropped() const { return 0; }
    virtual std::uint64_t workers_spawned() const { return 0; }
    virtual std::uint64_t workers_unreaped() const { return 0; }
};

class InlineBackend final : public DetectionBackend {
public:
    explicit InlineBackend(const DetectorConfig& cfg) : detector_(cfg) {}

    void submit(FrameBatch batch) override { verdicts_.push_back(detector_.evaluate(batch)); }
    std::vector<Verdict> finish() override { return std::move(verdicts_); }

private:
    Detector detector_;
    std::vector<Verdict> verdicts_;
};

class ThreadBackend final : public DetectionBackend {
public:
    ThreadBackend(const DetectorConfig& cfg, std::optional<std::size_t> capacity)
        : detector_(cfg), queue_(capacity), worker_([this] { loop(); }) {}

    ~ThreadBackend() override {
        queue_.close();
        if (worker_.joinable()) worker_.join();
    }

    void submit(FrameBatch batch) override { queue_.push(std::move(batch)); }

    std::vector<Verdict> finish() override {
        queue_.close();
        if (worker_.joinable()) worker_.join();
        if (error_) std::rethrow_exception(error_);
        std::lock_guard lock(mutex_);
        return std::move(verdicts_);
    }

    std::uint64_t queue_dropped() const override { return queue_.dropped(); }

private:
    void loop() {
        try {
            while (auto batch = queue_.pop()) {
                Verdict v = detector_.evaluate(*batch);
                std::lock_guard lock(mutex_);
                verdicts_.push_back(v);
            }
        } catch (...) {
            error_ = std::current_exception();
        }
    }

    Detector detector_;
    BoundedQueue<FrameBatch> queue_;
    std::mutex mutex_;
    std::vector<Verdict> verdicts_;
    std::exception_ptr error_;
    std::thread worker_;
};

std::string worker_executable(const ScenarioOptions& opts) {
    return opts.worker_executable.empty() ? std::string("/proc/self/exe") : opts.worker_executable.string();
}

std::vector<std::string> worker_argv(const ScenarioOptions& opts, const WorkerOptions& wopts) {
    std::vector<std::string> argv{worker_executable(opts)};
    for (auto& a : worker_arguments(wopts)) argv.push_back(std::move(a));
    return argv;
}

// Reads verdict lines until EOF or until `stop` is raised and the stream
// stays idle for one poll interval.
class VerdictReader {
public:
    VerdictReader(FileDescriptor fd, std::chrono::milliseconds poll)
        : fd_(std::move(fd)), poll_(poll), thread_([this] { loop(); }) {}

    ~VerdictReader() { stop_and_join(); }

    void stop_and_join() {
        stop_.store(true);
        if (thread_.joinable()) thread_.join();
    }

    std::vector<Verdict> take() {
        if (error_) std::rethrow_exception(error_);
        std::lock_guard lock(mutex_);
        return std::move(verdicts_);
    }

    bool eof() const { return eof_.load(); }

private:
    void loop() {
        try {
            detail::LineReader reader(fd_.get());
            while (true) {
                auto line = reader.next(poll_);
                if (!line) {
                    if (!reader.timed_out()) break;
                    if (stop_.load()) return;
                    continue;
                }
                if (line->empty()) continue;
                Verdict v = parse_verdict_line(*line);
                std::lock_guard lock(mutex_);
                verdicts_.push_back(v);
            }
            eof_.store(true);
        } catch (...) {
            error_ = std::current_exception();
        }
    }

    FileDescriptor fd_;
    std::chrono::milliseconds poll_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> eof_{false};
    std::mutex mutex_;
    std::vector<Verdict> verdicts_;
    std::exception_ptr error_;
    std::thread thread_;
};

class ProcessBackend final : public DetectionBackend {
public:
    ProcessBackend(const DetectorConfig& cfg, std::optional<std::size_t> capacity, const ScenarioOptions& opts)
        : opts_(opts), queue_(capacity) {
        detail::ignore_sigpipe();
        auto to_child = detail::make_pipe();
        auto from_child = detail::make_pipe();
        pid_ = detail::spawn_process(worker_argv(opts, WorkerOptions{cfg, false}), to_child.read.get(),
                                     from_child.write.get());
        to_child.read.reset();
        from_child.write.reset();
        child_stdin_ = std::move(to_child.write);
        reader_ = std::make_unique<VerdictReader>(std::move(from_child.read), opts.poll_interval);
        sender_ = std::thread([this] { send_loop(); });
    }

    ~ProcessBackend() override {
        queue_.close();
        if (sender_.joinable()) sender_.join();
        child_stdin_.reset();
        if (pid_ > 0 && !detail::reap_with_timeout(pid_, opts_.drain_timeout)) ::kill(pid_, SIGKILL);
        if (pid_ > 0) detail::reap_with_timeout(pid_, std::chrono::milliseconds(1000));
    }

    void submit(FrameBatch batch) override { queue_.push(std::move(batch)); }

    std::vector<Verdict> finish() override {
        queue_.close();
        if (sender_.joinable()) sender_.join();
        child_stdin_.reset();  // EOF for the child
        const auto status = detail::reap_with_timeout(pid_, opts_.drain_timeout);
        if (!status) {
            ::kill(pid_, SIGKILL);
            detail::reap_with_timeout(pid_, std::chrono::milliseconds(1000));
        }
        pid_ = -1;
        reader_->stop_and_join();
        if (send_error_) std::rethrow_exception(send_error_);
        if (!status) throw Error(ErrorCode::ChannelBroken, "detector process did not exit");
        if (*status != 0) throw Error(ErrorCode::ChannelBroken, "detector process exited with " + std::to_string(*status));
        return reader_->take();
    }

    std::uint64_t queue_dropped() const override { return queue_.dropped(); }
    std::uint64_t workers_spawned() const override { return 1; }

private:
    void send_loop() {
        try {
            while (auto batch = queue_.pop()) {
                const auto bytes = serialize_batch(*batch);
                detail::write_all(child_stdin_.get(), bytes);
            }
        } catch (...) {
            send_error_ = std::current_exception();
            queue_.close();
        }
    }

    ScenarioOptions opts_;
    BoundedQueue<FrameBatch> queue_;
    pid_t pid_ = -1;
    FileDescriptor child_stdin_;
    std::unique_ptr<VerdictReader> reader_;
    std::exception_ptr send_error_;
    std::thread sender_;
};

class WorkerPerBatchBackend final : public DetectionBackend {
public:
    WorkerPerBatchBackend(const DetectorConfig& cfg, const ScenarioOptions& opts)
        : opts_(opts), argv_(worker_argv(opts, WorkerOptions{cfg, true})) {
        detail::ignore_sigpipe();
        auto results = detail::make_pipe();
        results_write_ = std::move(results.write);
        reader_ = std::make_unique<VerdictReader>(std::move(results.read), opts.poll_interval);
    }

    ~WorkerPerBatchBackend() override {
        for (auto& t : writers_)
            if (t.joinable()) t.join();
    }

    void submit(FrameBatch batch) override {
        auto payload = std::make_shared<std::vector<std::byte>>();
        if (previous_) *payload = serialize_batch(*previous_);
        const auto current = serialize_batch(batch);
        payload->insert(payload->end(), current.begin(), current.end());
        previous_ = std::move(batch);

        auto input = detail::make_pipe();
        const pid_t pid = detail::spawn_process(argv_, input.read.get(), results_write_.get());
        input.read.reset();
        pids_.push_back(pid);
        // hand the bytes over without blocking the monitor on the pipe
        writers_.emplace_back([fd = std::make_shared<FileDescriptor>(std::move(input.write)), payload] {
            try {
                detail::write_all(fd->get(), *payload);
            } catch (const Error&) {
                // worker died early; its missing verdict shows up in the record
            }
        });
        sweep();
    }

    std::vector<Verdict> finish() override {
        for (auto& t : writers_)
            if (t.joinable()) t.join();
        writers_.clear();
        results_write_.reset();  // EOF once every worker has exited

        const auto deadline = std::chrono::steady_clock::now() + opts_.drain_timeout;
        while (!reader_->eof() && std::chrono::steady_clock::now() < deadline)
            std::this_thread::sleep_for(opts_.poll_interval);
        reader_->stop_and_join();
        sweep();
        return reader_->take();
    }

    std::uint64_t workers_spawned() const override { return spawned_total(); }
    std::uint64_t workers_unreaped() const override { return pids_.size(); }

private:
    std::uint64_t spawned_total() const { return reaped_ + pids_.size(); }

    // best effort: collect finished workers so they do not linger as zombies
    void sweep() {
        std::erase_if(pids_, [this](pid_t pid) {
            if (!detail::try_reap(pid)) return false;
            ++reaped_;
            return true;
        });
    }

    ScenarioOptions opts_;
    std::vector<std::string> argv_;
    FileDescriptor results_write_;
    std::unique_ptr<VerdictReader> reader_;
    std::optional<FrameBatch> previous_;
    std::vector<pid_t> pids_;
    std::uint64_t reaped_ = 0;
    std::vector<std::thread> writers_;
};

std::unique_ptr<DetectionBackend> make_backend(Architecture arch, const DetectorConfig& cfg,
                                               std::optional<std::size_t> queue_capacity,
                                               const ScenarioOptions& opts) {
    switch (arch) {
        case Architecture::Inline: return std::make_unique<InlineBackend>(cfg);
        case Architecture::WorkerPerBatch: return std::make_unique<WorkerPerBatchBackend>(cfg, opts);
        case Architecture::TwoThreads: return std::make_unique<ThreadBackend>(cfg, queue_capacity);
        case Architecture::TwoProcesses: return std::make_unique<ProcessBackend>(cfg, queue_capacity, opts);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown architecture");
}

struct CollectStamps {
    std::int64_t start_ns = 0;
    std::int64_t end_ns = 0;
};

void validate(const ScenarioMode& mode, const ReplayConfig& replay, const DetectorConfig& detector,
              const ScenarioOptions& options) {
    replay.validate();
    detector.validate();
    if (options.buffer_capacity == 0) throw Error(ErrorCode::InvalidArgument, "buffer capacity must be positive");
    if (mode.queue_capacity && *mode.queue_capacity == 0)
        throw Error(ErrorCode::InvalidArgument, "queue capacity must be positive");
}

RunRecord make_record(const ScenarioMode& mode, const ReplayConfig& replay, const DetectorConfig& detector,
                      const ScenarioOptions& options) {
    RunRecord r;
    r.mode = mode;
    r.replay_config = replay;
    r.detector_config = detector;
    r.buffer_capacity = options.buffer_capacity;
    return r;
}

// Attaches collection stamps to verdicts. `eval_end` overrides the
// verdict's own finish stamp when given (simulated runs).
void merge_windows(RunRecord& record, const std::map<std::uint64_t, CollectStamps>& stamps,
                   std::vector<Verdict> verdicts, const std::map<std::uint64_t, std::int64_t>* virtual_end,
                   std::chrono::nanoseconds eval_cost) {
    std::sort(verdicts.begin(), verdicts.end(),
              [](const Verdict& a, const Verdict& b) { return a.window_index < b.window_index; });
    for (auto& v : verdicts) {
        auto it = stamps.find(v.window_index);
        if (it == stamps.end()) throw Error(ErrorCode::ChannelBroken, "verdict for unknown window");
        if (virtual_end) {
            const auto end = virtual_end->at(v.window_index);
            v.eval_finished_ns = end;
            v.eval_started_ns = end - eval_cost.count();
        }
        WindowRecord w;
        w.window_index = v.window_index;
        w.collect_start_ns = it->second.start_ns;
        w.collect_end_ns = it->second.end_ns;
        w.eval_end_ns = v.eval_finished_ns;
        w.verdict = v;
        record.windows.push_back(w);
    }
}

RunRecord run_realtime(const ScenarioMode& mode, std::span<const CanFrame> frames, const ReplayConfig& replay_cfg,
                       const DetectorConfig& det, const ScenarioOptions& options) {
    RunRecord record = make_record(mode, replay_cfg, det, options);
    const std::size_t w = det.window_size;

    VirtualBus bus;
    auto sub = bus.subscribe(options.buffer_capacity);
    auto backend = make_backend(mode.architecture, det, mode.queue_capacity, options);

    SteadyClock clock;
    ReplayReport report;
    std::exception_ptr replay_error;
    std::thread producer([&] {
        try {
            report = replay(replay_cfg, frames, bus, clock);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::BusClosed) replay_error = std::current_exception();
        } catch (...) {
            replay_error = std::current_exception();
        }
        bus.close();
    });

    std::map<std::uint64_t, CollectStamps> stamps;
    FrameBatch current;
    current.frames.reserve(w);
    std::int64_t batch_start = 0;
    try {
        while (true) {
            std::optional<CanFrame> frame;
            try {
                frame = sub->next_frame(options.poll_interval);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::BusClosed) break;
                throw;
            }
            if (!frame) continue;
            const std::int64_t now = clock.now_ns();
            if (current.frames.empty()) batch_start = now;
            current.frames.push_back(*frame);
            if (current.frames.size() == w) {
                current.window_index = record.batches_collected++;
                current.first_collect_ns = static_cast<std::uint64_t>(batch_start);
                current.last_collect_ns = static_cast<std::uint64_t>(now);
                stamps[current.window_index] = {batch_start, now};
                backend->submit(std::move(current));
                current = FrameBatch{};
                current.frames.reserve(w);
            }
        }
    } catch (...) {
        bus.close();
        producer.join();
        throw;
    }
    producer.join();
    if (replay_error) std::rethrow_exception(replay_error);

    record.leftover_frames = current.frames.size();
    merge_windows(record, stamps, backend->finish(), nullptr, {});
    record.queue_dropped = backend->queue_dropped();
    record.workers_spawned = backend->workers_spawned();
    record.workers_unreaped = backend->workers_unreaped();
    record.bus = bus.stats();
    record.replay = std::move(report);
    record.send_times_ns = chunk_send_times(record.replay, w);
    return record;
}

RunRecord run_simulated(const ScenarioMode& mode, std::span<const CanFrame> frames, const ReplayConfig& replay_cfg,
                        const DetectorConfig& det, const ScenarioOptions& options) {
    RunRecord record = make_record(mode, replay_cfg, det, options);
    const std::size_t w = det.window_size;
    const std::int64_t eval_cost = det.eval_padding.count();

    // The transports do the real detection work but take no virtual time and
    // never drop: loss and queueing are decided by the virtual model below.
    DetectorConfig transport_cfg = det;
    transport_cfg.eval_padding = std::chrono::nanoseconds(0);
    auto backend = make_backend(mode.architecture, transport_cfg, std::nullopt, options);

    VirtualBus bus;
    auto sub = bus.subscribe(options.buffer_capacity);
    Replayer replayer(frames, replay_cfg.rate_msgs_per_sec, 0);

    std::map<std::uint64_t, CollectStamps> stamps;
    std::map<std::uint64_t, std::int64_t> eval_end;

    // single-server FIFO in virtual time (TwoThreads / TwoProcesses)
    std::deque<FrameBatch> waiting;
    std::int64_t server_free_ns = 0;
    auto start_service = [&](std::int64_t until_ns) {
        while (!waiting.empty()) {
            const auto& head = waiting.front();
            const std::int64_t start =
                std::max(server_free_ns, stamps.at(head.window_index).end_ns);
            if (start > until_ns) break;
            server_free_ns = start + eval_cost;
            eval_end[head.window_index] = server_free_ns;
            backend->submit(std::move(waiting.front()));
            waiting.pop_front();
        }
    };

    std::int64_t now = 0;
    std::int64_t batch_start = 0;
    FrameBatch current;
    current.frames.reserve(w);
    while (true) {
        auto frame = sub->try_next_frame();
        if (!frame) {
            if (replayer.done()) break;
            now = std::max(now, replayer.next_due_ns());
            replayer.publish_due(bus, now);
            continue;
        }
        if (current.frames.empty()) batch_start = now;
        current.frames.push_back(*frame);
        if (current.frames.size() < w) continue;

        const std::uint64_t t = record.batches_collected++;
        current.window_index = t;
        current.first_collect_ns = static_cast<std::uint64_t>(batch_start);
        current.last_collect_ns = static_cast<std::uint64_t>(now);
        stamps[t] = {batch_start, now};

        switch (mode.architecture) {
            case Architecture::Inline:
                backend->submit(std::move(current));
                // the monitor is busy: whatever is sent meanwhile hits the buffer
                now += eval_cost;
                eval_end[t] = now;
                replayer.publish_due(bus, now);
                break;
            case Architecture::WorkerPerBatch:
                eval_end[t] = now + eval_cost;
                backend->submit(std::move(current));
                break;
            case Architecture::TwoThreads:
            case Architecture::TwoProcesses:
                start_service(now);
                waiting.push_back(std::move(current));
                if (mode.queue_capacity && waiting.size() > *mode.queue_capacity) {
                    waiting.pop_front();
                    ++record.queue_dropped;
                }
                start_service(now);
                break;
        }
        current = FrameBatch{};
        current.frames.reserve(w);
    }
    start_service(std::numeric_limits<std::int64_t>::max());
    bus.close();

    record.leftover_frames = current.frames.size();
    merge_windows(record, stamps, backend->finish(), &eval_end, det.eval_padding);
    record.workers_spawned = backend->workers_spawned();
    record.workers_unreaped = backend->workers_unreaped();
    record.bus = bus.stats();
    record.replay = replayer.report(frames.empty() ? 0 : replayer.end_ns());
    record.send_times_ns = chunk_send_times(record.replay, w);
    return record;
}

}  // namespace

RunRecord run_scenario(const ScenarioMode& mode, std::span<const CanFrame> frames, const ReplayConfig& replay,
                       const DetectorConfig& detector, const ScenarioOptions& options) {
    validate(mode, replay, detector, options);
    if (replay.clock == ClockKind::Simulated) return run_simulated(mode, frames, replay, detector, options);
    return run_realtime(mode, frames, replay, detector, options);
}

RunRecord run_scenario(const ScenarioMode& mode, const ReplayConfig& replay, const DetectorConfig& detector,
                       const ScenarioOptions& options) {
    validate(mode, replay, detector, options);
    const auto frames = load_frames(replay);
    return run_scenario(mode, frames, replay, detector, options);
}

}  // namespace canids
