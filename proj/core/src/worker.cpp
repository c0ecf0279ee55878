#include "canids/worker.hpp"

#include <array>
#include <cstdio>
#include <iostream>

#include "process.hpp"

namespace canids {

std::vector<std::string> worker_arguments(const WorkerOptions& opts) {
    const auto& d = opts.detector;
    char threshold[32];
    std::snprintf(threshold, sizeof threshold, "%.17g", d.threshold);
    std::vector<std::string> args{
        std::string(kWorkerSubcommand),
        "--window", std::to_string(d.window_size),
        "--threshold", threshold,
        "--warmup", std::string(to_string(d.warmup)),
        "--reference", std::string(to_string(d.reference)),
        "--eval-padding-ns", std::to_string(d.eval_padding.count()),
    };
    if (d.carry_boundary_edge) args.emplace_back("--carry-boundary-edge");
    if (opts.emit_last_only) args.emplace_back("--emit-last");
    return args;
}

int run_worker(const WorkerOptions& opts, int in_fd, int out_fd) {
    try {
        Detector detector(opts.detector);
        std::optional<Verdict> last;
        std::array<std::byte, kBatchHeaderSize> header{};
        std::vector<std::byte> buffer;
        while (detail::read_exact(in_fd, header)) {
            const std::uint32_t count = read_batch_header(header);
            buffer.resize(serialized_size(count));
            std::copy(header.begin(), header.end(), buffer.begin());
            if (!detail::read_exact(in_fd, std::span(buffer).subspan(kBatchHeaderSize)) && count > 0)
                throw Error(ErrorCode::TruncatedPayload, "batch body missing");
            const Verdict v = detector.evaluate(deserialize_batch(buffer));
            if (opts.emit_last_only) {
                last = v;
                continue;
            }
            const std::string line = to_json_line(v) + '\n';
            detail::write_all(out_fd, std::as_bytes(std::span(line)));
        }
        if (last) {
            const std::string line = to_json_line(*last) + '\n';
            detail::write_all(out_fd, std::as_bytes(std::span(line)));
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "_worker: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace canids
