#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "canids/detector.hpp"

namespace canids {

// Child side of the multi-process architectures. The executable is invoked
// as `<exe> _worker <args>`; it reads "CANB" batches from stdin until EOF and
// writes one JSON verdict line per batch to stdout (or only the verdict of
// the last batch with --emit-last).
inline constexpr std::string_view kWorkerSubcommand = "_worker";

struct WorkerOptions {
    DetectorConfig detector;
    bool emit_last_only = false;
};

/// Flags understood by the `_worker` subcommand:
///   --window N --threshold T --warmup {report-normal|report-unknown}
///   --reference {previous|last-normal} --eval-padding-ns N
///   [--carry-boundary-edge] [--emit-last]
std::vector<std::string> worker_arguments(const WorkerOptions& opts);

/// Runs the worker loop on the given descriptors; returns a process exit code.
int run_worker(const WorkerOptions& opts, int in_fd, int out_fd);

}  // namespace canids
