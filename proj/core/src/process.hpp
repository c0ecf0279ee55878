#pragma once

// POSIX plumbing for the multi-process architectures: owned descriptors,
// pipes, spawning and reaping child processes.

#include <sys/types.h>

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace canids::detail {

class FileDescriptor {
public:
    FileDescriptor() = default;
    explicit FileDescriptor(int fd) noexcept : fd_(fd) {}
    ~FileDescriptor() { reset(); }

    FileDescriptor(FileDescriptor&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
    FileDescriptor& operator=(FileDescriptor&& other) noexcept {
        if (this != &other) {
            reset();
            fd_ = std::exchange(other.fd_, -1);
        }
        return *this;
    }
    FileDescriptor(const FileDescriptor&) = delete;
    FileDescriptor& operator=(const FileDescriptor&) = delete;

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    void reset() noexcept;

private:
    int fd_ = -1;
};

struct Pipe {
    FileDescriptor read;
    FileDescriptor write;
};

/// pipe2(O_CLOEXEC); throws ChannelBroken on failure.
Pipe make_pipe();

/// Writes everything; throws ChannelBroken if the reader is gone.
void write_all(int fd, std::span<const std::byte> bytes);

/// Reads exactly `out.size()` bytes. Returns false on EOF before the first
/// byte; throws TruncatedPayload on EOF part-way.
bool read_exact(int fd, std::span<std::byte> out);

/// Spawns argv[0] with the given descriptors as the child's stdin/stdout.
/// Every other descriptor is expected to be close-on-exec.
pid_t spawn_process(const std::vector<std::string>& argv, int child_stdin, int child_stdout);

/// Non-blocking reap; true once the child has been collected.
bool try_reap(pid_t pid, int* exit_status = nullptr);

/// Reaps, waiting at most `timeout`. Returns the exit status if collected.
std::optional<int> reap_with_timeout(pid_t pid, std::chrono::milliseconds timeout);

// Buffered newline splitter over a descriptor.
class LineReader {
public:
    explicit LineReader(int fd) : fd_(fd) {}

    /// Next line without the terminator; nullopt at EOF. If `timeout` is set
    /// and no data arrives in time, returns nullopt with timed_out() true.
    std::optional<std::string> next(std::optional<std::chrono::milliseconds> timeout = std::nullopt);
    bool timed_out() const noexcept { return timed_out_; }

private:
    int fd_;
    std::string buffer_;
    bool eof_ = false;
    bool timed_out_ = false;
};

/// SIGPIPE would kill the monitor when a child exits early; EPIPE is
/// handled as ChannelBroken instead.
void ignore_sigpipe();

}  // namespace canids::detail
