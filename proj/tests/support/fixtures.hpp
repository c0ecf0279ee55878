#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "canids/can_frame.hpp"

namespace fixtures {

inline canids::CanFrame random_frame(std::mt19937_64& rng) {
    const bool extended = rng() % 2 == 0;
    const canids::CanId id =
        static_cast<canids::CanId>(rng() % (extended ? canids::kExtendedIdLimit : canids::kStandardIdLimit));
    const auto dlc = static_cast<std::uint8_t>(rng() % 9);
    std::vector<std::uint8_t> payload(dlc);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    const std::uint64_t ts = (rng() % 4'000'000'000ULL) * 1000;  // whole microseconds
    return canids::CanFrame::make(id, payload, ts, extended);
}

inline std::vector<canids::CanFrame> frames_from_ids(const std::vector<canids::CanId>& ids) {
    std::vector<canids::CanFrame> out;
    std::uint64_t ts = 0;
    for (auto id : ids) out.push_back(canids::CanFrame::make(id, {}, ts += 1000));
    return out;
}

inline canids::FrameBatch batch_of(const std::vector<canids::CanId>& ids, std::uint64_t index = 0) {
    canids::FrameBatch b;
    b.frames = frames_from_ids(ids);
    b.window_index = index;
    return b;
}

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    TempDir() {
        auto base = std::filesystem::temp_directory_path() /
                    ("canids-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
        std::filesystem::create_directories(base);
        path_ = base;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::filesystem::path path_;
};

}  // namespace fixtures
