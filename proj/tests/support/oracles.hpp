#pragma once

// Reference computations written without the library's algorithms, used to
// check its results.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "canids/can_frame.hpp"
#include "canids/msg_graph.hpp"

namespace oracle {

using Key = std::pair<std::uint32_t, std::uint32_t>;
using EdgeMap = std::map<Key, std::uint64_t>;

// Transition counts by a direct pairwise scan over node ids.
inline EdgeMap transitions(std::span<const std::uint32_t> ids) {
    EdgeMap m;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) ++m[{ids[i], ids[i + 1]}];
    return m;
}

inline EdgeMap transitions(std::span<const canids::CanFrame> frames) {
    std::vector<std::uint32_t> ids;
    for (const auto& f : frames) ids.push_back(f.can_id | (f.extended ? 0x80000000u : 0u));
    return transitions(ids);
}

inline EdgeMap to_map(const canids::MessagesSequenceGraph& g) {
    EdgeMap m;
    for (const auto& e : g.edges()) m[{e.from, e.to}] += e.count;
    return m;
}

// Dot product over the explicit union of edge keys.
inline double cosine(const EdgeMap& a, const EdgeMap& b) {
    std::set<Key> keys;
    for (const auto& [k, _] : a) keys.insert(k);
    for (const auto& [k, _] : b) keys.insert(k);
    long double dot = 0, na = 0, nb = 0;
    for (const auto& k : keys) {
        const auto ia = a.find(k);
        const auto ib = b.find(k);
        const long double x = ia == a.end() ? 0.0L : static_cast<long double>(ia->second);
        const long double y = ib == b.end() ? 0.0L : static_cast<long double>(ib->second);
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    return static_cast<double>(dot / (std::sqrt(na) * std::sqrt(nb)));
}

// Nearest-rank percentile by counting: the smallest sample v such that at
// least p% of the samples are <= v.
inline double percentile(std::span<const double> values, double p) {
    std::vector<double> candidates(values.begin(), values.end());
    std::sort(candidates.begin(), candidates.end());
    const double n = static_cast<double>(values.size());
    for (double v : candidates) {
        const auto at_or_below = std::count_if(values.begin(), values.end(), [&](double x) { return x <= v; });
        if (static_cast<double>(at_or_below) * 100.0 >= p * n) return v;
    }
    return candidates.back();
}

// Discrete-event model of one bounded FIFO fed at a fixed period while the
// reader is blocked for `blocked_ns` from t = 0, then drains instantly.
// Returns the number of frames dropped.
inline std::uint64_t blocked_reader_drops(std::uint64_t frames, std::int64_t period_ns, std::int64_t blocked_ns,
                                          std::size_t capacity) {
    std::uint64_t dropped = 0;
    std::size_t buffered = 0;
    for (std::uint64_t k = 0; k < frames; ++k) {
        const std::int64_t t = static_cast<std::int64_t>(k) * period_ns;
        if (t >= blocked_ns) buffered = 0;  // reader awake: it keeps up
        if (buffered == capacity)
            ++dropped;
        else
            ++buffered;
    }
    return dropped;
}

}  // namespace oracle
