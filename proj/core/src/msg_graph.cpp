#include "canids/msg_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

namespace canids {

namespace {

constexpr std::uint64_t pack(NodeId from, NodeId to) noexcept {
    return (static_cast<std::uint64_t>(from) << 32) | to;
}

bool edge_less(const Edge& a, const Edge& b) noexcept {
    return pack(a.from, a.to) < pack(b.from, b.to);
}

std::string node_hex(NodeId n) {
    const bool extended = (n >> 31) != 0;
    char buf[16];
    std::snprintf(buf, sizeof buf, extended ? "%08X" : "%03X", n & ~(1u << 31));
    return buf;
}

}  // namespace

MessagesSequenceGraph MessagesSequenceGraph::from_edges(std::vector<Edge> edges, std::uint64_t window_index) {
    std::erase_if(edges, [](const Edge& e) { return e.count == 0; });
    std::sort(edges.begin(), edges.end(), edge_less);
    // merge duplicate keys
    std::vector<Edge> merged;
    merged.reserve(edges.size());
    for (const auto& e : edges) {
        if (!merged.empty() && merged.back().from == e.from && merged.back().to == e.to)
            merged.back().count += e.count;
        else
            merged.push_back(e);
    }

    MessagesSequenceGraph g;
    g.window_index_ = window_index;
    g.edges_ = std::move(merged);
    for (const auto& e : g.edges_) {
        g.nodes_.push_back(e.from);
        g.nodes_.push_back(e.to);
    }
    std::sort(g.nodes_.begin(), g.nodes_.end());
    g.nodes_.erase(std::unique(g.nodes_.begin(), g.nodes_.end()), g.nodes_.end());
    return g;
}

std::uint64_t MessagesSequenceGraph::count(NodeId from, NodeId to) const noexcept {
    const Edge key{from, to, 0};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), key, edge_less);
    return (it != edges_.end() && it->from == from && it->to == to) ? it->count : 0;
}

std::uint64_t MessagesSequenceGraph::total_count() const noexcept {
    return std::accumulate(edges_.begin(), edges_.end(), std::uint64_t{0},
                           [](std::uint64_t acc, const Edge& e) { return acc + e.count; });
}

MessagesSequenceGraph MessagesSequenceGraph::scaled(std::uint64_t factor) const {
    MessagesSequenceGraph g = *this;
    for (auto& e : g.edges_) e.count *= factor;
    if (factor == 0) {
        g.edges_.clear();
        g.nodes_.clear();
    }
    return g;
}

void MessagesSequenceGraph::write_edge_list(std::ostream& out) const {
    for (const auto& e : edges_) out << node_hex(e.from) << ' ' << node_hex(e.to) << ' ' << e.count << '\n';
}

MessagesSequenceGraph build_msg(const FrameBatch& batch, std::optional<NodeId> carry_from) {
    if (batch.frames.size() < 2)
        throw Error(ErrorCode::BatchTooSmall, "need at least 2 frames, got " + std::to_string(batch.frames.size()));

    std::unordered_map<std::uint64_t, std::uint64_t> counts;
    counts.reserve(batch.frames.size());
    if (carry_from) ++counts[pack(*carry_from, node_of(batch.frames.front()))];
    for (std::size_t k = 0; k + 1 < batch.frames.size(); ++k)
        ++counts[pack(node_of(batch.frames[k]), node_of(batch.frames[k + 1]))];

    std::vector<Edge> edges;
    edges.reserve(counts.size());
    for (const auto& [key, n] : counts)
        edges.push_back({static_cast<NodeId>(key >> 32), static_cast<NodeId>(key & 0xFFFFFFFFu), n});
    return MessagesSequenceGraph::from_edges(std::move(edges), batch.window_index);
}

double cosine_similarity(const MessagesSequenceGraph& a, const MessagesSequenceGraph& b) {
    if (a.edges().empty() || b.edges().empty()) throw Error(ErrorCode::ZeroVector, "graph has no edges");

    // Both edge lists are sorted by key: walk the union once.
    double dot = 0.0;
    const auto ea = a.edges();
    const auto eb = b.edges();
    std::size_t i = 0, j = 0;
    while (i < ea.size() && j < eb.size()) {
        const auto ka = pack(ea[i].from, ea[i].to);
        const auto kb = pack(eb[j].from, eb[j].to);
        if (ka == kb) {
            dot += static_cast<double>(ea[i].count) * static_cast<double>(eb[j].count);
            ++i;
            ++j;
        } else if (ka < kb) {
            ++i;
        } else {
            ++j;
        }
    }

    auto norm = [](std::span<const Edge> edges) {
        double sq = 0.0;
        for (const auto& e : edges) sq += static_cast<double>(e.count) * static_cast<double>(e.count);
        return std::sqrt(sq);
    };
    const double denom = norm(ea) * norm(eb);
    return std::clamp(dot / denom, 0.0, 1.0);
}

}  // namespace canids
