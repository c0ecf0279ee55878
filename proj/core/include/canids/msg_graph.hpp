#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "canids/can_frame.hpp"

namespace canids {

// Graph node identity: the CAN id with bit 31 set for extended frames, so a
// standard 0x123 and an extended 0x123 are different nodes.
using NodeId = std::uint32_t;

constexpr NodeId node_of(const CanFrame& f) noexcept {
    return f.can_id | (f.extended ? (1u << 31) : 0u);
}

struct Edge {
    NodeId from = 0;
    NodeId to = 0;
    std::uint64_t count = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

// Messages-sequence graph of one window: how often id `to` immediately
// follows id `from`. Edges are kept sorted by (from, to) with no zero counts.
class MessagesSequenceGraph {
public:
    MessagesSequenceGraph() = default;

    /// Builds from explicit edge counts (zero counts are discarded).
    static MessagesSequenceGraph from_edges(std::vector<Edge> edges, std::uint64_t window_index = 0);

    std::uint64_t window_index() const noexcept { return window_index_; }
    std::span<const Edge> edges() const noexcept { return edges_; }
    std::span<const NodeId> nodes() const noexcept { return nodes_; }

    /// E(from, to); absent edges count zero.
    std::uint64_t count(NodeId from, NodeId to) const noexcept;
    std::uint64_t total_count() const noexcept;

    MessagesSequenceGraph scaled(std::uint64_t factor) const;

    /// One "SRCHEX DSTHEX COUNT" line per edge.
    void write_edge_list(std::ostream& out) const;

    friend bool operator==(const MessagesSequenceGraph&, const MessagesSequenceGraph&) = default;

private:
    std::uint64_t window_index_ = 0;
    std::vector<Edge> edges_;
    std::vector<NodeId> nodes_;
};

/// Counts consecutive-id transitions inside the batch. With `carry_from`, an
/// extra edge from that node to the batch's first frame is added (boundary
/// transition from the previous window).
MessagesSequenceGraph build_msg(const FrameBatch& batch, std::optional<NodeId> carry_from = std::nullopt);

/// Cosine of the two edge-count vectors aligned over the union of their edge
/// keys. Result is in [0, 1]; throws ZeroVector if either graph has no edges.
double cosine_similarity(const MessagesSequenceGraph& a, const MessagesSequenceGraph& b);

}  // namespace canids
