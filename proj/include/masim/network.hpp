#pragma once

#include <map>
#include <optional>
#include <set>

#include "masim/domain.hpp"

namespace masim {

/// Dynamic node graph. Edges are undirected; the graph may be temporarily
/// disconnected. Mutations are serialized through the engine's event loop.
struct Topology {
    Tick hop_latency = 1;

    void add_node(const NodeId& id, NodeKind kind);
    bool has_node(const NodeId& id) const;
    NodeKind kind_of(const NodeId& id) const;

    void connect(const NodeId& a, const NodeId& b);
    void disconnect(const NodeId& a, const NodeId& b);
    const std::set<NodeId>& neighbors(const NodeId& n) const;

    /// All nodes reachable from `start` (including it), by BFS.
    std::set<NodeId> reachable_from(const NodeId& start) const;

    const std::map<NodeId, NodeKind>& nodes() const { return nodes_; }

    bool operator==(const Topology&) const = default;

private:
    std::map<NodeId, NodeKind> nodes_;
    std::map<NodeId, std::set<NodeId>> adj_;
};

/// Per-agent record of when each node was last visited. Never-visited nodes
/// rank before any visited one.
class VisitHistory {
public:
    VisitHistory() = default;
    explicit VisitHistory(std::size_t capacity) : capacity_(capacity) {}

    void record(const NodeId& n, Tick at);
    std::optional<Tick> last_visit(const NodeId& n) const;
    std::size_t size() const { return last_.size(); }

private:
    std::map<NodeId, Tick> last_;
    std::size_t capacity_ = 0;  // 0 = unbounded
};

/// Conscientious migration: pick the neighbor with the oldest last-visit
/// time (never-visited first), ties broken by smallest node id. Updates the
/// history with the chosen node's arrival time. Returns nullopt when `at`
/// has no neighbors (caller waits one tick and retries).
std::optional<NodeId> next_hop_conscientious(const Topology& topology, VisitHistory& history,
                                             const NodeId& at, Tick now);

}  // namespace masim
