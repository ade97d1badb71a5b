#include "masim/network.hpp"

#include <deque>

namespace masim {

void Topology::add_node(const NodeId& id, NodeKind kind) {
    if (id.empty()) {
        throw ValidationError("Topology: node id must be non-empty");
    }
    if (nodes_.count(id)) {
        throw ValidationError("Topology: duplicate node id " + id);
    }
    nodes_.emplace(id, kind);
    adj_.emplace(id, std::set<NodeId>{});
}

bool Topology::has_node(const NodeId& id) const { return nodes_.count(id) > 0; }

NodeKind Topology::kind_of(const NodeId& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw ValidationError("Topology: unknown node " + id);
    }
    return it->second;
}

void Topology::connect(const NodeId& a, const NodeId& b) {
    if (!has_node(a)) throw ValidationError("Topology: connect references unknown node " + a);
    if (!has_node(b)) throw ValidationError("Topology: connect references unknown node " + b);
    if (a == b) throw ValidationError("Topology: self-loop on node " + a);
    adj_[a].insert(b);
    adj_[b].insert(a);
}

void Topology::disconnect(const NodeId& a, const NodeId& b) {
    auto ia = adj_.find(a);
    if (ia != adj_.end()) ia->second.erase(b);
    auto ib = adj_.find(b);
    if (ib != adj_.end()) ib->second.erase(a);
}

const std::set<NodeId>& Topology::neighbors(const NodeId& n) const {
    auto it = adj_.find(n);
    if (it == adj_.end()) {
        throw ValidationError("Topology: unknown node " + n);
    }
    return it->second;
}

std::set<NodeId> Topology::reachable_from(const NodeId& start) const {
    std::set<NodeId> seen;
    if (!has_node(start)) return seen;
    std::deque<NodeId> frontier{start};
    seen.insert(start);
    while (!frontier.empty()) {
        NodeId n = frontier.front();
        frontier.pop_front();
        for (const auto& m : neighbors(n)) {
            if (seen.insert(m).second) frontier.push_back(m);
        }
    }
    return seen;
}

void VisitHistory::record(const NodeId& n, Tick at) {
    auto it = last_.find(n);
    if (it != last_.end()) {
        // Visits move forward in time.
        if (at < it->second) {
            throw ProtocolError("VisitHistory: visit time for " + n + " went backwards");
        }
        it->second = at;
        return;
    }
    if (capacity_ > 0 && last_.size() >= capacity_) {
        // Evict the oldest entry; it would be the next conscientious pick
        // anyway, so forgetting it is harmless.
        auto oldest = last_.begin();
        for (auto j = last_.begin(); j != last_.end(); ++j) {
            if (j->second < oldest->second) oldest = j;
        }
        last_.erase(oldest);
    }
    last_.emplace(n, at);
}

std::optional<Tick> VisitHistory::last_visit(const NodeId& n) const {
    auto it = last_.find(n);
    if (it == last_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeId> next_hop_conscientious(const Topology& topology, VisitHistory& history,
                                             const NodeId& at, Tick now) {
    const auto& nbrs = topology.neighbors(at);
    if (nbrs.empty()) return std::nullopt;

    const NodeId* best = nullptr;
    bool best_visited = true;
    Tick best_time = 0;
    for (const auto& n : nbrs) {  // std::set iteration: ascending id = tie-break
        auto t = history.last_visit(n);
        if (!t.has_value()) {
            if (best == nullptr || best_visited) {
                best = &n;
                best_visited = false;
            }
        } else if (best == nullptr || (best_visited && *t < best_time)) {
            best = &n;
            best_visited = true;
            best_time = *t;
        }
    }
    history.record(*best, now + topology.hop_latency);
    return *best;
}

}  // namespace masim
