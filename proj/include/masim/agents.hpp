#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "masim/domain.hpp"
#include "masim/jobdist.hpp"
#include "masim/network.hpp"

namespace masim {

enum class AgentPhase {
    Migrating,   // en route, arrives at arrive_at
    Inspecting,  // at a node, about to check state
    Resident,    // executing on a robot until `until`
    Returning,   // heading back to the distributor
    Parked,      // zero-latency sweep found no match; waiting for a change
    Retired,     // returned; kept for bookkeeping
};

/// A migrating token carrying its task program(s). Advanced exclusively by
/// the engine's event loop.
struct MobileAgent {
    AgentId id;
    AgentAssignment assignment;
    std::size_t step_cursor = 0;

    AgentPhase phase = AgentPhase::Inspecting;
    NodeId at;
    NodeId toward;
    Tick arrive_at = 0;
    Tick until = 0;
    Tick exec_began = 0;

    std::optional<NodeId> bound_robot;  // robot booked at first match
    std::optional<JobId> bound_job;     // job binding captured at first match
    VisitHistory history;

    // Zero-hop-latency sweep bookkeeping.
    std::set<NodeId> sweep_seen;
    Tick sweep_tick = -1;

    bool wake_scheduled = false;
    bool recall = false;  // return without executing further steps
    bool failed = false;  // chain can no longer complete
    bool ledger_bound = true;  // false for hand-injected test assignments

    bool done() const { return step_cursor >= assignment.si_chain.size(); }
    const SIStep& current_step() const { return assignment.si_chain.steps()[step_cursor]; }
};

/// An edit to the global task sequence and every robot's transition db.
struct SequenceEdit {
    enum class Op { Insert, Delete, Reorder };
    Op op = Op::Insert;
    std::optional<TaskSpec> task;       // Insert: the new task
    std::optional<TaskId> after;        // Insert: anchor; nullopt = front
    TaskId target;                      // Delete
    std::vector<TaskId> sequence;       // Reorder: replacement order
};

/// Applies an edit to a task sequence in place. An insert whose anchor is
/// missing leaves the sequence unchanged (stale database); deletes of
/// missing tasks are no-ops.
void apply_edit(std::vector<TaskId>& seq, const SequenceEdit& edit);

/// The sequence agent: migrates conscientiously and applies its edit once
/// per robot, then terminates when every robot from its release snapshot
/// has been visited.
struct SequenceAgent {
    AgentId id;
    SequenceEdit edit;
    std::set<NodeId> visited;
    std::set<NodeId> pending_robots;  // snapshot at release
    VisitHistory history;
    NodeId at;
    NodeId toward;
    Tick arrive_at = 0;
    bool terminated = false;
    bool parked = false;

    bool complete() const {
        for (const auto& r : pending_robots) {
            if (!visited.count(r)) return false;
        }
        return true;
    }
};

/// Deterministic per-agent duration streams: the draw sequence depends only
/// on (scenario seed, agent id), never on event interleaving.
class DurationSampler {
public:
    explicit DurationSampler(std::uint64_t scenario_seed) : seed_(scenario_seed) {}

    Tick sample(const AgentId& agent, const DurationModel& d);

private:
    std::uint64_t seed_;
    std::map<AgentId, std::mt19937_64> streams_;
};

}  // namespace masim
