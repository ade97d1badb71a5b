#pragma once

#include <deque>
#include <map>
#include <set>
#include <vector>

#include "masim/domain.hpp"

namespace masim {

/// The unit of work given to one mobile agent: an ordered task group, its
/// program (SI chain) and the union of the group's resource needs.
struct AgentAssignment {
    AgentId agent_id;
    JobId job_id;
    int chain_index = 0;
    SIChain si_chain;
    std::set<ResourceId> resource_claim;
    /// Set for on-the-fly task carriers that serve every job.
    bool floating = false;

    bool operator==(const AgentAssignment&) const = default;
};

/// One merged chain of a job, decomposed into agent assignments. Assignments
/// dispatch in order: the head dispatches when its claim is free, then the
/// cursor advances.
struct ChainPlan {
    JobId job_id;
    int chain_index = 0;
    std::vector<TaskSpec> tasks;  // merged chain, execution order
    std::vector<AgentAssignment> assignments;
    std::size_t cursor = 0;

    bool done() const { return cursor >= assignments.size(); }
};

/// Merges a job's chains whose resource sets intersect (transitively).
/// Merged chains keep within-chain order and concatenate by chain index.
/// The result is pairwise resource-disjoint.
std::vector<std::vector<TaskSpec>> merge_chains(const JobSpec& job);

/// Partitions a job per the distributor's assignment rules: tasks whose
/// resource sets intersect (transitively, within a merged chain) form one
/// group carried by a single agent; disjoint tasks get one agent each.
std::vector<ChainPlan> partition_job(const JobSpec& job);

/// The Job Distributor: accepts jobs, partitions them, tracks which
/// resources are bound to in-flight agents and dispatches assignments as
/// resources free up. All mutations happen inside engine events.
class JobDistributor {
public:
    explicit JobDistributor(NodeId node_id) : node_id_(std::move(node_id)) {}

    const NodeId& node_id() const { return node_id_; }

    /// Enqueues the job's chain plans. Call try_dispatch afterwards.
    JobId submit_job(const JobSpec& job, Tick now);

    /// Scans pending chains in arrival order and dispatches every head
    /// assignment whose full claim is unbound, repeating until a pass makes
    /// no progress. A blocked chain does not block later chains.
    std::vector<AgentAssignment> try_dispatch(Tick now);

    /// Unbinds the returning agent's claim and dispatches whatever the
    /// freed resources enable.
    std::vector<AgentAssignment> on_agent_return(const AgentId& agent, Tick now);

    /// Binds a claim outside the pending-queue flow (on-the-fly task
    /// carriers). Returns false when some resource is already bound.
    bool bind_direct(const AgentAssignment& assignment);

    /// Drops the undispatched remainder of a chain (robot lost mid-chain).
    void abandon_chain(const JobId& job, int chain_index);

    const std::map<ResourceId, AgentId>& bound() const { return bound_; }
    bool pending_empty() const;
    std::size_t pending_chain_count() const;
    /// Resources claimed by pending head assignments, for stall reporting.
    std::map<AgentId, std::set<ResourceId>> pending_head_claims() const;

private:
    void bind_claim(const AgentAssignment& a);
    void check_exclusivity() const;

    NodeId node_id_;
    std::map<ResourceId, AgentId> bound_;
    std::deque<ChainPlan> pending_;
    std::map<AgentId, std::set<ResourceId>> in_flight_;
    std::set<JobId> seen_jobs_;
};

}  // namespace masim
