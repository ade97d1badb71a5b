#include "masim/jobdist.hpp"

#include <algorithm>
#include <numeric>

namespace masim {

namespace {

bool intersects(const std::set<ResourceId>& a, const std::set<ResourceId>& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia == *ib) return true;
        if (*ia < *ib) {
            ++ia;
        } else {
            ++ib;
        }
    }
    return false;
}

struct UnionFind {
    explicit UnionFind(std::size_t n) : parent(n) {
        std::iota(parent.begin(), parent.end(), std::size_t{0});
    }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
    std::vector<std::size_t> parent;
};

std::set<ResourceId> chain_resources(const std::vector<TaskSpec>& chain) {
    std::set<ResourceId> out;
    for (const auto& t : chain) out.insert(t.resource_ids.begin(), t.resource_ids.end());
    return out;
}

}  // namespace

std::vector<std::vector<TaskSpec>> merge_chains(const JobSpec& job) {
    const auto& chains = job.chains;
    UnionFind uf(chains.size());
    std::vector<std::set<ResourceId>> res(chains.size());
    for (std::size_t i = 0; i < chains.size(); ++i) res[i] = chain_resources(chains[i]);
    for (std::size_t i = 0; i < chains.size(); ++i) {
        for (std::size_t j = i + 1; j < chains.size(); ++j) {
            if (intersects(res[i], res[j])) uf.unite(i, j);
        }
    }
    // Concatenate members of each merge group by chain index; groups keep
    // the order of their lowest-index member.
    std::vector<std::vector<TaskSpec>> merged;
    std::vector<bool> emitted(chains.size(), false);
    for (std::size_t i = 0; i < chains.size(); ++i) {
        if (emitted[i]) continue;
        std::size_t root = uf.find(i);
        std::vector<TaskSpec> out;
        for (std::size_t j = i; j < chains.size(); ++j) {
            if (uf.find(j) == root) {
                out.insert(out.end(), chains[j].begin(), chains[j].end());
                emitted[j] = true;
            }
        }
        merged.push_back(std::move(out));
    }
    return merged;
}

std::vector<ChainPlan> partition_job(const JobSpec& job) {
    std::vector<ChainPlan> plans;
    auto merged = merge_chains(job);
    for (std::size_t ci = 0; ci < merged.size(); ++ci) {
        const auto& tasks = merged[ci];
        ChainPlan plan;
        plan.job_id = job.job_id;
        plan.chain_index = static_cast<int>(ci);
        plan.tasks = tasks;

        // Robot state after completing task k of this chain.
        auto state_after = [&](std::size_t k) {
            if (k + 1 >= tasks.size()) return StateId::free_state();
            return StateId::task_state(job.job_id, tasks[k + 1].task_id);
        };
        auto state_before = [&](std::size_t k) {
            if (k == 0) return StateId::free_state();
            return StateId::task_state(job.job_id, tasks[k].task_id);
        };

        // Group tasks whose resource sets intersect, transitively.
        UnionFind uf(tasks.size());
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            for (std::size_t j = i + 1; j < tasks.size(); ++j) {
                if (intersects(tasks[i].resource_ids, tasks[j].resource_ids)) uf.unite(i, j);
            }
        }
        std::vector<bool> used(tasks.size(), false);
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (used[i]) continue;
            std::size_t root = uf.find(i);
            std::vector<SIStep> steps;
            std::set<ResourceId> claim;
            for (std::size_t j = i; j < tasks.size(); ++j) {
                if (uf.find(j) != root) continue;
                used[j] = true;
                steps.push_back(SIStep{state_before(j), tasks[j], state_after(j)});
                claim.insert(tasks[j].resource_ids.begin(), tasks[j].resource_ids.end());
            }
            AgentAssignment a;
            a.agent_id = "mu:" + job.job_id + ":" + tasks[i].task_id;
            a.job_id = job.job_id;
            a.chain_index = plan.chain_index;
            a.si_chain = SIChain(std::move(steps));
            a.resource_claim = std::move(claim);
            plan.assignments.push_back(std::move(a));
        }
        plans.push_back(std::move(plan));
    }
    return plans;
}

JobId JobDistributor::submit_job(const JobSpec& job, Tick) {
    if (!seen_jobs_.insert(job.job_id).second) {
        throw ValidationError("JobDistributor: duplicate job_id " + job.job_id);
    }
    for (auto& plan : partition_job(job)) pending_.push_back(std::move(plan));
    return job.job_id;
}

std::vector<AgentAssignment> JobDistributor::try_dispatch(Tick) {
    std::vector<AgentAssignment> released;
    bool progress = true;
    while (progress) {
        progress = false;
        for (auto& plan : pending_) {
            while (!plan.done()) {
                const auto& head = plan.assignments[plan.cursor];
                bool free = std::none_of(
                    head.resource_claim.begin(), head.resource_claim.end(),
                    [&](const ResourceId& r) { return bound_.count(r) > 0; });
                if (!free) break;
                bind_claim(head);
                released.push_back(head);
                ++plan.cursor;
                progress = true;
            }
        }
        // Drop finished plans, keeping arrival order for the rest.
        while (!pending_.empty() && pending_.front().done()) pending_.pop_front();
        std::erase_if(pending_, [](const ChainPlan& p) { return p.done(); });
    }
    return released;
}

std::vector<AgentAssignment> JobDistributor::on_agent_return(const AgentId& agent, Tick now) {
    auto it = in_flight_.find(agent);
    if (it == in_flight_.end()) {
        throw ProtocolError("JobDistributor: return from unknown agent " + agent);
    }
    for (const auto& r : it->second) {
        auto b = bound_.find(r);
        if (b == bound_.end() || b->second != agent) {
            throw ProtocolError("JobDistributor: ledger out of sync for " + r);
        }
        bound_.erase(b);
    }
    in_flight_.erase(it);
    check_exclusivity();
    return try_dispatch(now);
}

bool JobDistributor::bind_direct(const AgentAssignment& assignment) {
    for (const auto& r : assignment.resource_claim) {
        if (bound_.count(r)) return false;
    }
    bind_claim(assignment);
    return true;
}

void JobDistributor::abandon_chain(const JobId& job, int chain_index) {
    std::erase_if(pending_, [&](const ChainPlan& p) {
        return p.job_id == job && p.chain_index == chain_index;
    });
}

void JobDistributor::bind_claim(const AgentAssignment& a) {
    for (const auto& r : a.resource_claim) {
        auto [it, inserted] = bound_.emplace(r, a.agent_id);
        if (!inserted) {
            throw ProtocolError("JobDistributor: resource " + r + " already bound to " +
                                it->second);
        }
    }
    in_flight_[a.agent_id] = a.resource_claim;
    check_exclusivity();
}

void JobDistributor::check_exclusivity() const {
    // bound_ maps each resource to exactly one agent by construction; verify
    // the reverse index agrees.
    std::size_t total = 0;
    for (const auto& [agent, claim] : in_flight_) {
        for (const auto& r : claim) {
            auto it = bound_.find(r);
            if (it == bound_.end() || it->second != agent) {
                throw ProtocolError("JobDistributor: ledger exclusivity broken at " + r);
            }
        }
        total += claim.size();
    }
    if (total != bound_.size()) {
        throw ProtocolError("JobDistributor: ledger bookkeeping mismatch");
    }
}

bool JobDistributor::pending_empty() const { return pending_.empty(); }

std::size_t JobDistributor::pending_chain_count() const { return pending_.size(); }

std::map<AgentId, std::set<ResourceId>> JobDistributor::pending_head_claims() const {
    std::map<AgentId, std::set<ResourceId>> out;
    for (const auto& plan : pending_) {
        if (!plan.done()) {
            const auto& head = plan.assignments[plan.cursor];
            out[head.agent_id] = head.resource_claim;
        }
    }
    return out;
}

}  // namespace masim
