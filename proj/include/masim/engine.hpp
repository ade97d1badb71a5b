#pragma once

#include <deque>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "masim/agents.hpp"
#include "masim/jobdist.hpp"
#include "masim/network.hpp"
#include "masim/robots.hpp"
#include "masim/scenario.hpp"
#include "masim/trace.hpp"

namespace masim {

enum class RunStatus { Completed, IncompleteQuiescent, TMaxReached };

const char* to_string(RunStatus s);

/// A wait chain discovered among resource holders, reported when the run
/// cannot make progress.
struct StallReport {
    std::vector<std::string> chain;
    std::string describe() const;
};

/// Abstract hold/need relation used for stall detection: who holds each
/// resource, and which resources each party still waits for.
struct WaitForGraph {
    std::map<ResourceId, AgentId> holds;
    std::map<AgentId, std::set<ResourceId>> needs;
};

/// Finds a wait-for cycle (hold-and-wait chain). None when every waiter can
/// eventually be satisfied by a non-waiting holder.
std::optional<StallReport> detect_stall(const WaitForGraph& graph);

struct JobOutcome {
    std::size_t tasks_total = 0;
    std::size_t tasks_done = 0;
    bool failed = false;
    Tick completion = -1;  // last task completion, -1 = none

    bool completed() const { return !failed && tasks_done >= tasks_total; }
};

struct RunResult {
    Trace trace;
    RunStatus status = RunStatus::Completed;
    std::map<JobId, JobOutcome> jobs;
    std::optional<StallReport> stall;
    Tick makespan = 0;

    bool all_jobs_completed() const;
};

/// Deterministic discrete-event loop hosting the mobile-agent protocol.
/// Events are processed in (at, seq) order; seq is assigned at scheduling
/// time, so simultaneous events run in scheduling order.
class Engine {
public:
    explicit Engine(const Scenario& scenario);

    RunResult run_to_completion();

    /// Verification mode treats a robot-level resource conflict as a fatal
    /// protocol violation (the ledger should make it impossible). Off, the
    /// agent blocks and retries when a resource frees up.
    void set_verification(bool on) { verification_ = on; }

    /// Injects a hand-built assignment without ledger mediation. Test
    /// harness for protocol-violation scenarios.
    void inject_assignment_raw(const AgentAssignment& assignment, Tick at);

    const std::map<NodeId, RobotNode>& robots() const { return robots_; }
    const std::vector<TaskId>& global_sequence() const { return global_sequence_; }
    const JobDistributor& distributor() const { return jd_; }

private:
    struct Pending {
        Tick at;
        std::uint64_t seq;
        enum class Kind {
            JobArrival,
            Intervention,
            AgentStep,
            AgentReturnArrive,
            SeqAgentStep,
            Wake
        } kind;
        std::string id;     // agent / sequence-agent id
        std::size_t index;  // job or intervention index

        bool operator>(const Pending& other) const {
            if (at != other.at) return at > other.at;
            return seq > other.seq;
        }
    };

    // Scheduling and trace emission share one counter: processing order is
    // total and trace rows stay strictly monotone.
    std::uint64_t next_seq() { return ++seq_counter_; }
    void schedule(Tick at, Pending::Kind kind, std::string id, std::size_t index = 0);
    TraceEvent& emit(EventKind kind);

    void handle(const Pending& p);
    void handle_job_arrival(std::size_t index);
    void handle_intervention(std::size_t index);
    void handle_agent_step(const AgentId& id);
    void handle_agent_return(const AgentId& id);
    void handle_seq_agent_step(const AgentId& id);
    void handle_wake(const AgentId& id);

    void mint_agents(const std::vector<AgentAssignment>& assignments);
    void inspect_or_move(MobileAgent& agent);
    bool matches(const MobileAgent& agent, const RobotNode& robot) const;
    void begin_execution(MobileAgent& agent, RobotNode& robot);
    void finish_execution(MobileAgent& agent);
    void begin_return(MobileAgent& agent);
    void park(MobileAgent& agent);
    void wake_parked();
    void perform_removal(RobotNode& robot);
    void fail_chain(const JobId& job, int chain_index, const AgentId& except);
    void release_sequence_agent(const SequenceEdit& edit);
    void release_floating_carrier(const TaskSpec& task, std::optional<TaskId> hint_next);
    void check_floating_recalls();
    void retry_blocked();

    JobId exec_job_context(const MobileAgent& agent, const RobotNode& robot) const;
    std::set<NodeId> reachable_active_robots(const NodeId& from) const;
    bool quiescent_done() const;
    WaitForGraph build_wait_graph() const;
    void finalize(RunResult& result);

    // --- world ---
    Scenario scenario_;
    Topology topology_;
    std::map<NodeId, RobotNode> robots_;
    JobDistributor jd_;
    std::map<AgentId, MobileAgent> agents_;
    std::map<AgentId, SequenceAgent> seq_agents_;
    std::vector<TaskId> global_sequence_;
    DurationSampler sampler_;
    Trace trace_;

    std::priority_queue<Pending, std::vector<Pending>, std::greater<Pending>> queue_;
    std::uint64_t seq_counter_ = 0;
    Tick now_ = 0;
    bool verification_ = true;

    std::map<JobId, JobOutcome> outcomes_;
    std::map<JobId, JobSpec> job_specs_;
    std::map<JobId, std::map<TaskId, int>> chain_of_task_;
    Tick last_exec_end_ = 0;

    std::size_t active_job_agents_ = 0;
    std::size_t active_seq_agents_ = 0;
    std::size_t pending_arrivals_ = 0;
    std::size_t pending_interventions_ = 0;
    int floating_counter_ = 0;
    int seq_agent_release_counter_ = 0;

    std::vector<AgentId> parked_order_;
    std::vector<AgentId> blocked_;
    std::set<TaskId> recall_tasks_;  // deleted on-the-fly tasks
    std::deque<AgentAssignment> waiting_floating_;
};

/// Runs the scenario under the decentralized mobile-agent protocol.
RunResult run(const Scenario& scenario);

/// Runs the same workload through a single central server that grants each
/// task start and acknowledges each completion, one message at a time.
RunResult run_centralized(const Scenario& scenario);

}  // namespace masim
