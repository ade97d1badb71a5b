#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace masim {

/// Logical time in ticks. All schedules are integer arithmetic.
using Tick = std::int64_t;

using NodeId = std::string;
using ResourceId = std::string;
using TaskId = std::string;
using JobId = std::string;
using AgentId = std::string;

/// Raised when a value violates a documented construction rule.
/// The message names the violated rule.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when the simulation itself breaks an internal protocol rule.
/// These indicate bugs, not bad input.
class ProtocolError : public std::runtime_error {
public:
    explicit ProtocolError(const std::string& what) : std::runtime_error(what) {}
};

/// Task duration: either a fixed tick count or a uniform draw in
/// [base - spread, base + spread] from the owning agent's RNG stream.
struct DurationModel {
    enum class Kind { Fixed, Jitter };

    Kind kind = Kind::Fixed;
    Tick base = 1;
    Tick spread = 0;

    static DurationModel fixed(Tick d);
    static DurationModel jitter(Tick base, Tick spread);

    bool operator==(const DurationModel&) const = default;
};

/// A task: an identifier, the resources it occupies while running, and a
/// duration model. The program payload is opaque (program_tag).
struct TaskSpec {
    TaskId task_id;
    std::set<ResourceId> resource_ids;
    DurationModel duration;
    std::string program_tag;

    TaskSpec() = default;
    TaskSpec(TaskId id, std::set<ResourceId> resources, DurationModel d,
             std::string tag = "");

    bool operator==(const TaskSpec&) const = default;
};

/// A job: one or more task chains. A chain is sequential; distinct chains
/// are independent unless their resource sets overlap (then the distributor
/// merges them before dispatch).
struct JobSpec {
    JobId job_id;
    std::vector<std::vector<TaskSpec>> chains;
    Tick arrival_time = 0;

    JobSpec() = default;
    JobSpec(JobId id, std::vector<std::vector<TaskSpec>> chains, Tick arrival);

    std::size_t task_count() const;

    bool operator==(const JobSpec&) const = default;
};

/// A robot state. Empty job+task is the distinguished free state. A state
/// with both fields set means "waiting to execute this task of this job".
/// A state with only the task set is a template used by agents that serve
/// any job (on-the-fly inserted tasks); robots never hold template states.
struct StateId {
    JobId job;
    TaskId task;

    static StateId free_state() { return {}; }
    static StateId task_state(JobId j, TaskId t);
    static StateId template_state(TaskId t);

    bool is_free() const { return job.empty() && task.empty(); }
    bool is_template() const { return job.empty() && !task.empty(); }

    std::string to_string() const;
    static std::optional<StateId> parse(const std::string& text);

    bool operator==(const StateId&) const = default;
    auto operator<=>(const StateId&) const = default;
};

/// One step of an agent's program: the robot state it matches, the task it
/// executes there, and the state it installs afterwards.
struct SIStep {
    StateId match;
    TaskSpec task;
    StateId next;

    bool operator==(const SIStep&) const = default;
};

/// State Information chain carried by an agent. Steps execute in order;
/// consecutive steps normally link next -> match, but an agent may carry a
/// gapped slice of a chain when tasks between its steps belong to other
/// agents (it leaves the robot and returns when the matching state appears).
class SIChain {
public:
    SIChain() = default;
    explicit SIChain(std::vector<SIStep> steps);

    const std::vector<SIStep>& steps() const { return steps_; }
    std::size_t size() const { return steps_.size(); }
    bool empty() const { return steps_.empty(); }

    /// True when every consecutive pair links next == match.
    bool contiguous() const;
    /// True for a full chain program: starts and ends at the free state.
    bool complete() const;

    bool operator==(const SIChain&) const = default;

private:
    std::vector<SIStep> steps_;
};

enum class NodeKind { Robotic, SharedResource, Secondary, JobDistributor };

const char* to_string(NodeKind k);
std::optional<NodeKind> node_kind_from_string(const std::string& s);

/// A declared resource, optionally hosted on a shared-resource node.
struct ResourceDecl {
    ResourceId id;
    std::optional<NodeId> host;

    bool operator==(const ResourceDecl&) const = default;
};

}  // namespace masim
