#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "masim/agents.hpp"
#include "masim/domain.hpp"
#include "masim/robots.hpp"

namespace masim {

enum class RunMode { Decentralized, Centralized, Both };

const char* to_string(RunMode m);
std::optional<RunMode> run_mode_from_string(const std::string& s);

struct EngineParams {
    std::uint64_t seed = 0;
    Tick ticks_per_second = 1000;
    Tick hop_latency = 1;
    Tick return_latency = 1;
    Tick t_max = 10'000'000;
    Tick central_service_time = 5;

    bool operator==(const EngineParams&) const = default;
};

struct NodeDecl {
    NodeId id;
    NodeKind kind = NodeKind::Secondary;
    std::optional<BatteryConfig> battery;  // robotic nodes only

    bool operator==(const NodeDecl&) const = default;
};

/// A scheduled intervention: a sequence edit or a robot change at time `at`.
struct Intervention {
    enum class Op { SeqInsert, SeqDelete, SeqReorder, RobotAdd, RobotRemove };

    Tick at = 0;
    Op op = Op::SeqInsert;

    // SeqInsert
    std::optional<TaskSpec> task;
    std::optional<TaskId> after;  // nullopt = front of sequence
    // SeqDelete
    TaskId target;
    // SeqReorder
    std::vector<TaskId> sequence;
    // RobotAdd
    std::optional<NodeDecl> node;
    std::vector<std::pair<NodeId, NodeId>> edges;
    // RobotRemove
    NodeId robot;
    RemovePolicy policy = RemovePolicy::AfterCurrentJob;

    bool operator==(const Intervention&) const = default;
};

/// A complete, declarative experiment description.
struct Scenario {
    int version = 1;
    std::string name;
    RunMode mode = RunMode::Decentralized;
    EngineParams engine;
    std::vector<NodeDecl> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::vector<ResourceDecl> resources;
    std::vector<JobSpec> jobs;
    /// Expected global task order seeded into every robot's transition
    /// database. Empty = derive from identical single-chain jobs, else none.
    std::vector<TaskId> task_sequence;
    std::vector<Intervention> interventions;

    bool operator==(const Scenario&) const = default;

    NodeId distributor_node() const;
    std::vector<NodeDecl> robot_nodes() const;

    /// Effective transition-database seed (explicit or derived).
    std::vector<TaskId> initial_sequence() const;

    /// Cross-reference and schema checks beyond per-type invariants.
    /// Throws ValidationError naming the offending element.
    void validate() const;
};

/// Parses and validates a scenario document. Unknown fields are errors.
Scenario load_scenario_text(const std::string& text);
Scenario load_scenario_file(const std::string& path);

/// Serializes; load_scenario_text(write_scenario(s)) == s for valid s.
std::string write_scenario(const Scenario& s);

}  // namespace masim
