#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "masim/domain.hpp"

namespace masim {

enum class RobotStatus { Active, Removed };
enum class RemovePolicy { AfterCurrentJob, Immediate };

/// Per-robot battery model: a budget of execution ticks and a threshold.
/// When remaining budget drops to the threshold or below, the robot finishes
/// its current job and retires (the engine fires the removal).
struct BatteryConfig {
    Tick budget = 0;
    Tick threshold = 0;

    bool operator==(const BatteryConfig&) const = default;
};

/// A robotic node: current state, the locally stored expected task sequence
/// (state transition database), held resources, and the job it is booked to.
struct RobotNode {
    NodeId id;
    StateId state;  // free by default
    std::vector<TaskId> transition_db;
    std::set<ResourceId> held;
    std::optional<JobId> bound_job;
    bool executing = false;
    RobotStatus status = RobotStatus::Active;
    bool pending_removal = false;
    std::optional<BatteryConfig> battery;
    Tick battery_used = 0;

    bool active() const { return status == RobotStatus::Active; }
    bool free_state() const { return state.is_free(); }
};

/// Successor lookup in a robot's transition database.
struct DbSuccessor {
    bool found = false;                 // completed task present in the db
    std::optional<TaskId> next;         // nullopt = end of sequence (free)
};

DbSuccessor db_successor(const RobotNode& robot, const TaskId& completed);

/// All-or-nothing acquisition: either every resource becomes held by this
/// robot or none does, and the conflicting resource is returned. Holdings
/// are checked across the whole robot set.
std::optional<ResourceId> acquire_resources(std::map<NodeId, RobotNode>& robots,
                                            const NodeId& robot_id,
                                            const std::set<ResourceId>& resources);

/// Releases resources held by the robot; releasing an unheld resource is a
/// protocol error.
void release_resources(std::map<NodeId, RobotNode>& robots, const NodeId& robot_id,
                       const std::set<ResourceId>& resources);

}  // namespace masim
