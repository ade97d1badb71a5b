#include "masim/robots.hpp"

#include <algorithm>

namespace masim {

DbSuccessor db_successor(const RobotNode& robot, const TaskId& completed) {
    auto it = std::find(robot.transition_db.begin(), robot.transition_db.end(), completed);
    if (it == robot.transition_db.end()) return {};
    ++it;
    if (it == robot.transition_db.end()) return {true, std::nullopt};
    return {true, *it};
}

std::optional<ResourceId> acquire_resources(std::map<NodeId, RobotNode>& robots,
                                            const NodeId& robot_id,
                                            const std::set<ResourceId>& resources) {
    auto self = robots.find(robot_id);
    if (self == robots.end()) {
        throw ValidationError("acquire: unknown robot " + robot_id);
    }
    if (!self->second.active()) {
        throw ProtocolError("acquire: robot " + robot_id + " is removed");
    }
    for (const auto& [id, r] : robots) {
        if (id == robot_id) continue;
        for (const auto& res : resources) {
            if (r.held.count(res)) return res;  // Busy: nothing acquired
        }
    }
    self->second.held.insert(resources.begin(), resources.end());
    return std::nullopt;
}

void release_resources(std::map<NodeId, RobotNode>& robots, const NodeId& robot_id,
                       const std::set<ResourceId>& resources) {
    auto self = robots.find(robot_id);
    if (self == robots.end()) {
        throw ValidationError("release: unknown robot " + robot_id);
    }
    for (const auto& res : resources) {
        if (!self->second.held.count(res)) {
            throw ProtocolError("release: robot " + robot_id + " does not hold " + res);
        }
    }
    for (const auto& res : resources) self->second.held.erase(res);
}

}  // namespace masim
