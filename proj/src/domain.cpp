#include "masim/domain.hpp"

#include <algorithm>

namespace masim {

DurationModel DurationModel::fixed(Tick d) {
    if (d <= 0) {
        throw ValidationError("DurationModel: fixed duration must be strictly positive, got " +
                              std::to_string(d));
    }
    return DurationModel{Kind::Fixed, d, 0};
}

DurationModel DurationModel::jitter(Tick base, Tick spread) {
    if (base <= 0) {
        throw ValidationError("DurationModel: jitter base must be strictly positive, got " +
                              std::to_string(base));
    }
    if (spread < 0) {
        throw ValidationError("DurationModel: jitter spread must be non-negative, got " +
                              std::to_string(spread));
    }
    if (spread >= base) {
        throw ValidationError("DurationModel: jitter spread must be smaller than base (" +
                              std::to_string(spread) + " >= " + std::to_string(base) + ")");
    }
    return DurationModel{Kind::Jitter, base, spread};
}

TaskSpec::TaskSpec(TaskId id, std::set<ResourceId> resources, DurationModel d, std::string tag)
    : task_id(std::move(id)),
      resource_ids(std::move(resources)),
      duration(d),
      program_tag(std::move(tag)) {
    if (task_id.empty()) {
        throw ValidationError("TaskSpec: task_id must be non-empty");
    }
    if (resource_ids.empty()) {
        throw ValidationError("TaskSpec " + task_id + ": resource_ids must be non-empty");
    }
    if (duration.base <= 0) {
        throw ValidationError("TaskSpec " + task_id + ": duration must be strictly positive");
    }
}

JobSpec::JobSpec(JobId id, std::vector<std::vector<TaskSpec>> job_chains, Tick arrival)
    : job_id(std::move(id)), chains(std::move(job_chains)), arrival_time(arrival) {
    if (job_id.empty()) {
        throw ValidationError("JobSpec: job_id must be non-empty");
    }
    if (chains.empty()) {
        throw ValidationError("JobSpec " + job_id + ": must contain at least one chain");
    }
    if (arrival_time < 0) {
        throw ValidationError("JobSpec " + job_id + ": arrival_time must be non-negative");
    }
    std::set<TaskId> seen;
    for (const auto& chain : chains) {
        if (chain.empty()) {
            throw ValidationError("JobSpec " + job_id + ": chains must be non-empty");
        }
        for (const auto& t : chain) {
            if (!seen.insert(t.task_id).second) {
                throw ValidationError("JobSpec " + job_id + ": duplicate task_id " + t.task_id);
            }
        }
    }
}

std::size_t JobSpec::task_count() const {
    std::size_t n = 0;
    for (const auto& c : chains) n += c.size();
    return n;
}

StateId StateId::task_state(JobId j, TaskId t) {
    if (j.empty() || t.empty()) {
        throw ValidationError("StateId: composite state requires both job and task ids");
    }
    return StateId{std::move(j), std::move(t)};
}

StateId StateId::template_state(TaskId t) {
    if (t.empty()) {
        throw ValidationError("StateId: template state requires a task id");
    }
    return StateId{"", std::move(t)};
}

std::string StateId::to_string() const {
    if (is_free()) return "S*";
    if (is_template()) return "*:" + task;
    return job + ":" + task;
}

std::optional<StateId> StateId::parse(const std::string& text) {
    if (text == "S*") return free_state();
    auto colon = text.find(':');
    if (colon == std::string::npos || colon + 1 >= text.size()) return std::nullopt;
    std::string job = text.substr(0, colon);
    std::string task = text.substr(colon + 1);
    if (task.empty()) return std::nullopt;
    if (job == "*") return template_state(task);
    if (job.empty()) return std::nullopt;
    return StateId{job, task};
}

SIChain::SIChain(std::vector<SIStep> steps) : steps_(std::move(steps)) {
    if (steps_.empty()) {
        throw ValidationError("SIChain: must contain at least one step");
    }
    for (const auto& s : steps_) {
        if (s.match.is_template() != s.next.is_template() && !s.next.is_free()) {
            throw ValidationError("SIChain: template and composite states cannot mix in a step");
        }
    }
}

bool SIChain::contiguous() const {
    for (std::size_t i = 0; i + 1 < steps_.size(); ++i) {
        if (!(steps_[i].next == steps_[i + 1].match)) return false;
    }
    return true;
}

bool SIChain::complete() const {
    return contiguous() && steps_.front().match.is_free() && steps_.back().next.is_free();
}

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Robotic: return "robotic";
        case NodeKind::SharedResource: return "shared_resource";
        case NodeKind::Secondary: return "secondary";
        case NodeKind::JobDistributor: return "job_distributor";
    }
    return "?";
}

std::optional<NodeKind> node_kind_from_string(const std::string& s) {
    if (s == "robotic") return NodeKind::Robotic;
    if (s == "shared_resource") return NodeKind::SharedResource;
    if (s == "secondary") return NodeKind::Secondary;
    if (s == "job_distributor") return NodeKind::JobDistributor;
    return std::nullopt;
}

}  // namespace masim
