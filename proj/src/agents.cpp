#include "masim/agents.hpp"

#include <algorithm>

namespace masim {

void apply_edit(std::vector<TaskId>& seq, const SequenceEdit& edit) {
    switch (edit.op) {
        case SequenceEdit::Op::Insert: {
            if (!edit.task.has_value()) {
                throw ValidationError("SequenceEdit: insert requires a task");
            }
            if (std::find(seq.begin(), seq.end(), edit.task->task_id) != seq.end()) {
                return;  // already present; stale re-application
            }
            if (!edit.after.has_value()) {
                seq.insert(seq.begin(), edit.task->task_id);
                return;
            }
            auto it = std::find(seq.begin(), seq.end(), *edit.after);
            if (it == seq.end()) return;  // anchor missing in a stale db
            seq.insert(std::next(it), edit.task->task_id);
            return;
        }
        case SequenceEdit::Op::Delete: {
            auto it = std::find(seq.begin(), seq.end(), edit.target);
            if (it != seq.end()) seq.erase(it);
            return;
        }
        case SequenceEdit::Op::Reorder:
            seq = edit.sequence;
            return;
    }
}

namespace {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

Tick DurationSampler::sample(const AgentId& agent, const DurationModel& d) {
    if (d.kind == DurationModel::Kind::Fixed) return d.base;
    if (d.spread == 0) return d.base;
    auto it = streams_.find(agent);
    if (it == streams_.end()) {
        std::uint64_t s = seed_ * 0x9e3779b97f4a7c15ull ^ fnv1a64(agent);
        it = streams_.emplace(agent, std::mt19937_64(s)).first;
    }
    // Portable bounded draw; std::uniform_int_distribution is not
    // reproducible across standard libraries.
    std::uint64_t width = static_cast<std::uint64_t>(2 * d.spread + 1);
    return d.base - d.spread + static_cast<Tick>(it->second() % width);
}

}  // namespace masim
