#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "masim/domain.hpp"

namespace masim {

enum class EventKind {
    JobArrival,
    AgentHop,
    AgentInspect,
    ExecBegin,
    ExecEnd,
    ResourceAcquire,
    ResourceRelease,
    StateUpdate,
    AgentReturn,
    SeqEdit,
    RobotAdd,
    RobotRemove,
    CentralMsgSend,
    CentralMsgRecv,
};

const char* to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(const std::string& s);

/// One timestamped record. Fields not applicable to a kind stay empty.
struct TraceEvent {
    Tick at = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::JobArrival;
    AgentId agent;
    NodeId robot;
    JobId job;
    TaskId task;
    std::vector<ResourceId> resources;
    std::string state_from;
    std::string state_to;

    bool operator==(const TraceEvent&) const = default;
};

class TraceParseError : public std::runtime_error {
public:
    TraceParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// Timestamped event log of one run. Timestamps are monotone in (at, seq).
class Trace {
public:
    static constexpr const char* csv_header =
        "at,seq,kind,agent_id,robot_id,job_id,task_id,resources,state_from,state_to";

    void append(TraceEvent ev);

    const std::vector<TraceEvent>& events() const { return events_; }
    bool empty() const { return events_.empty(); }
    std::size_t size() const { return events_.size(); }

    const std::string& fingerprint() const { return fingerprint_; }
    void set_fingerprint(std::string fp) { fingerprint_ = std::move(fp); }

    /// Time of the last event, 0 for an empty trace.
    Tick end_time() const;

    void write_csv(std::ostream& out) const;
    std::string to_csv() const;
    static Trace read_csv(std::istream& in);

private:
    std::vector<TraceEvent> events_;
    std::string fingerprint_;
};

/// Structural checks: monotone (at, seq), every ResourceAcquire matched by a
/// ResourceRelease on the same robot, every ExecBegin closed by an ExecEnd or
/// by a RobotRemove of its robot. Returns human-readable problems.
std::vector<std::string> check_trace_well_formed(const Trace& trace);

}  // namespace masim
