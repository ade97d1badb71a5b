#include "masim/trace.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <sstream>

namespace masim {

const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::JobArrival: return "JobArrival";
        case EventKind::AgentHop: return "AgentHop";
        case EventKind::AgentInspect: return "AgentInspect";
        case EventKind::ExecBegin: return "ExecBegin";
        case EventKind::ExecEnd: return "ExecEnd";
        case EventKind::ResourceAcquire: return "ResourceAcquire";
        case EventKind::ResourceRelease: return "ResourceRelease";
        case EventKind::StateUpdate: return "StateUpdate";
        case EventKind::AgentReturn: return "AgentReturn";
        case EventKind::SeqEdit: return "SeqEdit";
        case EventKind::RobotAdd: return "RobotAdd";
        case EventKind::RobotRemove: return "RobotRemove";
        case EventKind::CentralMsgSend: return "CentralMsgSend";
        case EventKind::CentralMsgRecv: return "CentralMsgRecv";
    }
    return "?";
}

std::optional<EventKind> event_kind_from_string(const std::string& s) {
    static const std::map<std::string, EventKind> table = {
        {"JobArrival", EventKind::JobArrival},
        {"AgentHop", EventKind::AgentHop},
        {"AgentInspect", EventKind::AgentInspect},
        {"ExecBegin", EventKind::ExecBegin},
        {"ExecEnd", EventKind::ExecEnd},
        {"ResourceAcquire", EventKind::ResourceAcquire},
        {"ResourceRelease", EventKind::ResourceRelease},
        {"StateUpdate", EventKind::StateUpdate},
        {"AgentReturn", EventKind::AgentReturn},
        {"SeqEdit", EventKind::SeqEdit},
        {"RobotAdd", EventKind::RobotAdd},
        {"RobotRemove", EventKind::RobotRemove},
        {"CentralMsgSend", EventKind::CentralMsgSend},
        {"CentralMsgRecv", EventKind::CentralMsgRecv},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

void Trace::append(TraceEvent ev) {
    if (!events_.empty()) {
        const auto& prev = events_.back();
        if (ev.at < prev.at || (ev.at == prev.at && ev.seq <= prev.seq)) {
            throw ProtocolError("Trace: non-monotone event at t=" + std::to_string(ev.at) +
                                " seq=" + std::to_string(ev.seq));
        }
    }
    events_.push_back(std::move(ev));
}

Tick Trace::end_time() const { return events_.empty() ? 0 : events_.back().at; }

namespace {

std::string join_resources(const std::vector<ResourceId>& rs) {
    std::string out;
    for (std::size_t i = 0; i < rs.size(); ++i) {
        if (i) out += ';';
        out += rs[i];
    }
    return out;
}

std::vector<ResourceId> split_resources(const std::string& field) {
    std::vector<ResourceId> out;
    std::size_t pos = 0;
    while (pos < field.size()) {
        auto next = field.find(';', pos);
        if (next == std::string::npos) next = field.size();
        if (next > pos) out.push_back(field.substr(pos, next - pos));
        pos = next + 1;
    }
    return out;
}

}  // namespace

void Trace::write_csv(std::ostream& out) const {
    out << csv_header << '\n';
    for (const auto& e : events_) {
        out << e.at << ',' << e.seq << ',' << to_string(e.kind) << ',' << e.agent << ','
            << e.robot << ',' << e.job << ',' << e.task << ',' << join_resources(e.resources)
            << ',' << e.state_from << ',' << e.state_to << '\n';
    }
}

std::string Trace::to_csv() const {
    std::ostringstream os;
    write_csv(os);
    return os.str();
}

Trace Trace::read_csv(std::istream& in) {
    Trace trace;
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) {
        throw TraceParseError(1, "empty file, expected header row");
    }
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != csv_header) {
        throw TraceParseError(1, "bad header row, expected '" + std::string(csv_header) + "'");
    }
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t pos = 0;
        for (int i = 0; i < 9; ++i) {
            auto c = line.find(',', pos);
            if (c == std::string::npos) {
                throw TraceParseError(lineno, "expected 10 comma-separated fields");
            }
            fields.push_back(line.substr(pos, c - pos));
            pos = c + 1;
        }
        fields.push_back(line.substr(pos));

        TraceEvent ev;
        try {
            ev.at = std::stoll(fields[0]);
            ev.seq = std::stoull(fields[1]);
        } catch (const std::exception&) {
            throw TraceParseError(lineno, "bad numeric field in '" + line + "'");
        }
        auto kind = event_kind_from_string(fields[2]);
        if (!kind) {
            throw TraceParseError(lineno, "unknown event kind '" + fields[2] + "'");
        }
        ev.kind = *kind;
        ev.agent = fields[3];
        ev.robot = fields[4];
        ev.job = fields[5];
        ev.task = fields[6];
        ev.resources = split_resources(fields[7]);
        ev.state_from = fields[8];
        ev.state_to = fields[9];
        try {
            trace.append(std::move(ev));
        } catch (const ProtocolError& e) {
            throw TraceParseError(lineno, e.what());
        }
    }
    return trace;
}

std::vector<std::string> check_trace_well_formed(const Trace& trace) {
    std::vector<std::string> problems;

    // (at, seq) monotonicity is enforced on append; re-check anyway for
    // traces built by hand in tests.
    const auto& ev = trace.events();
    for (std::size_t i = 1; i < ev.size(); ++i) {
        if (ev[i].at < ev[i - 1].at ||
            (ev[i].at == ev[i - 1].at && ev[i].seq <= ev[i - 1].seq)) {
            problems.push_back("event " + std::to_string(i) + " breaks (at,seq) order");
        }
    }

    // Acquire/release pairing per (robot, resource).
    std::map<std::pair<NodeId, ResourceId>, Tick> open_holds;
    // Open executions per robot, and removal times.
    std::map<NodeId, std::string> open_exec;
    std::map<NodeId, Tick> removed_at;

    for (const auto& e : ev) {
        switch (e.kind) {
            case EventKind::ResourceAcquire:
                for (const auto& r : e.resources) {
                    auto key = std::make_pair(e.robot, r);
                    if (open_holds.count(key)) {
                        problems.push_back("double acquire of " + r + " by " + e.robot + " at t=" +
                                           std::to_string(e.at));
                    }
                    open_holds[key] = e.at;
                }
                break;
            case EventKind::ResourceRelease:
                for (const auto& r : e.resources) {
                    auto key = std::make_pair(e.robot, r);
                    if (!open_holds.count(key)) {
                        problems.push_back("release of unheld " + r + " by " + e.robot + " at t=" +
                                           std::to_string(e.at));
                    } else {
                        open_holds.erase(key);
                    }
                }
                break;
            case EventKind::ExecBegin:
                if (open_exec.count(e.robot)) {
                    problems.push_back("nested ExecBegin on " + e.robot + " at t=" +
                                       std::to_string(e.at));
                }
                open_exec[e.robot] = e.job + "/" + e.task;
                break;
            case EventKind::ExecEnd:
                if (!open_exec.count(e.robot)) {
                    problems.push_back("ExecEnd without ExecBegin on " + e.robot + " at t=" +
                                       std::to_string(e.at));
                } else {
                    open_exec.erase(e.robot);
                }
                break;
            case EventKind::RobotRemove:
                removed_at[e.robot] = e.at;
                // Removal aborts any open execution on this robot.
                open_exec.erase(e.robot);
                break;
            default:
                break;
        }
    }
    for (const auto& [key, t] : open_holds) {
        if (!removed_at.count(key.first)) {
            problems.push_back("unreleased resource " + key.second + " held by " + key.first);
        }
    }
    for (const auto& [robot, what] : open_exec) {
        problems.push_back("unterminated execution " + what + " on " + robot);
    }
    return problems;
}

}  // namespace masim
