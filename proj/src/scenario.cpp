#include "masim/scenario.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace masim {

using nlohmann::json;

const char* to_string(RunMode m) {
    switch (m) {
        case RunMode::Decentralized: return "decentralized";
        case RunMode::Centralized: return "centralized";
        case RunMode::Both: return "both";
    }
    return "?";
}

std::optional<RunMode> run_mode_from_string(const std::string& s) {
    if (s == "decentralized") return RunMode::Decentralized;
    if (s == "centralized") return RunMode::Centralized;
    if (s == "both") return RunMode::Both;
    return std::nullopt;
}

NodeId Scenario::distributor_node() const {
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::JobDistributor) return n.id;
    }
    throw ValidationError("scenario " + name + ": no job_distributor node declared");
}

std::vector<NodeDecl> Scenario::robot_nodes() const {
    std::vector<NodeDecl> out;
    for (const auto& n : nodes) {
        if (n.kind == NodeKind::Robotic) out.push_back(n);
    }
    return out;
}

std::vector<TaskId> Scenario::initial_sequence() const {
    if (!task_sequence.empty()) return task_sequence;
    // Derive when every job is one chain with the identical task order.
    std::vector<TaskId> derived;
    for (const auto& j : jobs) {
        if (j.chains.size() != 1) return {};
        std::vector<TaskId> ids;
        for (const auto& t : j.chains[0]) ids.push_back(t.task_id);
        if (derived.empty()) {
            derived = ids;
        } else if (derived != ids) {
            return {};
        }
    }
    return derived;
}

void Scenario::validate() const {
    if (version != 1) {
        throw ValidationError("scenario: unsupported version " + std::to_string(version));
    }
    auto check_id = [](const std::string& id, const std::string& what) {
        if (id.empty()) throw ValidationError("scenario: empty " + what + " id");
        for (char c : id) {
            bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                      (c >= '0' && c <= '9') || c == '_' || c == '-' || c == '.';
            if (!ok) {
                throw ValidationError("scenario: " + what + " id '" + id +
                                      "' contains illegal character '" + std::string(1, c) + "'");
            }
        }
    };

    std::set<NodeId> node_ids;
    int distributors = 0;
    for (const auto& n : nodes) {
        check_id(n.id, "node");
        if (!node_ids.insert(n.id).second) {
            throw ValidationError("scenario: duplicate node id " + n.id);
        }
        if (n.kind == NodeKind::JobDistributor) ++distributors;
        if (n.battery && n.kind != NodeKind::Robotic) {
            throw ValidationError("scenario: battery on non-robotic node " + n.id);
        }
        if (n.battery && (n.battery->budget <= 0 || n.battery->threshold < 0)) {
            throw ValidationError("scenario: node " + n.id + " has invalid battery config");
        }
    }
    if (distributors != 1) {
        throw ValidationError("scenario: exactly one job_distributor node required, found " +
                              std::to_string(distributors));
    }
    for (const auto& [a, b] : edges) {
        if (!node_ids.count(a)) throw ValidationError("scenario: edge references unknown node " + a);
        if (!node_ids.count(b)) throw ValidationError("scenario: edge references unknown node " + b);
        if (a == b) throw ValidationError("scenario: self-loop edge on " + a);
    }

    std::set<ResourceId> resource_ids;
    for (const auto& r : resources) {
        check_id(r.id, "resource");
        if (!resource_ids.insert(r.id).second) {
            throw ValidationError("scenario: duplicate resource id " + r.id);
        }
        if (r.host && !node_ids.count(*r.host)) {
            throw ValidationError("scenario: resource " + r.id + " hosted on unknown node " +
                                  *r.host);
        }
    }

    std::set<JobId> job_ids;
    std::map<TaskId, JobId> task_owner;
    for (const auto& j : jobs) {
        check_id(j.job_id, "job");
        if (!job_ids.insert(j.job_id).second) {
            throw ValidationError("scenario: duplicate job id " + j.job_id);
        }
        for (const auto& chain : j.chains) {
            for (const auto& t : chain) {
                check_id(t.task_id, "task");
                for (const auto& r : t.resource_ids) {
                    if (!resource_ids.count(r)) {
                        throw ValidationError("scenario: job " + j.job_id + " task " + t.task_id +
                                              " references undeclared resource " + r);
                    }
                }
            }
        }
    }

    if (!task_sequence.empty()) {
        std::set<TaskId> seen;
        for (const auto& t : task_sequence) {
            if (!seen.insert(t).second) {
                throw ValidationError("scenario: task_sequence repeats task " + t);
            }
        }
    }

    // Replay sequence edits over the declared order to catch bad anchors
    // and duplicates before t=0.
    std::vector<TaskId> seq = initial_sequence();
    std::vector<const Intervention*> ordered;
    for (const auto& iv : interventions) ordered.push_back(&iv);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const Intervention* a, const Intervention* b) { return a->at < b->at; });
    for (const auto* ivp : ordered) {
        const auto& iv = *ivp;
        if (iv.at < 0) throw ValidationError("scenario: intervention time must be >= 0");
        switch (iv.op) {
            case Intervention::Op::SeqInsert: {
                if (!iv.task.has_value()) {
                    throw ValidationError("scenario: seq_insert requires a task");
                }
                for (const auto& r : iv.task->resource_ids) {
                    if (!resource_ids.count(r)) {
                        throw ValidationError("scenario: inserted task " + iv.task->task_id +
                                              " references undeclared resource " + r);
                    }
                }
                if (std::find(seq.begin(), seq.end(), iv.task->task_id) != seq.end()) {
                    throw ValidationError("scenario: seq_insert duplicates task " +
                                          iv.task->task_id + " at t=" + std::to_string(iv.at));
                }
                if (iv.after && std::find(seq.begin(), seq.end(), *iv.after) == seq.end()) {
                    throw ValidationError("scenario: seq_insert anchor " + *iv.after +
                                          " not in sequence at t=" + std::to_string(iv.at));
                }
                SequenceEdit e;
                e.op = SequenceEdit::Op::Insert;
                e.task = iv.task;
                e.after = iv.after;
                apply_edit(seq, e);
                break;
            }
            case Intervention::Op::SeqDelete: {
                if (std::find(seq.begin(), seq.end(), iv.target) == seq.end()) {
                    throw ValidationError("scenario: seq_delete target " + iv.target +
                                          " not in sequence at t=" + std::to_string(iv.at));
                }
                SequenceEdit e;
                e.op = SequenceEdit::Op::Delete;
                e.target = iv.target;
                apply_edit(seq, e);
                break;
            }
            case Intervention::Op::SeqReorder: {
                std::multiset<TaskId> a(seq.begin(), seq.end());
                std::multiset<TaskId> b(iv.sequence.begin(), iv.sequence.end());
                if (a != b) {
                    throw ValidationError(
                        "scenario: seq_reorder must permute the current sequence");
                }
                seq = iv.sequence;
                break;
            }
            case Intervention::Op::RobotAdd: {
                if (!iv.node.has_value() || iv.node->kind != NodeKind::Robotic) {
                    throw ValidationError("scenario: robot_add requires a robotic node");
                }
                if (node_ids.count(iv.node->id)) {
                    throw ValidationError("scenario: robot_add duplicates node id " +
                                          iv.node->id);
                }
                node_ids.insert(iv.node->id);
                for (const auto& [a, b] : iv.edges) {
                    if (!node_ids.count(a) || !node_ids.count(b)) {
                        throw ValidationError("scenario: robot_add edge references unknown node");
                    }
                }
                break;
            }
            case Intervention::Op::RobotRemove: {
                if (!node_ids.count(iv.robot)) {
                    throw ValidationError("scenario: robot_remove references unknown node " +
                                          iv.robot);
                }
                break;
            }
        }
    }

    if (engine.ticks_per_second <= 0 || engine.hop_latency < 0 || engine.return_latency < 0 ||
        engine.t_max <= 0 || engine.central_service_time < 0) {
        throw ValidationError("scenario: engine parameters out of range");
    }
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw ValidationError("scenario" + (where.empty() ? "" : " at " + where) + ": " + what);
}

void expect_keys(const json& obj, const std::string& where,
                 std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) {
            if (it.key() == k) {
                ok = true;
                break;
            }
        }
        if (!ok) fail(where, "unknown field '" + it.key() + "'");
    }
}

std::string require_string(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) fail(where, std::string("missing field '") + key + "'");
    if (!obj[key].is_string()) fail(where, std::string("field '") + key + "' must be a string");
    return obj[key].get<std::string>();
}

Tick require_int(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) fail(where, std::string("missing field '") + key + "'");
    if (!obj[key].is_number_integer()) {
        fail(where, std::string("field '") + key + "' must be an integer");
    }
    return obj[key].get<Tick>();
}

Tick optional_int(const json& obj, const std::string& where, const char* key, Tick def) {
    if (!obj.contains(key)) return def;
    if (!obj[key].is_number_integer()) {
        fail(where, std::string("field '") + key + "' must be an integer");
    }
    return obj[key].get<Tick>();
}

DurationModel parse_duration(const json& d, const std::string& where) {
    if (!d.is_object()) fail(where, "duration must be an object");
    expect_keys(d, where, {"fixed", "jitter"});
    if (d.contains("fixed")) {
        return DurationModel::fixed(require_int(d, where, "fixed"));
    }
    if (d.contains("jitter")) {
        const auto& j = d["jitter"];
        expect_keys(j, where + ".jitter", {"base", "spread"});
        return DurationModel::jitter(require_int(j, where + ".jitter", "base"),
                                     require_int(j, where + ".jitter", "spread"));
    }
    fail(where, "duration requires 'fixed' or 'jitter'");
}

TaskSpec parse_task(const json& t, const std::string& where) {
    if (!t.is_object()) fail(where, "task must be an object");
    expect_keys(t, where, {"task", "resources", "duration", "program_tag"});
    std::string id = require_string(t, where, "task");
    if (!t.contains("resources") || !t["resources"].is_array()) {
        fail(where, "task '" + id + "' needs a resources array");
    }
    std::set<ResourceId> res;
    for (const auto& r : t["resources"]) {
        if (!r.is_string()) fail(where, "resource ids must be strings");
        res.insert(r.get<std::string>());
    }
    if (!t.contains("duration")) fail(where, "task '" + id + "' needs a duration");
    std::string tag = t.contains("program_tag") ? require_string(t, where, "program_tag") : "";
    return TaskSpec(id, std::move(res), parse_duration(t["duration"], where + ".duration"), tag);
}

json duration_to_json(const DurationModel& d) {
    if (d.kind == DurationModel::Kind::Fixed) return json{{"fixed", d.base}};
    return json{{"jitter", {{"base", d.base}, {"spread", d.spread}}}};
}

json task_to_json(const TaskSpec& t) {
    json out{{"task", t.task_id},
             {"resources", t.resource_ids},
             {"duration", duration_to_json(t.duration)}};
    if (!t.program_tag.empty()) out["program_tag"] = t.program_tag;
    return out;
}

}  // namespace

Scenario load_scenario_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("scenario: ") + e.what());
    }
    if (!doc.is_object()) throw ValidationError("scenario: document must be a JSON object");
    expect_keys(doc, "", {"version", "name", "mode", "engine", "nodes", "edges", "resources",
                          "task_sequence", "jobs", "interventions"});

    Scenario s;
    if (!doc.contains("version")) fail("", "missing field 'version'");
    s.version = static_cast<int>(require_int(doc, "", "version"));
    s.name = doc.contains("name") ? require_string(doc, "", "name") : "";
    if (doc.contains("mode")) {
        auto m = run_mode_from_string(require_string(doc, "", "mode"));
        if (!m) fail("", "mode must be decentralized|centralized|both");
        s.mode = *m;
    }

    if (doc.contains("engine")) {
        const auto& e = doc["engine"];
        expect_keys(e, "engine",
                    {"seed", "ticks_per_second", "hop_latency", "return_latency", "t_max",
                     "central_service_time"});
        s.engine.seed = static_cast<std::uint64_t>(optional_int(e, "engine", "seed", 0));
        s.engine.ticks_per_second = optional_int(e, "engine", "ticks_per_second", 1000);
        s.engine.hop_latency = optional_int(e, "engine", "hop_latency", 1);
        s.engine.return_latency = optional_int(e, "engine", "return_latency", 1);
        s.engine.t_max = optional_int(e, "engine", "t_max", 10'000'000);
        s.engine.central_service_time = optional_int(e, "engine", "central_service_time", 5);
    }

    if (!doc.contains("nodes") || !doc["nodes"].is_array()) fail("", "missing 'nodes' array");
    for (std::size_t i = 0; i < doc["nodes"].size(); ++i) {
        const auto& n = doc["nodes"][i];
        std::string where = "nodes[" + std::to_string(i) + "]";
        expect_keys(n, where, {"id", "kind", "battery"});
        NodeDecl decl;
        decl.id = require_string(n, where, "id");
        auto kind = node_kind_from_string(require_string(n, where, "kind"));
        if (!kind) fail(where, "unknown node kind");
        decl.kind = *kind;
        if (n.contains("battery")) {
            const auto& b = n["battery"];
            expect_keys(b, where + ".battery", {"budget", "threshold"});
            decl.battery = BatteryConfig{require_int(b, where, "budget"),
                                         optional_int(b, where, "threshold", 0)};
        }
        s.nodes.push_back(std::move(decl));
    }

    if (doc.contains("edges")) {
        if (!doc["edges"].is_array()) fail("", "'edges' must be an array");
        for (const auto& e : doc["edges"]) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
                fail("edges", "each edge must be a [a, b] pair of node ids");
            }
            s.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
    }

    if (doc.contains("resources")) {
        if (!doc["resources"].is_array()) fail("", "'resources' must be an array");
        for (std::size_t i = 0; i < doc["resources"].size(); ++i) {
            const auto& r = doc["resources"][i];
            std::string where = "resources[" + std::to_string(i) + "]";
            expect_keys(r, where, {"id", "host"});
            ResourceDecl decl;
            decl.id = require_string(r, where, "id");
            if (r.contains("host")) decl.host = require_string(r, where, "host");
            s.resources.push_back(std::move(decl));
        }
    }

    if (doc.contains("task_sequence")) {
        if (!doc["task_sequence"].is_array()) fail("", "'task_sequence' must be an array");
        for (const auto& t : doc["task_sequence"]) {
            if (!t.is_string()) fail("task_sequence", "entries must be task id strings");
            s.task_sequence.push_back(t.get<std::string>());
        }
    }

    if (doc.contains("jobs")) {
        if (!doc["jobs"].is_array()) fail("", "'jobs' must be an array");
        for (std::size_t i = 0; i < doc["jobs"].size(); ++i) {
            const auto& j = doc["jobs"][i];
            std::string where = "jobs[" + std::to_string(i) + "]";
            expect_keys(j, where, {"id", "arrival", "chains"});
            std::string id = require_string(j, where, "id");
            Tick arrival = optional_int(j, where, "arrival", 0);
            if (!j.contains("chains") || !j["chains"].is_array()) {
                fail(where, "job needs a 'chains' array");
            }
            std::vector<std::vector<TaskSpec>> chains;
            for (std::size_t c = 0; c < j["chains"].size(); ++c) {
                const auto& chain = j["chains"][c];
                if (!chain.is_array()) fail(where, "each chain must be an array of tasks");
                std::vector<TaskSpec> tasks;
                for (std::size_t k = 0; k < chain.size(); ++k) {
                    tasks.push_back(parse_task(
                        chain[k], where + ".chains[" + std::to_string(c) + "][" +
                                      std::to_string(k) + "]"));
                }
                chains.push_back(std::move(tasks));
            }
            s.jobs.emplace_back(id, std::move(chains), arrival);
        }
    }

    if (doc.contains("interventions")) {
        if (!doc["interventions"].is_array()) fail("", "'interventions' must be an array");
        for (std::size_t i = 0; i < doc["interventions"].size(); ++i) {
            const auto& v = doc["interventions"][i];
            std::string where = "interventions[" + std::to_string(i) + "]";
            expect_keys(v, where,
                        {"at", "op", "task", "after", "target", "sequence", "node", "edges",
                         "robot", "policy"});
            Intervention iv;
            iv.at = require_int(v, where, "at");
            std::string op = require_string(v, where, "op");
            if (op == "seq_insert") {
                iv.op = Intervention::Op::SeqInsert;
                if (!v.contains("task")) fail(where, "seq_insert needs a 'task'");
                iv.task = parse_task(v["task"], where + ".task");
                if (v.contains("after")) iv.after = require_string(v, where, "after");
            } else if (op == "seq_delete") {
                iv.op = Intervention::Op::SeqDelete;
                iv.target = require_string(v, where, "target");
            } else if (op == "seq_reorder") {
                iv.op = Intervention::Op::SeqReorder;
                if (!v.contains("sequence") || !v["sequence"].is_array()) {
                    fail(where, "seq_reorder needs a 'sequence' array");
                }
                for (const auto& t : v["sequence"]) iv.sequence.push_back(t.get<std::string>());
            } else if (op == "robot_add") {
                iv.op = Intervention::Op::RobotAdd;
                if (!v.contains("node")) fail(where, "robot_add needs a 'node'");
                const auto& n = v["node"];
                expect_keys(n, where + ".node", {"id", "kind", "battery"});
                NodeDecl decl;
                decl.id = require_string(n, where + ".node", "id");
                auto kind = node_kind_from_string(require_string(n, where + ".node", "kind"));
                if (!kind) fail(where, "unknown node kind");
                decl.kind = *kind;
                iv.node = decl;
                if (v.contains("edges")) {
                    for (const auto& e : v["edges"]) {
                        if (!e.is_array() || e.size() != 2) fail(where, "bad edge");
                        iv.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
                    }
                }
            } else if (op == "robot_remove") {
                iv.op = Intervention::Op::RobotRemove;
                iv.robot = require_string(v, where, "robot");
                std::string policy = v.contains("policy") ? require_string(v, where, "policy")
                                                          : "after_current_job";
                if (policy == "after_current_job") {
                    iv.policy = RemovePolicy::AfterCurrentJob;
                } else if (policy == "immediate") {
                    iv.policy = RemovePolicy::Immediate;
                } else {
                    fail(where, "policy must be after_current_job|immediate");
                }
            } else {
                fail(where, "unknown op '" + op + "'");
            }
            s.interventions.push_back(std::move(iv));
        }
    }

    s.validate();
    return s;
}

Scenario load_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("scenario: cannot open file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return load_scenario_text(buf.str());
}

std::string write_scenario(const Scenario& s) {
    json doc;
    doc["version"] = s.version;
    doc["name"] = s.name;
    doc["mode"] = to_string(s.mode);
    doc["engine"] = {{"seed", s.engine.seed},
                     {"ticks_per_second", s.engine.ticks_per_second},
                     {"hop_latency", s.engine.hop_latency},
                     {"return_latency", s.engine.return_latency},
                     {"t_max", s.engine.t_max},
                     {"central_service_time", s.engine.central_service_time}};
    doc["nodes"] = json::array();
    for (const auto& n : s.nodes) {
        json node{{"id", n.id}, {"kind", to_string(n.kind)}};
        if (n.battery) {
            node["battery"] = {{"budget", n.battery->budget}, {"threshold", n.battery->threshold}};
        }
        doc["nodes"].push_back(std::move(node));
    }
    doc["edges"] = json::array();
    for (const auto& [a, b] : s.edges) doc["edges"].push_back(json::array({a, b}));
    doc["resources"] = json::array();
    for (const auto& r : s.resources) {
        json res{{"id", r.id}};
        if (r.host) res["host"] = *r.host;
        doc["resources"].push_back(std::move(res));
    }
    if (!s.task_sequence.empty()) doc["task_sequence"] = s.task_sequence;
    doc["jobs"] = json::array();
    for (const auto& j : s.jobs) {
        json job{{"id", j.job_id}, {"arrival", j.arrival_time}};
        job["chains"] = json::array();
        for (const auto& chain : j.chains) {
            json c = json::array();
            for (const auto& t : chain) c.push_back(task_to_json(t));
            job["chains"].push_back(std::move(c));
        }
        doc["jobs"].push_back(std::move(job));
    }
    doc["interventions"] = json::array();
    for (const auto& iv : s.interventions) {
        json v{{"at", iv.at}};
        switch (iv.op) {
            case Intervention::Op::SeqInsert:
                v["op"] = "seq_insert";
                v["task"] = task_to_json(*iv.task);
                if (iv.after) v["after"] = *iv.after;
                break;
            case Intervention::Op::SeqDelete:
                v["op"] = "seq_delete";
                v["target"] = iv.target;
                break;
            case Intervention::Op::SeqReorder:
                v["op"] = "seq_reorder";
                v["sequence"] = iv.sequence;
                break;
            case Intervention::Op::RobotAdd: {
                v["op"] = "robot_add";
                v["node"] = {{"id", iv.node->id}, {"kind", to_string(iv.node->kind)}};
                json es = json::array();
                for (const auto& [a, b] : iv.edges) es.push_back(json::array({a, b}));
                v["edges"] = std::move(es);
                break;
            }
            case Intervention::Op::RobotRemove:
                v["op"] = "robot_remove";
                v["robot"] = iv.robot;
                v["policy"] = iv.policy == RemovePolicy::Immediate ? "immediate"
                                                                   : "after_current_job";
                break;
        }
        doc["interventions"].push_back(std::move(v));
    }
    return doc.dump(2) + "\n";
}

}  // namespace masim
