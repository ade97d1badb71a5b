#include "masim/engine.hpp"

#include <algorithm>
#include <cassert>

namespace masim {

const char* to_string(RunStatus s) {
    switch (s) {
        case RunStatus::Completed: return "completed";
        case RunStatus::IncompleteQuiescent: return "incomplete_quiescent";
        case RunStatus::TMaxReached: return "t_max_reached";
    }
    return "?";
}

std::string StallReport::describe() const {
    std::string out = "wait-for chain:";
    for (const auto& link : chain) out += " " + link;
    return out;
}

std::optional<StallReport> detect_stall(const WaitForGraph& graph) {
    // Edge waiter -> holder of a needed resource. A stall is a cycle; a
    // holder that is not itself waiting has no outgoing edge and ends any
    // path harmlessly.
    std::map<AgentId, std::set<AgentId>> edges;
    for (const auto& [waiter, needs] : graph.needs) {
        for (const auto& r : needs) {
            auto h = graph.holds.find(r);
            if (h != graph.holds.end() && h->second != waiter) {
                edges[waiter].insert(h->second);
            }
        }
    }
    std::map<AgentId, int> color;  // 0 unseen, 1 in stack, 2 done
    std::vector<AgentId> stack;
    std::optional<StallReport> found;

    auto dfs = [&](auto&& self, const AgentId& v) -> bool {
        color[v] = 1;
        stack.push_back(v);
        for (const auto& w : edges[v]) {
            if (color[w] == 1) {
                StallReport report;
                auto it = std::find(stack.begin(), stack.end(), w);
                for (; it != stack.end(); ++it) report.chain.push_back(*it);
                found = std::move(report);
                return true;
            }
            if (color[w] == 0 && self(self, w)) return true;
        }
        stack.pop_back();
        color[v] = 2;
        return false;
    };
    for (const auto& [v, _] : edges) {
        if (color[v] == 0 && dfs(dfs, v)) break;
    }
    return found;
}

bool RunResult::all_jobs_completed() const {
    for (const auto& [id, o] : jobs) {
        if (!o.completed()) return false;
    }
    return true;
}

Engine::Engine(const Scenario& scenario)
    : scenario_(scenario), jd_(scenario.distributor_node()), sampler_(scenario.engine.seed) {
    scenario_.validate();
    topology_.hop_latency = scenario_.engine.hop_latency;
    global_sequence_ = scenario_.initial_sequence();

    for (const auto& n : scenario_.nodes) {
        topology_.add_node(n.id, n.kind);
        if (n.kind == NodeKind::Robotic) {
            RobotNode r;
            r.id = n.id;
            r.transition_db = global_sequence_;
            if (n.battery) r.battery = n.battery;
            robots_.emplace(n.id, std::move(r));
        }
    }
    for (const auto& [a, b] : scenario_.edges) topology_.connect(a, b);

    trace_.set_fingerprint(scenario_.name + ":mode=decentralized:seed=" +
                           std::to_string(scenario_.engine.seed));

    for (std::size_t i = 0; i < scenario_.jobs.size(); ++i) {
        schedule(scenario_.jobs[i].arrival_time, Pending::Kind::JobArrival, "", i);
        ++pending_arrivals_;
    }
    for (std::size_t i = 0; i < scenario_.interventions.size(); ++i) {
        schedule(scenario_.interventions[i].at, Pending::Kind::Intervention, "", i);
        ++pending_interventions_;
    }
}

void Engine::schedule(Tick at, Pending::Kind kind, std::string id, std::size_t index) {
    if (at < now_) {
        throw ProtocolError("engine: scheduling into the past (t=" + std::to_string(at) +
                            " < now=" + std::to_string(now_) + ")");
    }
    queue_.push(Pending{at, next_seq(), kind, std::move(id), index});
}

TraceEvent& Engine::emit(EventKind kind) {
    TraceEvent e;
    e.at = now_;
    e.seq = next_seq();
    e.kind = kind;
    trace_.append(std::move(e));
    // Safe: fields other than (at, seq) do not affect ordering checks.
    return const_cast<TraceEvent&>(trace_.events().back());
}

RunResult Engine::run_to_completion() {
    RunResult result;
    bool hit_tmax = false;
    while (!queue_.empty()) {
        const Pending top = queue_.top();
        if (top.at > scenario_.engine.t_max) {
            hit_tmax = true;
            break;
        }
        queue_.pop();
        now_ = top.at;
        handle(top);
        if (quiescent_done()) break;
    }
    if (hit_tmax) {
        result.status = RunStatus::TMaxReached;
    } else if (quiescent_done()) {
        result.status = RunStatus::Completed;
    } else {
        result.status = RunStatus::IncompleteQuiescent;
    }
    finalize(result);
    return result;
}

bool Engine::quiescent_done() const {
    return pending_arrivals_ == 0 && pending_interventions_ == 0 && active_job_agents_ == 0 &&
           active_seq_agents_ == 0 && jd_.pending_empty() && waiting_floating_.empty();
}

void Engine::handle(const Pending& p) {
    switch (p.kind) {
        case Pending::Kind::JobArrival: handle_job_arrival(p.index); break;
        case Pending::Kind::Intervention: handle_intervention(p.index); break;
        case Pending::Kind::AgentStep: handle_agent_step(p.id); break;
        case Pending::Kind::AgentReturnArrive: handle_agent_return(p.id); break;
        case Pending::Kind::SeqAgentStep: handle_seq_agent_step(p.id); break;
        case Pending::Kind::Wake: handle_wake(p.id); break;
    }
}

void Engine::handle_job_arrival(std::size_t index) {
    const JobSpec& job = scenario_.jobs[index];
    --pending_arrivals_;

    auto& ev = emit(EventKind::JobArrival);
    ev.job = job.job_id;

    JobOutcome outcome;
    outcome.tasks_total = job.task_count();
    outcomes_[job.job_id] = outcome;
    job_specs_[job.job_id] = job;
    for (const auto& plan : partition_job(job)) {
        for (const auto& t : plan.tasks) {
            chain_of_task_[job.job_id][t.task_id] = plan.chain_index;
        }
    }

    jd_.submit_job(job, now_);
    mint_agents(jd_.try_dispatch(now_));
}

void Engine::mint_agents(const std::vector<AgentAssignment>& assignments) {
    for (const auto& a : assignments) {
        MobileAgent m;
        m.id = a.agent_id;
        m.assignment = a;
        m.at = jd_.node_id();
        m.phase = AgentPhase::Inspecting;
        auto [it, inserted] = agents_.emplace(m.id, std::move(m));
        if (!inserted) {
            throw ProtocolError("engine: duplicate agent id " + a.agent_id);
        }
        if (!a.floating) ++active_job_agents_;
        schedule(now_, Pending::Kind::AgentStep, a.agent_id);
    }
}

void Engine::inject_assignment_raw(const AgentAssignment& assignment, Tick at) {
    MobileAgent m;
    m.id = assignment.agent_id;
    m.assignment = assignment;
    m.at = jd_.node_id();
    m.phase = AgentPhase::Inspecting;
    m.ledger_bound = false;
    agents_.emplace(m.id, std::move(m));
    if (!assignment.floating) ++active_job_agents_;
    schedule(at, Pending::Kind::AgentStep, assignment.agent_id);
}

JobId Engine::exec_job_context(const MobileAgent& agent, const RobotNode& robot) const {
    if (!agent.assignment.floating) return agent.assignment.job_id;
    if (robot.state.is_free() || robot.state.job.empty()) {
        throw ProtocolError("engine: floating agent " + agent.id + " matched unbound robot " +
                            robot.id);
    }
    return robot.state.job;
}

bool Engine::matches(const MobileAgent& agent, const RobotNode& robot) const {
    if (!robot.active() || robot.executing) return false;
    const SIStep& step = agent.current_step();
    if (agent.assignment.floating) {
        return !robot.state.is_free() && robot.state.task == step.match.task;
    }
    if (agent.bound_robot && robot.id != *agent.bound_robot) return false;
    if (!(robot.state == step.match)) return false;
    if (step.match.is_free()) return !robot.bound_job.has_value();
    return robot.bound_job.has_value() && *robot.bound_job == agent.assignment.job_id;
}

std::set<NodeId> Engine::reachable_active_robots(const NodeId& from) const {
    std::set<NodeId> out;
    for (const auto& n : topology_.reachable_from(from)) {
        auto it = robots_.find(n);
        if (it != robots_.end() && it->second.active()) out.insert(n);
    }
    return out;
}

void Engine::handle_agent_step(const AgentId& id) {
    auto it = agents_.find(id);
    if (it == agents_.end()) return;
    MobileAgent& agent = it->second;
    switch (agent.phase) {
        case AgentPhase::Migrating: {
            if (now_ < agent.arrive_at) return;
            agent.at = agent.toward;
            auto& ev = emit(EventKind::AgentHop);
            ev.agent = agent.id;
            ev.robot = agent.at;
            ev.job = agent.assignment.floating ? JobId{} : agent.assignment.job_id;
            agent.phase = AgentPhase::Inspecting;
            inspect_or_move(agent);
            break;
        }
        case AgentPhase::Inspecting:
            inspect_or_move(agent);
            break;
        case AgentPhase::Resident:
            if (now_ >= agent.until) finish_execution(agent);
            break;
        default:
            break;  // stale event for a parked/returning/retired agent
    }
}

void Engine::inspect_or_move(MobileAgent& agent) {
    if (agent.recall) {
        begin_return(agent);
        return;
    }
    bool on_robot = topology_.has_node(agent.at) &&
                    topology_.kind_of(agent.at) == NodeKind::Robotic;
    if (on_robot) {
        auto rit = robots_.find(agent.at);
        if (rit != robots_.end() && rit->second.active()) {
            auto& ev = emit(EventKind::AgentInspect);
            ev.agent = agent.id;
            ev.robot = agent.at;
            ev.state_from = rit->second.state.to_string();
            if (matches(agent, rit->second)) {
                begin_execution(agent, rit->second);
                return;
            }
        }
    }
    if (topology_.hop_latency == 0) {
        // Zero-cost migration degenerates into an instantaneous sweep; park
        // once every reachable robot has been inspected this tick, and wake
        // on the next world change.
        if (agent.sweep_tick != now_) {
            agent.sweep_tick = now_;
            agent.sweep_seen.clear();
        }
        if (on_robot && robots_.count(agent.at) && robots_.at(agent.at).active()) {
            agent.sweep_seen.insert(agent.at);
        }
        auto targets = reachable_active_robots(agent.at);
        if (std::includes(agent.sweep_seen.begin(), agent.sweep_seen.end(), targets.begin(),
                          targets.end())) {
            park(agent);
            return;
        }
    }
    auto hop = next_hop_conscientious(topology_, agent.history, agent.at, now_);
    if (!hop) {
        // Isolated: wait in place one tick and retry, links may reappear.
        agent.phase = AgentPhase::Inspecting;
        schedule(now_ + 1, Pending::Kind::AgentStep, agent.id);
        return;
    }
    agent.phase = AgentPhase::Migrating;
    agent.toward = *hop;
    agent.arrive_at = now_ + topology_.hop_latency;
    schedule(agent.arrive_at, Pending::Kind::AgentStep, agent.id);
}

void Engine::begin_execution(MobileAgent& agent, RobotNode& robot) {
    const SIStep& step = agent.current_step();
    JobId context = exec_job_context(agent, robot);

    auto conflict = acquire_resources(robots_, robot.id, step.task.resource_ids);
    if (conflict) {
        if (verification_) {
            throw ProtocolError("engine: resource " + *conflict + " busy when agent " + agent.id +
                                " reached robot " + robot.id +
                                " (the ledger should prevent contention)");
        }
        // Wait at the robot and retry when something is released.
        agent.phase = AgentPhase::Inspecting;
        if (std::find(blocked_.begin(), blocked_.end(), agent.id) == blocked_.end()) {
            blocked_.push_back(agent.id);
        }
        return;
    }

    if (robot.state.is_free() && !agent.assignment.floating) {
        robot.bound_job = agent.assignment.job_id;
    }
    if (!agent.bound_robot && !agent.assignment.floating) {
        agent.bound_robot = robot.id;
        agent.bound_job = context;
    }

    auto& acq = emit(EventKind::ResourceAcquire);
    acq.agent = agent.id;
    acq.robot = robot.id;
    acq.job = context;
    acq.task = step.task.task_id;
    acq.resources.assign(step.task.resource_ids.begin(), step.task.resource_ids.end());

    Tick duration = sampler_.sample(agent.id, step.task.duration);

    auto& beg = emit(EventKind::ExecBegin);
    beg.agent = agent.id;
    beg.robot = robot.id;
    beg.job = context;
    beg.task = step.task.task_id;

    robot.executing = true;
    agent.phase = AgentPhase::Resident;
    agent.at = robot.id;
    agent.exec_began = now_;
    agent.until = now_ + duration;
    schedule(agent.until, Pending::Kind::AgentStep, agent.id);
}

void Engine::finish_execution(MobileAgent& agent) {
    RobotNode& robot = robots_.at(agent.at);
    const SIStep& step = agent.current_step();
    JobId context = exec_job_context(agent, robot);

    auto& end = emit(EventKind::ExecEnd);
    end.agent = agent.id;
    end.robot = robot.id;
    end.job = context;
    end.task = step.task.task_id;
    last_exec_end_ = now_;

    robot.executing = false;
    robot.battery_used += now_ - agent.exec_began;

    release_resources(robots_, robot.id, step.task.resource_ids);
    auto& rel = emit(EventKind::ResourceRelease);
    rel.agent = agent.id;
    rel.robot = robot.id;
    rel.job = context;
    rel.task = step.task.task_id;
    rel.resources.assign(step.task.resource_ids.begin(), step.task.resource_ids.end());

    auto oc = outcomes_.find(context);
    if (oc != outcomes_.end()) {
        oc->second.completion = now_;
        if (!agent.assignment.floating) ++oc->second.tasks_done;
    }

    // Next state: the robot's transition database decides when it knows the
    // completed task (on-the-fly edits take effect here); otherwise use the
    // state carried in the agent's SI.
    StateId from = robot.state;
    StateId next;
    DbSuccessor succ = db_successor(robot, step.task.task_id);
    if (succ.found) {
        next = succ.next ? StateId::task_state(context, *succ.next) : StateId::free_state();
    } else if (step.next.is_template()) {
        next = StateId::task_state(context, step.next.task);
    } else {
        next = step.next;
    }
    robot.state = next;
    if (next.is_free()) robot.bound_job.reset();

    auto& upd = emit(EventKind::StateUpdate);
    upd.agent = agent.id;
    upd.robot = robot.id;
    upd.job = context;
    upd.state_from = from.to_string();
    upd.state_to = next.to_string();

    if (robot.battery && !robot.pending_removal &&
        robot.battery->budget - robot.battery_used <= robot.battery->threshold) {
        robot.pending_removal = true;
    }

    bool removed_now = false;
    if (robot.pending_removal && next.is_free()) {
        perform_removal(robot);
        removed_now = true;
    }

    wake_parked();
    retry_blocked();
    if (!recall_tasks_.empty()) check_floating_recalls();

    ++agent.step_cursor;
    if (agent.assignment.floating) {
        agent.bound_robot.reset();
        agent.bound_job.reset();
        // A task carrier cycles on its single step until recalled.
        agent.step_cursor = 0;
    }
    if (agent.recall || agent.done()) {
        begin_return(agent);
        return;
    }
    if (!removed_now && robot.active() && matches(agent, robot)) {
        // Consecutive tasks bound to the same robot run back to back.
        begin_execution(agent, robot);
        return;
    }
    agent.phase = AgentPhase::Inspecting;
    inspect_or_move(agent);
}

void Engine::begin_return(MobileAgent& agent) {
    agent.phase = AgentPhase::Returning;
    agent.arrive_at = now_ + scenario_.engine.return_latency;
    std::erase(parked_order_, agent.id);
    std::erase(blocked_, agent.id);
    schedule(agent.arrive_at, Pending::Kind::AgentReturnArrive, agent.id);
}

void Engine::handle_agent_return(const AgentId& id) {
    MobileAgent& agent = agents_.at(id);
    if (agent.phase != AgentPhase::Returning) return;

    auto& ev = emit(EventKind::AgentReturn);
    ev.agent = agent.id;
    ev.job = agent.assignment.floating ? JobId{} : agent.assignment.job_id;

    agent.phase = AgentPhase::Retired;
    if (!agent.assignment.floating) --active_job_agents_;

    std::vector<AgentAssignment> released;
    if (agent.ledger_bound) {
        released = jd_.on_agent_return(id, now_);
    }

    // Freed resources may unblock a waiting on-the-fly carrier.
    for (std::size_t i = 0; i < waiting_floating_.size();) {
        if (jd_.bind_direct(waiting_floating_[i])) {
            mint_agents({waiting_floating_[i]});
            waiting_floating_.erase(waiting_floating_.begin() + static_cast<long>(i));
        } else {
            ++i;
        }
    }
    mint_agents(released);
}

void Engine::park(MobileAgent& agent) {
    agent.phase = AgentPhase::Parked;
    agent.sweep_tick = -1;
    agent.sweep_seen.clear();
    if (std::find(parked_order_.begin(), parked_order_.end(), agent.id) == parked_order_.end()) {
        parked_order_.push_back(agent.id);
    }
}

void Engine::wake_parked() {
    for (const auto& id : parked_order_) {
        auto it = agents_.find(id);
        if (it == agents_.end()) continue;
        MobileAgent& a = it->second;
        if (a.phase == AgentPhase::Parked && !a.wake_scheduled) {
            a.wake_scheduled = true;
            schedule(now_, Pending::Kind::Wake, id);
        }
    }
    for (auto& [id, sa] : seq_agents_) {
        if (sa.parked && !sa.terminated) {
            sa.parked = false;
            schedule(now_, Pending::Kind::SeqAgentStep, id);
        }
    }
}

void Engine::handle_wake(const AgentId& id) {
    auto it = agents_.find(id);
    if (it == agents_.end()) return;
    MobileAgent& agent = it->second;
    agent.wake_scheduled = false;
    if (agent.phase != AgentPhase::Parked) return;
    std::erase(parked_order_, id);
    agent.phase = AgentPhase::Inspecting;
    agent.sweep_tick = -1;
    inspect_or_move(agent);
}

void Engine::retry_blocked() {
    if (blocked_.empty()) return;
    std::vector<AgentId> retry;
    retry.swap(blocked_);
    for (const auto& id : retry) {
        auto it = agents_.find(id);
        if (it != agents_.end() && it->second.phase == AgentPhase::Inspecting) {
            schedule(now_, Pending::Kind::AgentStep, id);
        }
    }
}

void Engine::handle_intervention(std::size_t index) {
    const Intervention& iv = scenario_.interventions[index];
    --pending_interventions_;
    switch (iv.op) {
        case Intervention::Op::SeqInsert: {
            auto& ev = emit(EventKind::SeqEdit);
            ev.task = iv.task->task_id;
            ev.state_to = "insert";

            SequenceEdit edit;
            edit.op = SequenceEdit::Op::Insert;
            edit.task = iv.task;
            edit.after = iv.after;
            apply_edit(global_sequence_, edit);

            std::optional<TaskId> hint;
            auto pos = std::find(global_sequence_.begin(), global_sequence_.end(),
                                 iv.task->task_id);
            if (pos != global_sequence_.end() && std::next(pos) != global_sequence_.end()) {
                hint = *std::next(pos);
            }
            recall_tasks_.erase(iv.task->task_id);  // re-inserted
            release_sequence_agent(edit);
            release_floating_carrier(*iv.task, hint);
            break;
        }
        case Intervention::Op::SeqDelete: {
            auto& ev = emit(EventKind::SeqEdit);
            ev.task = iv.target;
            ev.state_to = "delete";

            SequenceEdit edit;
            edit.op = SequenceEdit::Op::Delete;
            edit.target = iv.target;
            apply_edit(global_sequence_, edit);

            recall_tasks_.insert(iv.target);
            std::erase_if(waiting_floating_, [&](const AgentAssignment& a) {
                return a.si_chain.steps().front().task.task_id == iv.target;
            });
            release_sequence_agent(edit);
            check_floating_recalls();
            break;
        }
        case Intervention::Op::SeqReorder: {
            auto& ev = emit(EventKind::SeqEdit);
            ev.state_to = "reorder";

            SequenceEdit edit;
            edit.op = SequenceEdit::Op::Reorder;
            edit.sequence = iv.sequence;
            apply_edit(global_sequence_, edit);
            release_sequence_agent(edit);
            break;
        }
        case Intervention::Op::RobotAdd: {
            const NodeDecl& decl = *iv.node;
            topology_.add_node(decl.id, NodeKind::Robotic);
            for (const auto& [a, b] : iv.edges) topology_.connect(a, b);
            RobotNode r;
            r.id = decl.id;
            r.transition_db = global_sequence_;
            if (decl.battery) r.battery = decl.battery;
            robots_.emplace(decl.id, std::move(r));

            auto& ev = emit(EventKind::RobotAdd);
            ev.robot = decl.id;
            wake_parked();
            break;
        }
        case Intervention::Op::RobotRemove: {
            auto it = robots_.find(iv.robot);
            if (it == robots_.end()) {
                throw ValidationError("engine: robot_remove references unknown robot " +
                                      iv.robot);
            }
            RobotNode& robot = it->second;
            if (!robot.active()) break;
            if (iv.policy == RemovePolicy::Immediate) {
                perform_removal(robot);
            } else {
                if (robot.state.is_free() && !robot.executing) {
                    perform_removal(robot);
                } else {
                    robot.pending_removal = true;
                }
            }
            break;
        }
    }
}

void Engine::release_sequence_agent(const SequenceEdit& edit) {
    SequenceAgent sa;
    sa.id = "museq:" + std::to_string(++seq_agent_release_counter_);
    sa.edit = edit;
    sa.at = jd_.node_id();
    for (const auto& [id, r] : robots_) {
        if (r.active()) sa.pending_robots.insert(id);
    }
    ++active_seq_agents_;
    auto rid = sa.id;
    seq_agents_.emplace(rid, std::move(sa));
    schedule(now_, Pending::Kind::SeqAgentStep, rid);
}

void Engine::release_floating_carrier(const TaskSpec& task, std::optional<TaskId> hint_next) {
    AgentAssignment a;
    a.agent_id = "mu:otfp:" + task.task_id + ":" + std::to_string(++floating_counter_);
    a.floating = true;
    StateId next = hint_next ? StateId::template_state(*hint_next) : StateId::free_state();
    a.si_chain = SIChain({SIStep{StateId::template_state(task.task_id), task, next}});
    a.resource_claim = task.resource_ids;
    if (jd_.bind_direct(a)) {
        mint_agents({a});
    } else {
        waiting_floating_.push_back(std::move(a));
    }
}

void Engine::check_floating_recalls() {
    for (auto& [id, agent] : agents_) {
        if (!agent.assignment.floating || agent.phase == AgentPhase::Retired || agent.recall) {
            continue;
        }
        const TaskId& task = agent.assignment.si_chain.steps().front().task.task_id;
        if (!recall_tasks_.count(task)) continue;
        if (std::find(global_sequence_.begin(), global_sequence_.end(), task) !=
            global_sequence_.end()) {
            continue;
        }
        bool referenced = false;
        for (const auto& [rid, r] : robots_) {
            if (r.active() && !r.state.is_free() && r.state.task == task) {
                referenced = true;
                break;
            }
        }
        if (referenced) continue;
        agent.recall = true;
        if (agent.phase == AgentPhase::Parked && !agent.wake_scheduled) {
            agent.wake_scheduled = true;
            schedule(now_, Pending::Kind::Wake, id);
        }
    }
}

void Engine::handle_seq_agent_step(const AgentId& id) {
    SequenceAgent& sa = seq_agents_.at(id);
    if (sa.terminated) return;

    if (!sa.toward.empty() && now_ >= sa.arrive_at) {
        sa.at = sa.toward;
        sa.toward.clear();
        auto& ev = emit(EventKind::AgentHop);
        ev.agent = sa.id;
        ev.robot = sa.at;
    }

    // Robots removed since release no longer need the edit.
    std::erase_if(sa.pending_robots, [&](const NodeId& n) {
        auto it = robots_.find(n);
        return it == robots_.end() || !it->second.active();
    });

    auto rit = robots_.find(sa.at);
    if (rit != robots_.end() && rit->second.active() && !sa.visited.count(sa.at)) {
        apply_edit(rit->second.transition_db, sa.edit);
        sa.visited.insert(sa.at);
        auto& ev = emit(EventKind::SeqEdit);
        ev.agent = sa.id;
        ev.robot = sa.at;
        switch (sa.edit.op) {
            case SequenceEdit::Op::Insert:
                ev.task = sa.edit.task->task_id;
                ev.state_to = "insert";
                break;
            case SequenceEdit::Op::Delete:
                ev.task = sa.edit.target;
                ev.state_to = "delete";
                break;
            case SequenceEdit::Op::Reorder:
                ev.state_to = "reorder";
                break;
        }
    }

    if (sa.complete()) {
        sa.terminated = true;
        --active_seq_agents_;
        if (!recall_tasks_.empty()) check_floating_recalls();
        return;
    }

    if (topology_.hop_latency == 0) {
        // Unreachable robots cannot be served until the network changes.
        auto reachable = reachable_active_robots(sa.at);
        bool all_reachable_done = true;
        for (const auto& r : sa.pending_robots) {
            if (reachable.count(r) && !sa.visited.count(r)) {
                all_reachable_done = false;
                break;
            }
        }
        if (all_reachable_done) {
            sa.parked = true;
            return;
        }
    }

    auto hop = next_hop_conscientious(topology_, sa.history, sa.at, now_);
    if (!hop) {
        schedule(now_ + 1, Pending::Kind::SeqAgentStep, sa.id);
        return;
    }
    sa.toward = *hop;
    sa.arrive_at = now_ + topology_.hop_latency;
    schedule(sa.arrive_at, Pending::Kind::SeqAgentStep, sa.id);
}

void Engine::perform_removal(RobotNode& robot) {
    AgentId resident;
    if (robot.executing) {
        for (const auto& [id, a] : agents_) {
            if (a.phase == AgentPhase::Resident && a.at == robot.id) {
                resident = id;
                break;
            }
        }
    }

    auto& ev = emit(EventKind::RobotRemove);
    ev.robot = robot.id;

    JobId broken_job;
    int broken_chain = -1;
    AgentId broken_agent;

    if (!resident.empty()) {
        MobileAgent& agent = agents_.at(resident);
        const SIStep& step = agent.current_step();
        // Abort: the open ExecBegin is terminated by the RobotRemove row.
        release_resources(robots_, robot.id, step.task.resource_ids);
        auto& rel = emit(EventKind::ResourceRelease);
        rel.agent = agent.id;
        rel.robot = robot.id;
        rel.resources.assign(step.task.resource_ids.begin(), step.task.resource_ids.end());
        robot.executing = false;

        if (step.match.is_free() && !agent.assignment.floating) {
            // First task of its chain: nothing committed to this robot yet,
            // search for another free robot and re-execute.
            agent.bound_robot.reset();
            agent.bound_job.reset();
            agent.phase = AgentPhase::Inspecting;
            schedule(now_, Pending::Kind::AgentStep, agent.id);
        } else if (agent.assignment.floating) {
            agent.bound_robot.reset();
            agent.bound_job.reset();
            agent.phase = AgentPhase::Inspecting;
            schedule(now_, Pending::Kind::AgentStep, agent.id);
            broken_job = robot.state.job;
        } else {
            broken_job = agent.assignment.job_id;
            broken_chain = agent.assignment.chain_index;
            broken_agent = agent.id;
        }
    } else if (!robot.state.is_free()) {
        // Removed while waiting mid-chain: the chain's later states existed
        // only here.
        broken_job = robot.state.job;
        auto cit = chain_of_task_.find(broken_job);
        if (cit != chain_of_task_.end()) {
            auto tit = cit->second.find(robot.state.task);
            if (tit != cit->second.end()) broken_chain = tit->second;
        }
    }

    robot.status = RobotStatus::Removed;
    robot.state = StateId::free_state();
    robot.bound_job.reset();
    robot.pending_removal = false;

    if (broken_chain >= 0) fail_chain(broken_job, broken_chain, broken_agent);
}

void Engine::fail_chain(const JobId& job, int chain_index, const AgentId& aborted) {
    auto oit = outcomes_.find(job);
    if (oit != outcomes_.end()) oit->second.failed = true;
    jd_.abandon_chain(job, chain_index);
    for (auto& [id, agent] : agents_) {
        if (agent.assignment.floating || agent.phase == AgentPhase::Retired) continue;
        if (agent.assignment.job_id != job || agent.assignment.chain_index != chain_index) {
            continue;
        }
        agent.recall = true;
        agent.failed = true;
        if (id == aborted) {
            agent.phase = AgentPhase::Inspecting;
            schedule(now_, Pending::Kind::AgentStep, id);
        } else if (agent.phase == AgentPhase::Parked && !agent.wake_scheduled) {
            agent.wake_scheduled = true;
            schedule(now_, Pending::Kind::Wake, id);
        } else if (agent.phase == AgentPhase::Inspecting &&
                   std::find(blocked_.begin(), blocked_.end(), id) != blocked_.end()) {
            std::erase(blocked_, id);
            schedule(now_, Pending::Kind::AgentStep, id);
        }
    }
}

WaitForGraph Engine::build_wait_graph() const {
    WaitForGraph g;
    g.holds = jd_.bound();
    for (const auto& [agent, claim] : jd_.pending_head_claims()) {
        g.needs[agent] = claim;
    }
    for (const auto& id : blocked_) {
        auto it = agents_.find(id);
        if (it == agents_.end() || it->second.done()) continue;
        const auto& rs = it->second.current_step().task.resource_ids;
        g.needs[id].insert(rs.begin(), rs.end());
        // Physical holders count too when the ledger was bypassed.
    }
    for (const auto& [rid, robot] : robots_) {
        for (const auto& res : robot.held) {
            for (const auto& [aid, a] : agents_) {
                if (a.phase == AgentPhase::Resident && a.at == rid) {
                    g.holds.emplace(res, aid);
                }
            }
        }
    }
    return g;
}

void Engine::finalize(RunResult& result) {
    if (result.status == RunStatus::Completed) {
        for (auto& [id, agent] : agents_) {
            if (!agent.assignment.floating || agent.phase == AgentPhase::Retired) continue;
            auto& ev = emit(EventKind::AgentReturn);
            ev.agent = id;
            agent.phase = AgentPhase::Retired;
            if (agent.ledger_bound) jd_.on_agent_return(id, now_);
        }
        waiting_floating_.clear();
    } else {
        result.stall = detect_stall(build_wait_graph());
    }
    result.makespan = last_exec_end_;
    result.jobs = outcomes_;
    result.trace = std::move(trace_);
}

RunResult run(const Scenario& scenario) {
    Engine engine(scenario);
    return engine.run_to_completion();
}

}  // namespace masim
