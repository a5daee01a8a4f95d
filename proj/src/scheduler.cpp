#include "pnm/scheduler.hpp"

#include <algorithm>
#include <thread>

namespace pnm {

const char* to_string(TicketStatus status) {
  switch (status) {
  case TicketStatus::open: return "open";
  case TicketStatus::answered: return "answered";
  case TicketStatus::abandoned: return "abandoned";
  }
  return "?";
}

/// Runs a registered task as a child machine on behalf of an action slot.
class SubtaskBehavior : public Behavior {
public:
  SubtaskBehavior(Scheduler& scheduler, std::string task) : scheduler_(scheduler), task_(std::move(task)) {}

  void on_start(ActionContext& ctx) override {
    const auto fg = scheduler_.foreground();
    child_ = scheduler_.spawn(task_, ctx.goal(), ctx.instance(), fg && *fg == ctx.machine());
  }
  void on_preempt(ActionContext& ctx) override {
    ctx.finish(Outcome::preempted);
    if (child_ && !terminal(scheduler_.status(*child_)))
      scheduler_.stop_machine(*child_, Status::failed, "preempted by parent");
  }

private:
  Scheduler& scheduler_;
  std::string task_;
  std::optional<MachineId> child_;
};

Scheduler::Scheduler(kb::GlobalKBPort& global, ActionRegistry registry, FaultPlan faults, std::uint64_t seed,
                     SchedulerOptions options)
    : global_(global), registry_(std::move(registry)), options_(options),
      runtime_(std::make_unique<ActionRuntime>(registry_, *this, std::move(faults), seed)) {}

Scheduler::~Scheduler() = default;

void Scheduler::register_task(CompiledTask task, std::vector<std::string> params) {
  const std::string name = task.name;
  if (tasks_.contains(name)) throw std::invalid_argument("task already registered: " + name);
  if (registry_.find(name)) throw std::invalid_argument("task name clashes with an action: " + name);
  tasks_.emplace(name, std::move(task));
  registry_.add({name, ActionKind::plain, std::move(params), {},
                 [this, name] { return std::make_unique<SubtaskBehavior>(*this, name); }});
}

MachineEntry& Scheduler::mutable_entry(MachineId id) {
  auto it = machines_.find(id);
  if (it == machines_.end()) throw UnknownMachine("no machine with id " + std::to_string(id));
  return it->second;
}

const MachineEntry& Scheduler::entry(MachineId id) const {
  auto it = machines_.find(id);
  if (it == machines_.end()) throw UnknownMachine("no machine with id " + std::to_string(id));
  return it->second;
}

kb::KnowledgeStore& Scheduler::local_store(MachineId machine) { return mutable_entry(machine).local; }

std::vector<MachineId> Scheduler::machines() const {
  std::vector<MachineId> ids;
  for (const auto& [id, e] : machines_) ids.push_back(id);
  return ids;
}

const Ticket& Scheduler::ticket(TicketId id) const {
  auto it = tickets_.find(id);
  if (it == tickets_.end()) throw NoOpenTicket("no ticket " + std::to_string(id));
  return it->second;
}

std::vector<Ticket> Scheduler::open_tickets(std::optional<MachineId> machine) const {
  std::vector<Ticket> out;
  for (const auto& [id, t] : tickets_)
    if (t.status == TicketStatus::open && (!machine || t.machine == *machine)) out.push_back(t);
  return out;
}

std::optional<MachineId> Scheduler::foreground() const {
  for (auto it = focus_.rbegin(); it != focus_.rend(); ++it) {
    const Status s = entry(*it).machine.status();
    if (!terminal(s) && s != Status::paused) return *it;
  }
  return std::nullopt;
}

void Scheduler::focus(MachineId id) {
  focus_.erase(std::remove(focus_.begin(), focus_.end(), id), focus_.end());
  focus_.push_back(id);
}

void Scheduler::follow_foreground(std::optional<MachineId> before) {
  const auto after = foreground();
  if (after && after != before) reprompt(mutable_entry(*after));
}

void Scheduler::reprompt(MachineEntry& e) {
  std::optional<TicketId> newest;
  for (TicketId id : e.tickets)
    if (tickets_.at(id).status == TicketStatus::open) newest = id;
  if (!newest) return;
  const Ticket& t = tickets_.at(*newest);
  trace_.emit(now_, e.id, "ticket-open",
              {{"ticket", t.id}, {"name", t.name}, {"action", t.action}, {"reprompt", true}});
}

void Scheduler::sync_open(MachineEntry& e) {
  std::size_t n = 0;
  for (TicketId id : e.tickets) n += tickets_.at(id).status == TicketStatus::open;
  e.machine.set_open_queries(n);
}

void Scheduler::set_status(MachineEntry& e, Status to, const std::string& cause) {
  const Status from = e.machine.status();
  e.machine.set_status(to);
  Json payload{{"from", to_string(from)}, {"to", to_string(to)}, {"cause", cause}};
  if (!e.reason.empty() && terminal(to)) payload["reason"] = e.reason;
  trace_.emit(now_, e.id, "status-change", std::move(payload));
}

MachineId Scheduler::launch(const std::string& task, const kb::Goal& args) {
  return spawn(task, args, std::nullopt, true);
}

MachineId Scheduler::spawn(const std::string& task, const kb::Goal& args, std::optional<ActionInstanceId> parent,
                           bool take_focus) {
  auto it = tasks_.find(task);
  if (it == tasks_.end()) throw UnknownTask("unknown task: " + task);
  const MachineId id = next_machine_++;
  MachineEntry& e = machines_[id];
  e.id = id;
  e.task = task;
  e.compiled = &it->second;
  e.machine = it->second.machine;
  e.machine.reset();
  e.parent = parent;
  for (const auto& [k, v] : it->second.initial_knowledge) e.local.set(k, v);
  for (const auto& [k, v] : args)
    if (!v.absent()) e.local.set(k, v);
  if (parent) children_[*parent] = id;

  e.machine.set_status(Status::running);
  Json payload{{"from", "ready"}, {"to", "running"}, {"cause", "launch"}, {"task", task}, {"args", to_json(args)}};
  if (parent) payload["parent_action"] = *parent;
  trace_.emit(now_, id, "status-change", std::move(payload));
  if (take_focus) focus(id);
  return id;
}

RoutingReport Scheduler::answer(Ticket& t, const kb::Value& value) {
  MachineEntry& e = mutable_entry(t.machine);
  t.status = TicketStatus::answered;
  sync_open(e);
  trace_.emit(now_, e.id, "ticket-answered",
              {{"ticket", t.id}, {"name", t.name}, {"action", t.action}, {"value", to_json(value)}});
  if (runtime_->active(t.action)) runtime_->deliver_answer(t.action, t.name, value);
  if (e.machine.status() == Status::blocked) set_status(e, Status::running, "answer");
  if (!terminal(e.machine.status()) && e.machine.status() != Status::paused) focus(e.id);
  return {t.id, t.machine, t.action, t.name};
}

RoutingReport Scheduler::deliver_answer(std::optional<TicketId> ticket, const kb::Value& value,
                                        const std::optional<std::string>& name) {
  if (ticket) {
    auto it = tickets_.find(*ticket);
    if (it == tickets_.end() || it->second.status != TicketStatus::open)
      throw NoOpenTicket("ticket " + std::to_string(*ticket) + " is not open");
    if (name && it->second.name != *name)
      throw NoOpenTicket("ticket " + std::to_string(*ticket) + " asks for '" + it->second.name + "'");
    return answer(it->second, value);
  }
  const auto fg = foreground();
  if (!fg) throw NoOpenTicket("no foreground machine to answer");
  return deliver_answer_to(*fg, value, name);
}

RoutingReport Scheduler::deliver_answer_to(MachineId machine, const kb::Value& value,
                                           const std::optional<std::string>& name) {
  const MachineEntry& e = entry(machine);
  Ticket* target = nullptr;
  std::size_t candidates = 0;
  for (TicketId id : e.tickets) {
    Ticket& t = tickets_.at(id);
    if (t.status != TicketStatus::open || (name && t.name != *name)) continue;
    ++candidates;
    target = &t;
  }
  if (candidates == 0) throw NoOpenTicket("machine " + std::to_string(machine) + " has no open question");
  if (candidates > 1)
    throw AmbiguousTarget("machine " + std::to_string(machine) + " has " + std::to_string(candidates) +
                          " open questions; give a ticket id");
  return answer(*target, value);
}

void Scheduler::pause(MachineId machine) {
  MachineEntry& e = mutable_entry(machine);
  const Status s = e.machine.status();
  if (s != Status::running && s != Status::blocked)
    throw InvalidStatus("cannot pause machine " + std::to_string(machine) + " while " + to_string(s));
  const auto before = foreground();
  set_status(e, Status::paused, "pause");
  if (options_.preempt_on_pause) {
    const auto in_flight = e.in_flight;
    for (ActionInstanceId id : in_flight)
      if (runtime_->active(id)) runtime_->preempt(id);
  }
  follow_foreground(before);
}

void Scheduler::resume(MachineId machine) {
  MachineEntry& e = mutable_entry(machine);
  if (e.machine.status() != Status::paused)
    throw InvalidStatus("cannot resume machine " + std::to_string(machine) + " while " +
                        to_string(e.machine.status()));
  set_status(e, Status::running, "resume");
  focus(machine);
  reprompt(e);
}

void Scheduler::inject_fault(const std::string& action, FaultRule rule) { runtime_->faults().add(action, rule); }

void Scheduler::submit(SchedulerCommand command) {
  std::lock_guard lock(commands_mutex_);
  commands_.push_back(std::move(command));
}

void Scheduler::apply(SchedulerCommand& c) {
  using K = SchedulerCommand::Kind;
  switch (c.kind) {
  case K::launch: launch(c.task, c.args); break;
  case K::answer:
    if (c.machine && !c.ticket)
      deliver_answer_to(*c.machine, c.value, c.name);
    else
      deliver_answer(c.ticket, c.value, c.name);
    break;
  case K::pause: pause(c.machine.value_or(0)); break;
  case K::resume: resume(c.machine.value_or(0)); break;
  case K::inject_fault: inject_fault(c.action, c.fault); break;
  case K::custom:
    if (c.custom) c.custom();
    break;
  }
}

bool Scheduler::drain_commands() {
  std::deque<SchedulerCommand> batch;
  {
    std::lock_guard lock(commands_mutex_);
    batch.swap(commands_);
  }
  for (auto& c : batch) {
    try {
      apply(c);
    } catch (const std::exception& ex) {
      if (error_handler_)
        error_handler_(ex.what());
      else
        throw;
    }
  }
  return !batch.empty();
}

void Scheduler::action_started(const ActionHandle& handle) {
  trace_.emit(now_, handle.machine, "action-start",
              {{"instance", handle.id}, {"action", handle.action}, {"slot", handle.slot}, {"goal", to_json(handle.goal)}});
}

void Scheduler::ticket_opened(const kb::PendingTicket& pending) {
  MachineEntry& e = mutable_entry(pending.machine);
  const TicketId id = next_ticket_++;
  tickets_[id] = Ticket{id, pending.machine, pending.action, pending.name, TicketStatus::open, now_};
  e.tickets.push_back(id);
  sync_open(e);
  trace_.emit(now_, e.id, "ticket-open",
              {{"ticket", id}, {"name", pending.name}, {"action", pending.action}, {"reprompt", false}});
}

void Scheduler::kb_accessed(const ActionHandle& handle, bool update, kb::Scope scope, const std::string& name,
                            const kb::Value& value) {
  trace_.emit(now_, handle.machine, update ? "kb-update" : "kb-query",
              {{"instance", handle.id},
               {"action", handle.action},
               {"scope", kb::to_string(scope)},
               {"name", name},
               {"value", to_json(value)}});
}

bool Scheduler::evaluate(MachineEntry& e, const Check& check) {
  const CompiledTask& task = *e.compiled;
  switch (check.kind) {
  case Check::Kind::ready:
  case Check::Kind::not_ready: {
    const ActionSlot& slot = task.slots.at(check.slot);
    auto filled = kb::autofill(slot.params, slot.args, e.local, global_);
    bool ok = false;
    if (auto* goal = std::get_if<kb::Goal>(&filled)) {
      ok = !slot.preconditions || lang::eval(*slot.preconditions, e.local, global_, goal);
      if (ok) e.prepared[check.slot] = *goal;
    }
    return check.kind == Check::Kind::ready ? ok : !ok;
  }
  case Check::Kind::effects_hold:
  case Check::Kind::effects_violated: {
    const ActionSlot& slot = task.slots.at(check.slot);
    kb::Goal overlay = e.prepared[check.slot];
    for (const auto& [k, v] : e.results[check.slot]) overlay[k] = v;
    const bool ok = !slot.effects || lang::eval(*slot.effects, e.local, global_, &overlay);
    return check.kind == Check::Kind::effects_hold ? ok : !ok;
  }
  case Check::Kind::holds:
  case Check::Kind::fails: {
    const bool ok = check.condition && lang::eval(*check.condition, e.local, global_);
    return check.kind == Check::Kind::holds ? ok : !ok;
  }
  }
  return false;
}

void Scheduler::run_effects(MachineEntry& e, const StepReport& step) {
  const CompiledTask& task = *e.compiled;
  for (const auto& [t, n] : step.fired) {
    const TransitionEffect& effect = task.effects.at(t.index);
    if (const auto* start = std::get_if<StartAction>(&effect)) {
      const ActionSlot& slot = task.slots.at(start->slot);
      auto prepared = e.prepared.find(start->slot);
      const kb::Goal goal = prepared != e.prepared.end() ? prepared->second : slot.args;
      e.results.erase(start->slot);
      for (Tokens i = 0; i < n; ++i) e.in_flight.insert(runtime_->start(slot.action, goal, e.id, slot.key));
    } else if (const auto* op = std::get_if<lang::KbOp>(&effect)) {
      Json payload{{"op", ""}, {"name", op->name}};
      switch (op->kind) {
      case lang::KbOp::Kind::set:
        e.local.set(op->name, op->value);
        payload["op"] = "set";
        payload["value"] = to_json(op->value);
        break;
      case lang::KbOp::Kind::copy: {
        const kb::Value v = e.local.get(op->name);
        payload["op"] = "copy";
        payload["target"] = op->target;
        payload["value"] = to_json(v);
        if (v.absent())
          e.local.erase(op->target);
        else
          e.local.set(op->target, v);
        break;
      }
      case lang::KbOp::Kind::remove:
        e.local.erase(op->name);
        payload["op"] = "delete";
        break;
      }
      payload["scope"] = "LOCAL";
      trace_.emit(now_, e.id, "kb-update", std::move(payload));
    }
  }
}

bool Scheduler::step_machine(MachineEntry& e, RoundReport& report) {
  const Status before = e.machine.status();
  const auto fg = foreground();
  const ConditionEvaluator conditions = [this, &e](TransitionId, std::size_t index) {
    return evaluate(e, e.compiled->checks.at(index));
  };
  StepReport s;
  try {
    s = e.machine.step(conditions);
  } catch (const std::exception& ex) {
    stop_machine(e.id, Status::failed, std::string("condition error: ") + ex.what());
    return true;
  }
  if (s.progressed()) {
    const Net& net = e.machine.net();
    for (const auto& [t, n] : s.fired)
      trace_.emit(now_, e.id, "fired", {{"transition", net.label(t)}, {"count", n}});
    try {
      run_effects(e, s);
    } catch (const std::exception& ex) {
      trace_.emit(now_, e.id, "step", {{"marking", format_marking(net, s.marking)}, {"status", to_string(s.status)}});
      stop_machine(e.id, Status::failed, std::string("action error: ") + ex.what());
      return true;
    }
    trace_.emit(now_, e.id, "step", {{"marking", format_marking(net, s.marking)}, {"status", to_string(s.status)}});
  }
  const Status after = e.machine.status();
  if (after == Status::internal_error) e.reason = s.error;
  if (after != before) {
    e.machine.set_status(before);
    set_status(e, after, "step");
  }
  if (terminal(after)) {
    finalize(e);
    follow_foreground(fg);
    report.terminated.emplace_back(e.id, after);
  }
  report.steps.emplace_back(e.id, std::move(s));
  return report.steps.back().second.progressed();
}

void Scheduler::stop_machine(MachineId id, Status status, const std::string& reason) {
  MachineEntry& e = mutable_entry(id);
  if (terminal(e.machine.status())) return;
  const auto fg = foreground();
  e.reason = reason;
  set_status(e, status, reason == "abandoned" ? "abandoned" : "stopped");
  finalize(e);
  follow_foreground(fg);
}

void Scheduler::finalize(MachineEntry& e) {
  for (TicketId id : e.tickets) {
    Ticket& t = tickets_.at(id);
    if (t.status == TicketStatus::open) t.status = TicketStatus::abandoned;
  }
  sync_open(e);
  const auto in_flight = e.in_flight;
  for (ActionInstanceId id : in_flight)
    if (runtime_->active(id)) runtime_->preempt(id);
  if (e.parent && runtime_->active(*e.parent))
    runtime_->finish(*e.parent, e.machine.status() == Status::succeeded ? Outcome::succeeded : Outcome::failed);
}

void Scheduler::handle_completion(const Completion& c) {
  trace_.emit(now_, c.machine, "action-end",
              {{"instance", c.instance},
               {"action", c.action},
               {"slot", c.slot},
               {"outcome", to_string(c.outcome)},
               {"results", to_json(c.results)}});
  auto it = machines_.find(c.machine);
  if (it == machines_.end()) return;
  MachineEntry& e = it->second;
  e.in_flight.erase(c.instance);
  for (TicketId id : e.tickets) {
    Ticket& t = tickets_.at(id);
    if (t.action == c.instance && t.status == TicketStatus::open) t.status = TicketStatus::abandoned;
  }
  sync_open(e);
  if (terminal(e.machine.status())) return;
  if (c.outcome != Outcome::preempted)
    for (const auto& [k, v] : c.results)
      if (!v.absent()) e.local.set(k, v);
  const auto& slots = e.compiled->slots;
  for (std::size_t i = 0; i < slots.size(); ++i)
    if (slots[i].key == c.slot) e.results[i] = c.results;
  e.machine.post(Event{c.slot, c.outcome});
  if (e.machine.status() == Status::blocked) set_status(e, Status::running, "event");
}

RoundReport Scheduler::tick() {
  RoundReport report;
  report.time = now_;
  ++ticks_;
  bool activity = drain_commands();

  for (const kb::DeferredAnswer& a : global_.poll(now_)) {
    for (auto& [id, t] : tickets_) {
      if (t.status == TicketStatus::open && t.machine == a.origin.machine && t.action == a.origin.action &&
          t.name == a.name) {
        answer(t, a.value);
        activity = true;
        break;
      }
    }
  }

  runtime_->advance(now_);
  for (Completion& c : runtime_->take_completions()) {
    handle_completion(c);
    report.completions.push_back(std::move(c));
    activity = true;
  }

  for (MachineId id : machines()) {
    MachineEntry& e = machines_.at(id);
    const Status s = e.machine.status();
    if (s == Status::ready || s == Status::running) {
      e.blocked_ticks = 0;
      activity = step_machine(e, report) || activity;
    } else if (s == Status::blocked) {
      ++e.blocked_ticks;
      if (options_.abandon_after && e.blocked_ticks >= options_.abandon_after)
        stop_machine(id, Status::failed, "abandoned");
    }
  }

  if (!activity) {
    if (options_.wall_unit.count() > 0) std::this_thread::sleep_for(options_.wall_unit);
    ++now_;
    report.idle = true;
  }
  report.time = now_;
  return report;
}

bool Scheduler::quiescent() const {
  {
    std::lock_guard lock(commands_mutex_);
    if (!commands_.empty()) return false;
  }
  return std::all_of(machines_.begin(), machines_.end(),
                      [](const auto& kv) { return terminal(kv.second.machine.status()); });
}

bool Scheduler::run(std::size_t max_ticks) {
  for (std::size_t i = 0; i < max_ticks; ++i) {
    if (quiescent()) return true;
    tick();
  }
  return quiescent();
}

} // namespace pnm
