#include "pnm/action.hpp"

#include <cmath>

namespace pnm {

struct ActionRuntime::Instance {
  ActionHandle handle;
  const ActionSpec* spec = nullptr;
  std::unique_ptr<Behavior> body;
  std::optional<FaultRule> fault;
  bool preempt_requested = false;
};

void Behavior::on_preempt(ActionContext& ctx) { ctx.finish(Outcome::preempted); }

namespace {

std::optional<TimeUnits> duration_of(const kb::Value& v) {
  auto n = v.number();
  if (!n || *n < 0 || !std::isfinite(*n)) return std::nullopt;
  return static_cast<TimeUnits>(std::ceil(*n));
}

class Wait : public Behavior {
public:
  void on_start(ActionContext& ctx) override {
    auto d = duration_of(ctx.arg("time"));
    if (!d) {
      ctx.finish(Outcome::failed);
      return;
    }
    ctx.after(*d);
  }
  void on_timer(ActionContext& ctx, int) override { ctx.finish(Outcome::succeeded); }
};

// Reads "value" through the knowledge base and reports it back as "time".
class DummyServer : public Behavior {
public:
  void on_start(ActionContext& ctx) override {
    auto r = ctx.kb_query(kb::Scope::all, "value");
    if (std::holds_alternative<kb::PendingTicket>(r)) return;
    value_ = std::get<kb::Value>(r);
    if (value_.absent()) value_ = ctx.arg("value");
    ctx.after(1);
  }
  void on_answer(ActionContext& ctx, const std::string&, const kb::Value& value) override {
    value_ = value;
    ctx.after(1);
  }
  void on_timer(ActionContext& ctx, int) override {
    if (value_.absent()) {
      ctx.finish(Outcome::failed);
      return;
    }
    ctx.finish(Outcome::succeeded, {{"time", value_}});
  }

private:
  kb::Value value_;
};

class Echo : public Behavior {
public:
  void on_start(ActionContext& ctx) override { ctx.finish(Outcome::succeeded, {{"echo", ctx.arg("text")}}); }
};

// Asks for the knowledge named by "question"; the answer becomes a result
// field of the same name.
class Ask : public Behavior {
public:
  void on_start(ActionContext& ctx) override {
    const kb::Value q = ctx.arg("question");
    if (q.kind() != kb::Value::Kind::text || q.text().empty()) {
      ctx.finish(Outcome::failed);
      return;
    }
    auto r = ctx.kb_query(kb::Scope::all, q.text());
    if (std::holds_alternative<kb::PendingTicket>(r)) return;
    const auto& v = std::get<kb::Value>(r);
    if (v.absent())
      ctx.finish(Outcome::failed);
    else
      ctx.finish(Outcome::succeeded, {{q.text(), v}});
  }
  void on_answer(ActionContext& ctx, const std::string& name, const kb::Value& value) override {
    ctx.finish(Outcome::succeeded, {{name, value}});
  }
};

class KbSet : public Behavior {
public:
  void on_start(ActionContext& ctx) override {
    const kb::Value name = ctx.arg("name");
    if (name.kind() != kb::Value::Kind::text || name.text().empty() || ctx.arg("value").absent()) {
      ctx.finish(Outcome::failed);
      return;
    }
    ctx.kb_update(kb::Scope::local, name.text(), ctx.arg("value"));
    ctx.finish(Outcome::succeeded);
  }
};

class KbCopy : public Behavior {
public:
  void on_start(ActionContext& ctx) override {
    const kb::Value from = ctx.arg("from");
    const kb::Value to = ctx.arg("to");
    if (from.kind() != kb::Value::Kind::text || to.kind() != kb::Value::Kind::text || from.text().empty() ||
        to.text().empty()) {
      ctx.finish(Outcome::failed);
      return;
    }
    auto r = ctx.kb_query(kb::Scope::local, from.text());
    const auto& v = std::get<kb::Value>(r);
    if (v.absent()) {
      ctx.finish(Outcome::failed);
      return;
    }
    ctx.kb_update(kb::Scope::local, to.text(), v);
    ctx.finish(Outcome::succeeded);
  }
};

class KbDelete : public Behavior {
public:
  void on_start(ActionContext& ctx) override {
    const kb::Value name = ctx.arg("name");
    if (name.kind() != kb::Value::Kind::text) {
      ctx.finish(Outcome::failed);
      return;
    }
    ctx.kb_erase(name.text());
    ctx.finish(Outcome::succeeded);
  }
};

template <class B>
std::function<std::unique_ptr<Behavior>()> factory() {
  return [] { return std::make_unique<B>(); };
}

} // namespace

ActionRegistry ActionRegistry::with_builtins() {
  ActionRegistry r;
  r.add({"wait", ActionKind::plain, {"time"}, {}, factory<Wait>()});
  r.add({"dummy_server", ActionKind::kb_capable, {"value"}, {"time"}, factory<DummyServer>()});
  r.add({"echo", ActionKind::plain, {"text"}, {"echo"}, factory<Echo>()});
  r.add({"ask", ActionKind::kb_capable, {"question"}, {}, factory<Ask>()});
  r.add({"kb_set", ActionKind::kb_capable, {"name", "value"}, {}, factory<KbSet>()});
  r.add({"kb_copy", ActionKind::kb_capable, {"from", "to"}, {}, factory<KbCopy>()});
  r.add({"kb_delete", ActionKind::kb_capable, {"name"}, {}, factory<KbDelete>()});
  return r;
}

void ActionRegistry::add(ActionSpec spec) {
  if (spec.name.empty()) throw std::invalid_argument("action name must not be empty");
  if (!spec.make) throw std::invalid_argument("action '" + spec.name + "' has no behavior");
  if (specs_.contains(spec.name)) throw std::invalid_argument("action already registered: " + spec.name);
  std::string name = spec.name;
  specs_.emplace(std::move(name), std::move(spec));
}

const ActionSpec* ActionRegistry::find(const std::string& name) const {
  auto it = specs_.find(name);
  return it == specs_.end() ? nullptr : &it->second;
}

const ActionSpec& ActionRegistry::at(const std::string& name) const {
  if (auto s = find(name)) return *s;
  throw UnknownAction("unknown action: " + name);
}

std::vector<std::string> ActionRegistry::names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : specs_) out.push_back(name);
  return out;
}

ActionRuntime::ActionRuntime(const ActionRegistry& registry, ActionHost& host, FaultPlan faults, std::uint64_t seed)
    : registry_(registry), host_(host), faults_(std::move(faults)), rng_(seed) {}

ActionRuntime::~ActionRuntime() = default;

ActionRuntime::Instance& ActionRuntime::instance(ActionInstanceId id) {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw NotActive("unknown action instance " + std::to_string(id));
  return *it->second;
}

const ActionHandle& ActionRuntime::handle(ActionInstanceId id) const {
  auto it = instances_.find(id);
  if (it == instances_.end()) throw NotActive("unknown action instance " + std::to_string(id));
  return it->second->handle;
}

bool ActionRuntime::active(ActionInstanceId id) const {
  auto it = instances_.find(id);
  return it != instances_.end() && it->second->handle.state == HandleState::active;
}

std::size_t ActionRuntime::active_count() const {
  std::size_t n = 0;
  for (const auto& [id, inst] : instances_) n += inst->handle.state == HandleState::active;
  return n;
}

std::size_t ActionRuntime::invocations(const std::string& action) const {
  auto it = invocations_.find(action);
  return it == invocations_.end() ? 0 : it->second;
}

ActionInstanceId ActionRuntime::start(const std::string& action, kb::Goal goal, MachineId machine, std::string slot) {
  const ActionSpec& spec = registry_.at(action);
  auto inst = std::make_unique<Instance>();
  inst->spec = &spec;
  inst->handle.id = next_id_++;
  inst->handle.machine = machine;
  inst->handle.slot = std::move(slot);
  inst->handle.action = action;
  inst->handle.goal = std::move(goal);
  inst->handle.started_at = now_;

  const std::size_t invocation = ++invocations_[action];
  if (auto it = faults_.rules.find(action); it != faults_.rules.end()) {
    for (const FaultRule& rule : it->second) {
      if (rule.invocation && *rule.invocation != invocation) continue;
      if (rule.probability < 1.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) >= rule.probability)
        continue;
      inst->fault = rule;
      break;
    }
  }

  const ActionInstanceId id = inst->handle.id;
  Instance& ref = *inst;
  instances_.emplace(id, std::move(inst));
  ref.body = spec.make();
  ref.handle.state = HandleState::active;
  host_.action_started(ref.handle);
  ActionContext ctx(*this, ref);
  ref.body->on_start(ctx);
  return id;
}

void ActionRuntime::preempt(ActionInstanceId id) {
  Instance& inst = instance(id);
  if (inst.handle.state != HandleState::active)
    throw NotActive("action instance " + std::to_string(id) + " is not active");
  inst.preempt_requested = true;
  ActionContext ctx(*this, inst);
  inst.body->on_preempt(ctx);
}

void ActionRuntime::deliver_answer(ActionInstanceId id, const std::string& name, const kb::Value& value) {
  Instance& inst = instance(id);
  if (inst.handle.state != HandleState::active)
    throw NotActive("action instance " + std::to_string(id) + " is not active");
  ActionContext ctx(*this, inst);
  inst.body->on_answer(ctx, name, value);
}

bool ActionRuntime::finish(ActionInstanceId id, Outcome outcome, kb::Goal results) {
  return complete(instance(id), outcome, std::move(results));
}

void ActionRuntime::arm(ActionInstanceId id, TimeUnits delay, int tag) {
  timers_.emplace(now_ + std::max<TimeUnits>(delay, 0), seq_++, id, tag);
}

bool ActionRuntime::complete(Instance& inst, Outcome outcome, kb::Goal results) {
  if (inst.handle.state == HandleState::done) return false;
  TimeUnits latency = 0;
  if (inst.fault) {
    latency = std::max<TimeUnits>(inst.fault->latency, 0);
    const bool requested_preempt = outcome == Outcome::preempted && inst.preempt_requested;
    if (inst.fault->outcome && !requested_preempt) outcome = *inst.fault->outcome;
  }
  if (outcome == Outcome::preempted) results.clear();
  inst.handle.state = HandleState::done;
  inst.handle.outcome = outcome;
  inst.handle.results = results;
  Completion c{inst.handle.id, inst.handle.machine, inst.handle.slot, inst.handle.action, outcome,
               std::move(results), now_ + latency};
  outbox_.emplace(std::make_pair(c.at, seq_++), std::move(c));
  return true;
}

void ActionRuntime::advance(TimeUnits now) {
  if (now > now_) now_ = now;
  while (!timers_.empty()) {
    auto [at, seq, id, tag] = *timers_.begin();
    if (at > now_) break;
    timers_.erase(timers_.begin());
    Instance& inst = instance(id);
    if (inst.handle.state != HandleState::active) continue;
    ActionContext ctx(*this, inst);
    inst.body->on_timer(ctx, tag);
  }
}

std::vector<Completion> ActionRuntime::take_completions() {
  std::vector<Completion> out;
  while (!outbox_.empty() && outbox_.begin()->first.first <= now_) {
    out.push_back(std::move(outbox_.begin()->second));
    outbox_.erase(outbox_.begin());
  }
  return out;
}

std::optional<TimeUnits> ActionRuntime::next_due() const {
  std::optional<TimeUnits> due;
  if (!timers_.empty()) due = std::get<0>(*timers_.begin());
  if (!outbox_.empty()) {
    TimeUnits c = outbox_.begin()->first.first;
    due = due ? std::min(*due, c) : c;
  }
  return due;
}

kb::QueryResult ActionRuntime::kb_query(Instance& inst, kb::Scope scope, const std::string& name) {
  if (inst.spec->kind != ActionKind::kb_capable)
    throw NotKBCapable("action '" + inst.handle.action + "' cannot access the knowledge base");
  if (inst.handle.state != HandleState::active) throw NotActive("action is not active");
  kb::QueryContext qctx{inst.handle.machine, inst.handle.id, now_, true};
  auto r = kb::query(host_.local_store(inst.handle.machine), host_.global_port(), scope, name, qctx);
  if (auto t = std::get_if<kb::PendingTicket>(&r)) {
    host_.kb_accessed(inst.handle, false, scope, name, kb::Value{});
    host_.ticket_opened(*t);
  } else {
    host_.kb_accessed(inst.handle, false, scope, name, std::get<kb::Value>(r));
  }
  return r;
}

void ActionRuntime::kb_update(Instance& inst, kb::Scope scope, const std::string& name, kb::Value value) {
  if (inst.spec->kind != ActionKind::kb_capable)
    throw NotKBCapable("action '" + inst.handle.action + "' cannot access the knowledge base");
  if (inst.handle.state != HandleState::active) throw NotActive("action is not active");
  host_.kb_accessed(inst.handle, true, scope, name, value);
  kb::update(host_.local_store(inst.handle.machine), host_.global_port(), scope, name, std::move(value));
}

bool ActionRuntime::kb_erase(Instance& inst, const std::string& name) {
  if (inst.spec->kind != ActionKind::kb_capable)
    throw NotKBCapable("action '" + inst.handle.action + "' cannot access the knowledge base");
  host_.kb_accessed(inst.handle, true, kb::Scope::local, name, kb::Value{});
  return host_.local_store(inst.handle.machine).erase(name);
}

const kb::Goal& ActionContext::goal() const { return inst_.handle.goal; }

kb::Value ActionContext::arg(const std::string& name) const {
  auto it = inst_.handle.goal.find(name);
  return it == inst_.handle.goal.end() ? kb::Value{} : it->second;
}

TimeUnits ActionContext::now() const { return rt_.now_; }
ActionInstanceId ActionContext::instance() const { return inst_.handle.id; }
MachineId ActionContext::machine() const { return inst_.handle.machine; }
const std::string& ActionContext::action() const { return inst_.handle.action; }

void ActionContext::after(TimeUnits delay, int tag) { rt_.arm(inst_.handle.id, delay, tag); }

bool ActionContext::finish(Outcome outcome, kb::Goal results) {
  return rt_.complete(inst_, outcome, std::move(results));
}

kb::QueryResult ActionContext::kb_query(kb::Scope scope, const std::string& name) {
  return rt_.kb_query(inst_, scope, name);
}

void ActionContext::kb_update(kb::Scope scope, const std::string& name, kb::Value value) {
  rt_.kb_update(inst_, scope, name, std::move(value));
}

bool ActionContext::kb_erase(const std::string& name) { return rt_.kb_erase(inst_, name); }

} // namespace pnm
