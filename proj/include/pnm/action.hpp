#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "pnm/common.hpp"
#include "pnm/kb.hpp"
#include "pnm/machine.hpp"

namespace pnm {

class UnknownAction : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class NotActive : public std::logic_error {
public:
  using std::logic_error::logic_error;
};
class NotKBCapable : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

class ActionContext;

/// Body of an asynchronous action. Bodies never block: they arm timers,
/// wait for answers and eventually call ActionContext::finish exactly once.
class Behavior {
public:
  virtual ~Behavior() = default;
  virtual void on_start(ActionContext& ctx) = 0;
  virtual void on_timer(ActionContext& /*ctx*/, int /*tag*/) {}
  virtual void on_answer(ActionContext& /*ctx*/, const std::string& /*name*/, const kb::Value& /*value*/) {}
  virtual void on_preempt(ActionContext& ctx);
};

enum class ActionKind { plain, kb_capable };

struct ActionSpec {
  std::string name;
  ActionKind kind = ActionKind::plain;
  std::vector<std::string> params;
  std::vector<std::string> result_fields;
  std::function<std::unique_ptr<Behavior>()> make;
};

class ActionRegistry {
public:
  /// Registry preloaded with wait, dummy_server, echo, ask and the kb_* ops.
  static ActionRegistry with_builtins();

  void add(ActionSpec spec);
  const ActionSpec* find(const std::string& name) const;
  const ActionSpec& at(const std::string& name) const;
  std::vector<std::string> names() const;

private:
  std::map<std::string, ActionSpec> specs_;
};

enum class HandleState { pending, active, done };

struct ActionHandle {
  ActionInstanceId id = 0;
  MachineId machine = 0;
  std::string slot;
  std::string action;
  HandleState state = HandleState::pending;
  kb::Goal goal;
  std::optional<Outcome> outcome;
  kb::Goal results;
  TimeUnits started_at = 0;
};

/// Forced outcome and/or extra latency for one (or every) invocation of an
/// action. Invocations are counted per action name from 1.
struct FaultRule {
  std::optional<std::size_t> invocation;
  std::optional<Outcome> outcome;
  TimeUnits latency = 0;
  double probability = 1.0;
};

struct FaultPlan {
  std::map<std::string, std::vector<FaultRule>> rules;

  void add(const std::string& action, FaultRule rule) { rules[action].push_back(rule); }
  bool empty() const { return rules.empty(); }
};

/// Terminal result of one action instance, ready to be posted to its machine.
struct Completion {
  ActionInstanceId instance = 0;
  MachineId machine = 0;
  std::string slot;
  std::string action;
  Outcome outcome = Outcome::succeeded;
  kb::Goal results;
  TimeUnits at = 0;
};

/// Services the runtime needs from whoever owns the machines.
class ActionHost {
public:
  virtual ~ActionHost() = default;
  virtual kb::KnowledgeStore& local_store(MachineId machine) = 0;
  virtual kb::GlobalKBPort& global_port() = 0;
  /// Called after the instance exists and before its body starts.
  virtual void action_started(const ActionHandle& /*handle*/) {}
  virtual void ticket_opened(const kb::PendingTicket& /*ticket*/) {}
  virtual void kb_accessed(const ActionHandle& /*handle*/, bool /*update*/, kb::Scope /*scope*/,
                           const std::string& /*name*/, const kb::Value& /*value*/) {}
};

/// Runs action bodies against a clock owned by the caller. All completions
/// are queued and handed out in (time, sequence) order.
class ActionRuntime {
public:
  ActionRuntime(const ActionRegistry& registry, ActionHost& host, FaultPlan faults = {}, std::uint64_t seed = 0);
  ~ActionRuntime();
  ActionRuntime(const ActionRuntime&) = delete;
  ActionRuntime& operator=(const ActionRuntime&) = delete;

  const ActionRegistry& registry() const { return registry_; }
  FaultPlan& faults() { return faults_; }

  ActionInstanceId start(const std::string& action, kb::Goal goal, MachineId machine, std::string slot = {});
  void preempt(ActionInstanceId id);
  void deliver_answer(ActionInstanceId id, const std::string& name, const kb::Value& value);
  /// Finish an active action from outside its body (e.g. a child task ended).
  bool finish(ActionInstanceId id, Outcome outcome, kb::Goal results = {});

  /// Sets the clock and runs every timer due at or before `now`.
  void advance(TimeUnits now);
  TimeUnits now() const { return now_; }
  /// Completions due at or before the current time.
  std::vector<Completion> take_completions();
  std::optional<TimeUnits> next_due() const;

  const ActionHandle& handle(ActionInstanceId id) const;
  bool active(ActionInstanceId id) const;
  std::size_t active_count() const;
  std::size_t invocations(const std::string& action) const;

private:
  friend class ActionContext;
  struct Instance;

  Instance& instance(ActionInstanceId id);
  void arm(ActionInstanceId id, TimeUnits delay, int tag);
  bool complete(Instance& inst, Outcome outcome, kb::Goal results);
  kb::QueryResult kb_query(Instance& inst, kb::Scope scope, const std::string& name);
  void kb_update(Instance& inst, kb::Scope scope, const std::string& name, kb::Value value);
  bool kb_erase(Instance& inst, const std::string& name);

  const ActionRegistry& registry_;
  ActionHost& host_;
  FaultPlan faults_;
  std::mt19937_64 rng_;
  TimeUnits now_ = 0;
  std::uint64_t seq_ = 0;
  ActionInstanceId next_id_ = 1;
  std::map<ActionInstanceId, std::unique_ptr<Instance>> instances_;
  std::map<std::string, std::size_t> invocations_;
  std::set<std::tuple<TimeUnits, std::uint64_t, ActionInstanceId, int>> timers_;
  std::map<std::pair<TimeUnits, std::uint64_t>, Completion> outbox_;
};

/// View of one running instance handed to its Behavior.
class ActionContext {
public:
  const kb::Goal& goal() const;
  kb::Value arg(const std::string& name) const;
  TimeUnits now() const;
  ActionInstanceId instance() const;
  MachineId machine() const;
  const std::string& action() const;

  void after(TimeUnits delay, int tag = 0);
  /// First call wins; later calls return false.
  bool finish(Outcome outcome, kb::Goal results = {});

  kb::QueryResult kb_query(kb::Scope scope, const std::string& name);
  void kb_update(kb::Scope scope, const std::string& name, kb::Value value);
  bool kb_erase(const std::string& name);

private:
  friend class ActionRuntime;
  ActionContext(ActionRuntime& rt, ActionRuntime::Instance& inst) : rt_(rt), inst_(inst) {}
  ActionRuntime& rt_;
  ActionRuntime::Instance& inst_;
};

} // namespace pnm
