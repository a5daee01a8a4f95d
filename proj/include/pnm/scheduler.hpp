#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnm/action.hpp"
#include "pnm/compiler.hpp"
#include "pnm/trace.hpp"

namespace pnm {

class UnknownTask : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class UnknownMachine : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class NoOpenTicket : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class AmbiguousTarget : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class InvalidStatus : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class TicketStatus { open, answered, abandoned };

const char* to_string(TicketStatus status);

/// An external question raised by a kb-capable action.
struct Ticket {
  TicketId id = 0;
  MachineId machine = 0;
  ActionInstanceId action = 0;
  std::string name;
  TicketStatus status = TicketStatus::open;
  TimeUnits opened_at = 0;
};

struct RoutingReport {
  TicketId ticket = 0;
  MachineId machine = 0;
  ActionInstanceId action = 0;
  std::string name;
};

struct RoundReport {
  TimeUnits time = 0;
  std::vector<std::pair<MachineId, StepReport>> steps;
  std::vector<Completion> completions;
  std::vector<std::pair<MachineId, Status>> terminated;
  /// Nothing fired, completed or was commanded; the clock moved on.
  bool idle = false;
};

struct SchedulerOptions {
  /// Preempt in-flight actions when a machine is paused.
  bool preempt_on_pause = false;
  /// Ticks a machine may stay blocked before it is abandoned; 0 disables.
  std::size_t abandon_after = 10000;
  /// Real time slept per idle clock unit; zero runs the clock virtually.
  std::chrono::milliseconds wall_unit{0};
};

/// Requests accepted from other threads (e.g. a console reader).
struct SchedulerCommand {
  enum class Kind { launch, answer, pause, resume, inject_fault, custom };
  Kind kind = Kind::launch;
  std::string task;
  kb::Goal args;
  std::optional<TicketId> ticket;
  std::optional<MachineId> machine;
  std::optional<std::string> name;
  kb::Value value;
  std::string action;
  FaultRule fault;
  std::function<void()> custom;
};

/// Per-machine bookkeeping.
struct MachineEntry {
  MachineId id = 0;
  std::string task;
  const CompiledTask* compiled = nullptr;
  Machine machine;
  kb::KnowledgeStore local;
  std::vector<TicketId> tickets;
  std::set<ActionInstanceId> in_flight;
  /// Goals built by the last successful ready check, per slot.
  std::map<std::size_t, kb::Goal> prepared;
  std::map<std::size_t, kb::Goal> results;
  std::size_t blocked_ticks = 0;
  std::string reason;
  /// The subtask action instance this machine serves, if launched by a plan.
  std::optional<ActionInstanceId> parent;
};

/// Owns every running machine and drives them in rounds against one clock.
/// All state changes happen on the thread calling tick(); other threads go
/// through submit().
class Scheduler : public ActionHost {
public:
  Scheduler(kb::GlobalKBPort& global, ActionRegistry registry = ActionRegistry::with_builtins(),
            FaultPlan faults = {}, std::uint64_t seed = 0, SchedulerOptions options = {});
  ~Scheduler() override;
  Scheduler(const Scheduler&) = delete;
  Scheduler& operator=(const Scheduler&) = delete;

  /// Makes the task launchable and invocable as an action by other plans.
  void register_task(CompiledTask task, std::vector<std::string> params = {});
  bool has_task(const std::string& name) const { return tasks_.contains(name); }

  MachineId launch(const std::string& task, const kb::Goal& args = {});
  /// Unaddressed answers go to the foreground machine.
  RoutingReport deliver_answer(std::optional<TicketId> ticket, const kb::Value& value,
                               const std::optional<std::string>& name = std::nullopt);
  /// Answers the single open ticket of `machine` (or the one asking `name`).
  RoutingReport deliver_answer_to(MachineId machine, const kb::Value& value,
                                  const std::optional<std::string>& name = std::nullopt);
  void pause(MachineId machine);
  void resume(MachineId machine);
  void inject_fault(const std::string& action, FaultRule rule);

  RoundReport tick();
  /// Ticks until every machine is terminal, or `max_ticks` elapse. Returns
  /// true when everything finished.
  bool run(std::size_t max_ticks = 100000);
  bool quiescent() const;

  /// Thread-safe.
  void submit(SchedulerCommand command);
  void on_error(std::function<void(const std::string&)> handler) { error_handler_ = std::move(handler); }

  TimeUnits now() const { return now_; }
  std::size_t ticks() const { return ticks_; }
  std::optional<MachineId> foreground() const;
  std::vector<MachineId> machines() const;
  const MachineEntry& entry(MachineId id) const;
  Status status(MachineId id) const { return entry(id).machine.status(); }
  const Ticket& ticket(TicketId id) const;
  std::vector<Ticket> open_tickets(std::optional<MachineId> machine = std::nullopt) const;
  Trace& trace() { return trace_; }
  const Trace& trace() const { return trace_; }
  ActionRuntime& runtime() { return *runtime_; }
  const ActionRegistry& registry() const { return registry_; }
  kb::GlobalKBPort& global_port() override { return global_; }
  kb::KnowledgeStore& local_store(MachineId machine) override;

  void action_started(const ActionHandle& handle) override;
  void ticket_opened(const kb::PendingTicket& ticket) override;
  void kb_accessed(const ActionHandle& handle, bool update, kb::Scope scope, const std::string& name,
                   const kb::Value& value) override;

private:
  friend class SubtaskBehavior;

  MachineEntry& mutable_entry(MachineId id);
  MachineId spawn(const std::string& task, const kb::Goal& args, std::optional<ActionInstanceId> parent,
                  bool focus);
  void apply(SchedulerCommand& command);
  bool drain_commands();
  RoutingReport answer(Ticket& ticket, const kb::Value& value);
  void handle_completion(const Completion& c);
  bool step_machine(MachineEntry& e, RoundReport& report);
  bool evaluate(MachineEntry& e, const Check& check);
  void run_effects(MachineEntry& e, const StepReport& step);
  void set_status(MachineEntry& e, Status to, const std::string& cause);
  void finalize(MachineEntry& e);
  void focus(MachineId id);
  void reprompt(MachineEntry& e);
  void stop_machine(MachineId id, Status status, const std::string& reason);
  void sync_open(MachineEntry& e);
  void follow_foreground(std::optional<MachineId> before);

  kb::GlobalKBPort& global_;
  ActionRegistry registry_;
  SchedulerOptions options_;
  std::unique_ptr<ActionRuntime> runtime_;
  std::map<std::string, CompiledTask> tasks_;
  std::map<MachineId, MachineEntry> machines_;
  std::map<TicketId, Ticket> tickets_;
  std::vector<MachineId> focus_;
  std::map<ActionInstanceId, MachineId> children_;
  Trace trace_;
  TimeUnits now_ = 0;
  std::size_t ticks_ = 0;
  MachineId next_machine_ = 1;
  TicketId next_ticket_ = 1;
  mutable std::mutex commands_mutex_;
  std::deque<SchedulerCommand> commands_;
  std::function<void(const std::string&)> error_handler_;
};

} // namespace pnm
