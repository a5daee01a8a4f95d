#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pnm/scheduler.hpp"

namespace pnm {

/// One timed command of a scenario script.
struct ScenarioStep {
  enum class Kind { launch, answer, pause, resume, inject_fault, expect_status };
  Kind kind = Kind::launch;
  TimeUnits at = 0;
  int line = 0;
  std::string task;
  std::string alias;
  kb::Goal args;
  /// Machine alias for answer/pause/resume/expect-status.
  std::optional<std::string> machine;
  std::optional<TicketId> ticket;
  std::optional<std::string> name;
  kb::Value value;
  std::string action;
  FaultRule fault;
  Status expected = Status::succeeded;
  /// Error kind the step must raise (e.g. NoOpenTicket) instead of succeeding.
  std::optional<std::string> expect_error;
};

/// Extra plan made launchable (and invocable from other plans) by name.
struct TaskDecl {
  std::string name;
  std::string plan;
  std::vector<std::string> params;
};

struct Scenario {
  std::vector<TaskDecl> tasks;
  std::map<std::string, kb::ScriptedOracle::Answer> oracle;
  std::optional<bool> preempt_on_pause;
  std::optional<std::size_t> abandon_after;
  std::vector<ScenarioStep> steps;
};

Scenario parse_scenario(std::string_view document);
FaultPlan parse_faults(std::string_view document);

struct ScenarioResult {
  bool finished = false;
  std::vector<std::string> failures;
  std::map<std::string, MachineId> aliases;

  bool ok() const { return finished && failures.empty(); }
};

/// Feeds the steps in time order between ticks until every step ran and
/// every machine is terminal.
ScenarioResult run_scenario(Scheduler& scheduler, const Scenario& scenario, std::size_t max_ticks = 200000);

/// Error kind name used by expect_error (the exception class name).
std::string error_kind(const std::exception& error);

} // namespace pnm
