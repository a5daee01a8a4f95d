#include "pnm/scenario.hpp"

#include <algorithm>

#include "yaml_detail.hpp"

namespace pnm {

namespace {

using lang::detail::entries;
using lang::detail::literal;
using lang::detail::scalar;
using lang::detail::syntax;

std::int64_t integer(const YAML::Node& n, const char* what) {
  const kb::Value v = literal(n);
  if (v.kind() != kb::Value::Kind::integer) syntax(std::string("expected an integer for ") + what, n);
  return v.integer();
}

std::size_t count(const YAML::Node& n, const char* what) {
  const auto v = integer(n, what);
  if (v < 0) syntax(std::string("expected a non-negative integer for ") + what, n);
  return static_cast<std::size_t>(v);
}

Outcome outcome(const YAML::Node& n) {
  const std::string s = scalar(n, "outcome");
  if (s == "succeeded") return Outcome::succeeded;
  if (s == "failed") return Outcome::failed;
  if (s == "preempted") return Outcome::preempted;
  syntax("unknown outcome '" + s + "'", n);
}

Status status(const YAML::Node& n) {
  const std::string s = scalar(n, "status");
  for (Status st : {Status::ready, Status::running, Status::blocked, Status::paused, Status::succeeded,
                    Status::failed, Status::internal_error})
    if (s == to_string(st)) return st;
  syntax("unknown status '" + s + "'", n);
}

FaultRule fault_rule(const YAML::Node& n) {
  FaultRule r;
  for (const auto& [k, v] : entries(n, "fault")) {
    const std::string key = k.Scalar();
    if (key == "invocation") {
      r.invocation = count(v, "invocation");
      if (*r.invocation == 0) syntax("invocations count from 1", v);
    } else if (key == "outcome") {
      r.outcome = outcome(v);
    } else if (key == "latency") {
      r.latency = static_cast<TimeUnits>(count(v, "latency"));
    } else if (key == "probability") {
      auto p = literal(v).number();
      if (!p || *p < 0 || *p > 1) syntax("probability must be within [0, 1]", v);
      r.probability = *p;
    } else if (key != "action") {
      syntax("unknown fault key '" + key + "'", k);
    }
  }
  return r;
}

kb::Goal goal(const YAML::Node& n) {
  kb::Goal g;
  for (const auto& [k, v] : entries(n, "arguments")) g[scalar(k, "argument name")] = literal(v);
  return g;
}

ScenarioStep step(const YAML::Node& n) {
  ScenarioStep s;
  s.line = n.Mark().line + 1;
  bool has_at = false;
  std::optional<std::string> command;
  YAML::Node body;
  for (const auto& [k, v] : entries(n, "command")) {
    const std::string key = k.Scalar();
    if (key == "at") {
      const auto at = integer(v, "at");
      if (at < 0) syntax("command time must not be negative", v);
      s.at = at;
      has_at = true;
    } else if (key == "launch" || key == "answer" || key == "pause" || key == "resume" || key == "inject-fault" ||
               key == "expect-status") {
      if (command) syntax("one command per entry", k);
      command = key;
      body = v;
    } else if (key == "as") {
      s.alias = scalar(v, "alias");
    } else if (key == "args") {
      s.args = goal(v);
    } else if (key == "machine") {
      s.machine = scalar(v, "machine");
    } else if (key == "ticket") {
      s.ticket = count(v, "ticket");
    } else if (key == "name") {
      s.name = scalar(v, "name");
    } else if (key == "expect-error") {
      s.expect_error = scalar(v, "error kind");
    } else {
      syntax("unknown command key '" + key + "'", k);
    }
  }
  if (!has_at) syntax("command needs 'at'", n);
  if (!command) syntax("entry has no command", n);
  if (*command == "launch") {
    s.kind = ScenarioStep::Kind::launch;
    s.task = scalar(body, "task name");
  } else if (*command == "answer") {
    s.kind = ScenarioStep::Kind::answer;
    s.value = literal(body);
  } else if (*command == "pause" || *command == "resume") {
    s.kind = *command == "pause" ? ScenarioStep::Kind::pause : ScenarioStep::Kind::resume;
    s.machine = scalar(body, "machine");
  } else if (*command == "inject-fault") {
    s.kind = ScenarioStep::Kind::inject_fault;
    if (!body["action"]) syntax("inject-fault needs an action", body);
    s.action = scalar(body["action"], "action");
    s.fault = fault_rule(body);
  } else {
    s.kind = ScenarioStep::Kind::expect_status;
    for (const auto& [k, v] : entries(body, "expect-status")) {
      if (k.Scalar() == "machine")
        s.machine = scalar(v, "machine");
      else if (k.Scalar() == "status")
        s.expected = status(v);
      else
        syntax("unknown expect-status key '" + k.Scalar() + "'", k);
    }
    if (!s.machine) syntax("expect-status needs a machine", body);
  }
  return s;
}

} // namespace

Scenario parse_scenario(std::string_view document) {
  Scenario sc;
  lang::detail::guard([&] {
    const YAML::Node root = lang::detail::load(document);
    for (const auto& [k, v] : entries(root, "scenario")) {
      const std::string key = k.Scalar();
      if (key == "tasks") {
        if (!v.IsSequence()) syntax("tasks must be a list", v);
        for (const auto& t : v) {
          TaskDecl d;
          for (const auto& [tk, tv] : entries(t, "task")) {
            if (tk.Scalar() == "name")
              d.name = scalar(tv, "task name");
            else if (tk.Scalar() == "plan")
              d.plan = scalar(tv, "plan path");
            else if (tk.Scalar() == "params") {
              if (!tv.IsSequence()) syntax("params must be a list", tv);
              for (const auto& p : tv) d.params.push_back(scalar(p, "parameter"));
            } else
              syntax("unknown task key '" + tk.Scalar() + "'", tk);
          }
          if (d.name.empty() || d.plan.empty()) syntax("task needs name and plan", t);
          sc.tasks.push_back(std::move(d));
        }
      } else if (key == "oracle") {
        for (const auto& [ok, ov] : entries(v, "oracle")) {
          kb::ScriptedOracle::Answer a;
          bool has_answer = false;
          for (const auto& [ak, av] : entries(ov, "oracle answer")) {
            if (ak.Scalar() == "answer") {
              a.value = literal(av);
              has_answer = true;
            } else if (ak.Scalar() == "delay") {
              a.delay = static_cast<TimeUnits>(count(av, "delay"));
            } else {
              syntax("unknown oracle key '" + ak.Scalar() + "'", ak);
            }
          }
          if (!has_answer) syntax("oracle entry needs an answer", ov);
          sc.oracle[scalar(ok, "question")] = a;
        }
      } else if (key == "options") {
        for (const auto& [ok, ov] : entries(v, "options")) {
          if (ok.Scalar() == "preempt_on_pause") {
            const kb::Value b = literal(ov);
            if (b.kind() != kb::Value::Kind::boolean) syntax("preempt_on_pause must be true or false", ov);
            sc.preempt_on_pause = b.boolean();
          } else if (ok.Scalar() == "abandon_after") {
            sc.abandon_after = count(ov, "abandon_after");
          } else {
            syntax("unknown option '" + ok.Scalar() + "'", ok);
          }
        }
      } else if (key == "commands") {
        if (!v.IsSequence()) syntax("commands must be a list", v);
        for (const auto& c : v) sc.steps.push_back(step(c));
      } else {
        syntax("unknown scenario key '" + key + "'", k);
      }
    }
  });
  std::stable_sort(sc.steps.begin(), sc.steps.end(),
                   [](const ScenarioStep& a, const ScenarioStep& b) { return a.at < b.at; });
  return sc;
}

FaultPlan parse_faults(std::string_view document) {
  FaultPlan plan;
  lang::detail::guard([&] {
    const YAML::Node root = lang::detail::load(document);
    for (const auto& [k, v] : entries(root, "fault file")) {
      if (k.Scalar() != "faults") syntax("unknown fault file key '" + k.Scalar() + "'", k);
      for (const auto& [action, rules] : entries(v, "faults")) {
        const std::string name = scalar(action, "action");
        if (rules.IsSequence())
          for (const auto& r : rules) plan.add(name, fault_rule(r));
        else
          plan.add(name, fault_rule(rules));
      }
    }
  });
  return plan;
}

std::string error_kind(const std::exception& error) {
  if (dynamic_cast<const NoOpenTicket*>(&error)) return "NoOpenTicket";
  if (dynamic_cast<const AmbiguousTarget*>(&error)) return "AmbiguousTarget";
  if (dynamic_cast<const InvalidStatus*>(&error)) return "InvalidStatus";
  if (dynamic_cast<const UnknownTask*>(&error)) return "UnknownTask";
  if (dynamic_cast<const UnknownMachine*>(&error)) return "UnknownMachine";
  return "Error";
}

ScenarioResult run_scenario(Scheduler& scheduler, const Scenario& scenario, std::size_t max_ticks) {
  ScenarioResult result;
  auto resolve = [&](const ScenarioStep& s) -> MachineId {
    if (!s.machine) throw UnknownMachine("command needs a machine");
    auto it = result.aliases.find(*s.machine);
    if (it != result.aliases.end()) return it->second;
    try {
      return static_cast<MachineId>(std::stoull(*s.machine));
    } catch (const std::exception&) {
      throw UnknownMachine("unknown machine alias '" + *s.machine + "'");
    }
  };
  auto execute = [&](const ScenarioStep& s) {
    using K = ScenarioStep::Kind;
    switch (s.kind) {
    case K::launch: {
      const MachineId id = scheduler.launch(s.task, s.args);
      if (!s.alias.empty()) result.aliases[s.alias] = id;
      break;
    }
    case K::answer:
      if (s.ticket)
        scheduler.deliver_answer(s.ticket, s.value, s.name);
      else if (s.machine)
        scheduler.deliver_answer_to(resolve(s), s.value, s.name);
      else
        scheduler.deliver_answer(std::nullopt, s.value, s.name);
      break;
    case K::pause: scheduler.pause(resolve(s)); break;
    case K::resume: scheduler.resume(resolve(s)); break;
    case K::inject_fault: scheduler.inject_fault(s.action, s.fault); break;
    case K::expect_status: {
      const Status actual = scheduler.status(resolve(s));
      if (actual != s.expected)
        result.failures.push_back("line " + std::to_string(s.line) + ": expected " + *s.machine + " to be " +
                                  to_string(s.expected) + ", found " + to_string(actual));
      break;
    }
    }
  };

  std::size_t next = 0;
  for (std::size_t i = 0; i < max_ticks; ++i) {
    while (next < scenario.steps.size() && scenario.steps[next].at <= scheduler.now()) {
      const ScenarioStep& s = scenario.steps[next++];
      try {
        execute(s);
        if (s.expect_error)
          result.failures.push_back("line " + std::to_string(s.line) + ": expected " + *s.expect_error);
      } catch (const std::exception& e) {
        if (!s.expect_error || *s.expect_error != error_kind(e))
          result.failures.push_back("line " + std::to_string(s.line) + ": " + e.what());
      }
    }
    if (next == scenario.steps.size() && scheduler.quiescent()) {
      result.finished = true;
      return result;
    }
    scheduler.tick();
  }
  return result;
}

} // namespace pnm
