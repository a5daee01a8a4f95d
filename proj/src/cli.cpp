#include "pnm/cli.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "pnm/analysis.hpp"
#include "pnm/compiler.hpp"
#include "pnm/scenario.hpp"
#include "pnm/scheduler.hpp"

namespace pnm {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Parses a document, prefixing errors with the file name.
template <class F>
auto parse_file(const std::string& path, F&& parse) {
  const std::string text = read_file(path);
  try {
    return parse(text);
  } catch (const lang::ParseError& e) {
    throw UsageError(path + ": " + lang::to_string(e.kind()) + ": " + e.what());
  }
}

struct Loaded {
  lang::DomainSpec domain;
  lang::PlanSpec plan;
  CompiledTask task;
};

std::string task_name(const std::string& plan_path) { return fs::path(plan_path).stem().string(); }

Loaded load(const std::string& domain_path, const std::string& plan_path) {
  Loaded l;
  l.domain = parse_file(domain_path, [](const std::string& t) { return lang::parse_domain(t); });
  l.plan = parse_file(plan_path, [&](const std::string& t) { return lang::parse_plan(t, l.domain); });
  try {
    l.task = compile(l.domain, l.plan, task_name(plan_path));
  } catch (const CompileError& e) {
    throw UsageError(plan_path + ": CompileError: " + e.what());
  }
  return l;
}

struct Options {
  std::string domain;
  std::string plan;
  std::string scenario;
  std::string faults;
  std::string trace;
  std::string clock = "virtual";
  std::string out;
  std::uint64_t seed = 0;
  bool interactive = false;
  std::optional<bool> preempt_on_pause;
  bool marking = false;
  std::size_t max_markings = Bounds{}.max_markings;
  Tokens max_tokens = Bounds{}.max_tokens;
  std::size_t max_ticks = 1000000;
  unsigned ms_per_unit = 100;
};

int cmd_compile(const Options& o, std::ostream& out) {
  const Loaded l = load(o.domain, o.plan);
  const Net& net = l.task.machine.net();
  out << "places=" << net.place_count() << " transitions=" << net.transition_count()
      << " goals=" << l.task.machine.goal_places().size() << "\n";
  return exit_code::ok;
}

int cmd_verify(const Options& o, std::ostream& out) {
  const Loaded l = load(o.domain, o.plan);
  Bounds b;
  b.max_markings = o.max_markings;
  b.max_tokens = o.max_tokens;
  const CheckReport r = check(l.task.machine, b);
  out << format_report(l.task.machine.net(), r) << "\n";
  return r.ok() && r.dead_transitions.empty() ? exit_code::ok : exit_code::task_failed;
}

int cmd_dot(const Options& o, std::ostream& out) {
  const Loaded l = load(o.domain, o.plan);
  const Marking& m0 = l.task.machine.initial_marking();
  const std::string dot = export_dot(l.task.machine.net(), o.marking ? &m0 : nullptr);
  if (o.out.empty() || o.out == "-") {
    out << dot;
  } else {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + o.out + "'");
    f << dot;
  }
  return exit_code::ok;
}

/// Splits a console line into whitespace separated words.
std::vector<std::string> words(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> w;
  for (std::string s; in >> s;) w.push_back(s);
  return w;
}

bool is_number(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::optional<SchedulerCommand> console_command(const std::vector<std::string>& w, std::string& error) {
  SchedulerCommand c;
  const std::string& verb = w[0];
  if (verb == "answer") {
    if (w.size() < 2) {
      error = "usage: answer [<ticket>] <value>";
      return std::nullopt;
    }
    std::size_t first = 1;
    if (w.size() > 2 && is_number(w[1])) {
      c.ticket = std::stoull(w[1]);
      first = 2;
    }
    std::string text;
    for (std::size_t i = first; i < w.size(); ++i) text += (i > first ? " " : "") + w[i];
    c.kind = SchedulerCommand::Kind::answer;
    c.value = kb::parse_scalar(text);
    return c;
  }
  if (verb == "task") {
    if (w.size() < 2) {
      error = "usage: task <name> [k=v ...]";
      return std::nullopt;
    }
    c.kind = SchedulerCommand::Kind::launch;
    c.task = w[1];
    for (std::size_t i = 2; i < w.size(); ++i) {
      const auto eq = w[i].find('=');
      if (eq == std::string::npos || eq == 0) {
        error = "arguments look like key=value";
        return std::nullopt;
      }
      c.args[w[i].substr(0, eq)] = kb::parse_scalar(w[i].substr(eq + 1));
    }
    return c;
  }
  if (verb == "pause" || verb == "resume") {
    if (w.size() != 2 || !is_number(w[1])) {
      error = "usage: " + verb + " <machine>";
      return std::nullopt;
    }
    c.kind = verb == "pause" ? SchedulerCommand::Kind::pause : SchedulerCommand::Kind::resume;
    c.machine = std::stoull(w[1]);
    return c;
  }
  error = "unknown command '" + verb + "'";
  return std::nullopt;
}

void print_statuses(const Scheduler& s, std::ostream& out) {
  for (MachineId id : s.machines()) {
    const MachineEntry& e = s.entry(id);
    out << "machine " << id << " " << e.task << " " << to_string(e.machine.status());
    if (!e.reason.empty()) out << " (" << e.reason << ")";
    out << "\n";
  }
}

void interactive_loop(Scheduler& s, const std::string& main_task, std::istream& in, std::ostream& out) {
  std::atomic<bool> quit{false};
  std::atomic<bool> eof{false};
  s.trace().subscribe([&](const TraceEvent& e) {
    if (e.kind == "ticket-open")
      out << "? " << e.payload["ticket"].get<TicketId>() << " " << e.machine << " "
          << e.payload["name"].get<std::string>() << std::endl;
    else if (e.kind == "status-change" && terminal(s.status(e.machine)))
      out << "# " << e.machine << " " << e.payload["to"].get<std::string>() << std::endl;
  });
  s.on_error([&](const std::string& msg) { out << "! " << msg << std::endl; });

  std::thread reader([&] {
    for (std::string line; !quit && std::getline(in, line);) {
      const auto w = words(line);
      if (w.empty()) continue;
      if (w[0] == "quit") {
        quit = true;
        break;
      }
      SchedulerCommand c;
      if (w[0] == "status") {
        c.kind = SchedulerCommand::Kind::custom;
        c.custom = [&s, &out] { print_statuses(s, out); };
      } else {
        std::string error;
        auto parsed = console_command(w, error);
        if (!parsed) {
          c.kind = SchedulerCommand::Kind::custom;
          c.custom = [&out, error] { out << "! " << error << std::endl; };
        } else {
          c = std::move(*parsed);
        }
      }
      s.submit(std::move(c));
    }
    eof = true;
  });

  s.launch(main_task);
  while (!quit) {
    if (eof && s.quiescent()) break;
    // With input closed, nothing can answer an open question: stop once no
    // machine can move and no timer is pending.
    if (eof && !s.runtime().next_due()) {
      bool stuck = true;
      for (MachineId id : s.machines())
        if (s.status(id) == Status::running || s.status(id) == Status::ready) stuck = false;
      if (stuck) break;
    }
    s.tick();
  }
  quit = true;
  reader.join();
}

int cmd_run(const Options& o, std::istream& in, std::ostream& out, std::ostream& err) {
  Loaded l = load(o.domain, o.plan);
  const std::string main_task = l.task.name;

  Scenario scenario;
  if (!o.scenario.empty())
    scenario = parse_file(o.scenario, [](const std::string& t) { return parse_scenario(t); });
  FaultPlan faults;
  if (!o.faults.empty()) faults = parse_file(o.faults, [](const std::string& t) { return parse_faults(t); });
  if (o.clock != "virtual" && o.clock != "wall") throw UsageError("--clock must be virtual or wall");

  SchedulerOptions so;
  so.preempt_on_pause = o.preempt_on_pause.value_or(scenario.preempt_on_pause.value_or(false));
  if (scenario.abandon_after) so.abandon_after = *scenario.abandon_after;
  if (o.clock == "wall") so.wall_unit = std::chrono::milliseconds(o.ms_per_unit);
  if (o.interactive) {
    so.abandon_after = 0;
    if (so.wall_unit.count() == 0) so.wall_unit = std::chrono::milliseconds(10);
  }

  std::unique_ptr<kb::GlobalKBPort> global;
  if (o.interactive)
    global = std::make_unique<kb::ConsoleKB>();
  else if (!o.scenario.empty())
    global = std::make_unique<kb::ScriptedOracle>(scenario.oracle, true);
  else
    global = std::make_unique<kb::StaticKB>();

  Scheduler s(*global, ActionRegistry::with_builtins(), std::move(faults), o.seed, so);

  // Extra tasks become actions of the shared domain so later plans can call them.
  const fs::path base = o.scenario.empty() ? fs::path(".") : fs::path(o.scenario).parent_path();
  std::vector<std::pair<TaskDecl, lang::PlanSpec>> extra;
  for (const TaskDecl& t : scenario.tasks) {
    const std::string path = (base / t.plan).string();
    lang::PlanSpec plan = parse_file(path, [&](const std::string& text) { return lang::parse_plan(text, l.domain); });
    CompiledTask task;
    try {
      task = compile(l.domain, plan, t.name);
    } catch (const CompileError& e) {
      throw UsageError(path + ": CompileError: " + e.what());
    }
    s.register_task(std::move(task), t.params);
    l.domain.actions[t.name] = lang::ActionDecl{t.name, lang::SuperType::rpn_action, t.params, {}, {}};
  }
  s.register_task(l.task);

  int code = exit_code::ok;
  if (o.interactive) {
    interactive_loop(s, main_task, in, out);
  } else if (!o.scenario.empty()) {
    const ScenarioResult r = run_scenario(s, scenario, o.max_ticks);
    for (const auto& f : r.failures) err << o.scenario << ": " << f << "\n";
    if (!r.finished) err << "scenario did not finish within " << o.max_ticks << " ticks\n";
    if (!r.ok()) code = exit_code::task_failed;
  } else {
    s.launch(main_task);
    if (!s.run(o.max_ticks)) {
      err << "run did not finish within " << o.max_ticks << " ticks\n";
      code = exit_code::task_failed;
    }
  }
  if (!o.interactive) print_statuses(s, out);
  out << "time=" << s.now() << " ticks=" << s.ticks() << "\n";

  if (!o.trace.empty()) {
    std::ofstream f(o.trace, std::ios::binary);
    if (!f) throw UsageError("cannot write '" + o.trace + "'");
    s.trace().write(f);
  }
  for (MachineId id : s.machines()) {
    const Status st = s.status(id);
    if (st == Status::internal_error) return exit_code::internal;
    if (st == Status::failed) code = exit_code::task_failed;
  }
  return code;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"Petri net machine compiler and executor", "pnm"};
  app.require_subcommand(1);
  Options o;

  auto add_inputs = [&o](CLI::App* cmd) {
    cmd->add_option("--domain", o.domain, "domain document")->required();
    cmd->add_option("--plan", o.plan, "plan document")->required();
  };
  CLI::App* compile_cmd = app.add_subcommand("compile", "compile a plan and print a net summary");
  add_inputs(compile_cmd);
  CLI::App* verify_cmd = app.add_subcommand("verify", "check reachability of the compiled net");
  add_inputs(verify_cmd);
  verify_cmd->add_option("--max-markings", o.max_markings, "marking budget")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--max-tokens", o.max_tokens, "tokens per place budget")->check(CLI::PositiveNumber);
  CLI::App* dot_cmd = app.add_subcommand("dot", "write the compiled net as Graphviz");
  add_inputs(dot_cmd);
  dot_cmd->add_option("--out", o.out, "output file (default stdout)");
  dot_cmd->add_flag("--marking", o.marking, "show the initial marking");
  CLI::App* run_cmd = app.add_subcommand("run", "execute a plan");
  add_inputs(run_cmd);
  run_cmd->add_option("--scenario", o.scenario, "scripted commands");
  run_cmd->add_option("--faults", o.faults, "fault injection file");
  run_cmd->add_flag("--interactive", o.interactive, "console answers questions and launches tasks");
  run_cmd->add_option("--seed", o.seed, "seed for probabilistic faults");
  run_cmd->add_option("--trace", o.trace, "write the trace to this file");
  run_cmd->add_option("--clock", o.clock, "virtual or wall")->check(CLI::IsMember({"virtual", "wall"}));
  run_cmd->add_option("--ms-per-unit", o.ms_per_unit, "wall clock milliseconds per time unit");
  run_cmd->add_option("--preempt-on-pause", o.preempt_on_pause, "preempt running actions of paused machines");
  run_cmd->add_option("--max-ticks", o.max_ticks, "give up after this many rounds")->check(CLI::PositiveNumber);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_code::ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return exit_code::ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return exit_code::usage;
  }

  try {
    if (compile_cmd->parsed()) return cmd_compile(o, out);
    if (verify_cmd->parsed()) return cmd_verify(o, out);
    if (dot_cmd->parsed()) return cmd_dot(o, out);
    if (run_cmd->parsed()) return cmd_run(o, in, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code::usage;
  } catch (const BoundExceeded& e) {
    err << "BoundExceeded: " << e.what() << "\n";
    return exit_code::bound;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return exit_code::internal;
  }
  return exit_code::usage;
}

} // namespace pnm
