// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exits nonzero when any criterion fails.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "pnm/analysis.hpp"
#include "pnm/cli.hpp"
#include "pnm/scenario.hpp"
#include "pnm/scheduler.hpp"
#include "support.hpp"

using namespace pnm;
using kb::Value;
using testing_support::compile_fixture;
using testing_support::read;
using testing_support::source_path;

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
  bool pass = true;
  std::string detail;
};

class Checker {
public:
  void expect(bool ok, const std::string& what) {
    if (!ok && result.pass) result.detail = what;
    result.pass = result.pass && ok;
  }
  Verdict result;
};

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string fmt_ms(double ms) {
  std::ostringstream s;
  s.precision(3);
  s << ms << " ms";
  return s.str();
}

// p1 --2--> t --1--> p2.
Verdict weighted_step() {
  Checker c;
  const auto start = Clock::now();
  Machine m(testing_support::weighted_pair(), Marking(std::vector<Tokens>{3, 0}), {});
  const StepReport r = m.step();
  const double ms = elapsed_ms(start);
  c.expect(r.marking.counts() == std::vector<Tokens>{1, 1}, "marking after one step is not [1,1]");
  c.expect(ms < 1.0, "took " + fmt_ms(ms));
  if (c.result.pass) c.result.detail = "[3,0] -> [1,1] in " + fmt_ms(ms);
  return c.result;
}

Verdict fork_join_sequence() {
  Checker c;
  const Net net = testing_support::fork_join();
  Marking m0(net.place_count());
  m0.set(PlaceId{0}, 1);
  Machine m(net, m0, {PlaceId{5}});
  std::vector<std::string> seen{format_marking(net, m.marking())};
  for (int i = 0; i < 3; ++i) seen.push_back(format_marking(net, m.step().marking));
  const std::vector<std::string> expected{"{p1}", "{p2, p3}", "{p4, p5}", "{p6}"};
  c.expect(seen == expected, "sequence differs");
  c.expect(m.status() == Status::succeeded, "goal not reached");
  if (c.result.pass) c.result.detail = "{p1} -> {p2, p3} -> {p4, p5} -> {p6}";
  return c.result;
}

struct Span {
  std::string action;
  TimeUnits start = -1;
  TimeUnits end = -1;
};

Verdict example_end_to_end() {
  Checker c;
  const auto begin = Clock::now();
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("plan.yaml"));
  const MachineId id = s.launch("main");
  const bool finished = s.run(1000);
  const double ms = elapsed_ms(begin);
  c.expect(finished && s.status(id) == Status::succeeded, "machine did not succeed");

  std::map<std::uint64_t, Span> spans;
  for (const auto& e : s.trace().events()) {
    if (e.kind == "action-start") {
      auto& sp = spans[e.payload["instance"].get<std::uint64_t>()];
      sp.action = e.payload["action"].get<std::string>();
      sp.start = e.time;
    } else if (e.kind == "action-end") {
      spans[e.payload["instance"].get<std::uint64_t>()].end = e.time;
    }
  }
  const Span* dummy = nullptr;
  std::vector<const Span*> waits;
  for (const auto& [inst, sp] : spans) {
    if (sp.action == "dummy_server") dummy = &sp;
    if (sp.action == "wait") waits.push_back(&sp);
  }
  c.expect(dummy != nullptr && waits.size() == 4, "expected one dummy_server and four waits");
  if (!c.result.pass) return c.result;

  std::multiset<TimeUnits> durations;
  TimeUnits first_end = std::numeric_limits<TimeUnits>::max(), last_start = 0, last_end = 0;
  for (const Span* w : waits) {
    c.expect(w->start >= dummy->end, "a wait started before dummy_server completed");
    durations.insert(w->end - w->start);
    first_end = std::min(first_end, w->end);
    last_start = std::max(last_start, w->start);
    last_end = std::max(last_end, w->end);
  }
  c.expect(last_start < first_end, "waits do not overlap");
  c.expect(durations == std::multiset<TimeUnits>{3, 3, 5, 6}, "wait durations are not {3,3,5,6}");
  const TimeUnits dummy_duration = dummy->end - dummy->start;
  const TimeUnits makespan = last_end - dummy->start;
  c.expect(makespan == dummy_duration + 6, "makespan " + std::to_string(makespan) + " != dummy + 6");
  c.expect(ms < 1000.0, "took " + fmt_ms(ms));
  if (c.result.pass)
    c.result.detail = "durations {3,3,5,6}, makespan " + std::to_string(makespan) + " = " +
                      std::to_string(dummy_duration) + " + 6, " + fmt_ms(ms);
  return c.result;
}

struct CliRun {
  int code = 0;
  std::string out;
  std::string trace;
};

CliRun run_cli_with_trace(std::vector<std::string> args) {
  const fs::path trace = fs::temp_directory_path() / ("pnm_acceptance_" + std::to_string(::getpid()) + ".ndjson");
  args.push_back("--trace");
  args.push_back(trace.string());
  std::istringstream in;
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, in, out, err);
  r.out = out.str() + err.str();
  std::ifstream f(trace, std::ios::binary);
  std::ostringstream buf;
  buf << f.rdbuf();
  r.trace = buf.str();
  fs::remove(trace);
  return r;
}

std::vector<std::string> run_args(const std::string& plan, std::vector<std::string> extra = {}) {
  std::vector<std::string> a{"run", "--domain", source_path("fixtures/domain.yaml"), "--plan",
                             source_path("fixtures/" + plan)};
  a.insert(a.end(), extra.begin(), extra.end());
  return a;
}

std::vector<std::string> fired(const std::string& trace) {
  std::vector<std::string> out;
  std::istringstream in(trace);
  for (std::string line; std::getline(in, line);) {
    const auto j = Json::parse(line);
    if (j["kind"] == "fired") out.push_back(j["payload"]["transition"].get<std::string>());
  }
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

Verdict outcome_branching() {
  Checker c;
  const std::string outcomes[] = {"succeeded", "failed", "preempted"};
  const int codes[] = {0, 1, 0};
  for (int i = 0; i < 3; ++i) {
    const std::string& o = outcomes[i];
    const CliRun r = run_cli_with_trace(run_args("single.yaml", {"--faults", source_path("fixtures/faults/wait_" + o + ".yaml")}));
    c.expect(r.code == codes[i], o + ": exit code " + std::to_string(r.code));
    const auto f = fired(r.trace);
    for (const auto& other : outcomes)
      c.expect(contains(f, "s0.wait." + other) == (other == o), o + ": outcome transition " + other + " mismatch");
    c.expect(r.trace == read("tests/golden/outcome_" + o + ".ndjson"), o + ": trace differs from golden");
  }
  if (c.result.pass) c.result.detail = "3 runs, each fired only its outcome transition, golden traces match";
  return c.result;
}

Verdict recovery_defaults() {
  Checker c;
  {
    kb::StaticKB global;
    Scheduler s(global);
    s.register_task(compile_fixture("missing_param.yaml"));
    const MachineId m = s.launch("main");
    s.run(100);
    c.expect(s.status(m) == Status::failed, "missing parameter did not fail the machine");
    bool precheck_fail = false, started = false;
    for (const auto& e : s.trace().events()) {
      precheck_fail = precheck_fail || (e.kind == "fired" && e.payload["transition"] == "s0.wait.precheck_fail");
      started = started || e.kind == "action-start";
    }
    c.expect(precheck_fail, "pre-check failure transition did not fire");
    c.expect(!started, "an action started despite the missing parameter");
  }
  {
    kb::StaticKB global;
    FaultPlan faults;
    faults.add("wait", {1, Outcome::preempted, 0, 1.0});
    Scheduler s(global, ActionRegistry::with_builtins(), faults);
    s.register_task(compile_fixture("single.yaml"));
    const MachineId m = s.launch("main");
    s.run(100);
    c.expect(s.status(m) == Status::succeeded, "preempted action did not let the machine continue");
  }
  if (c.result.pass) c.result.detail = "missing param -> failed; preempted -> continued to succeeded";
  return c.result;
}

// One interleaving of the experiment script: start a guide task, interrupt
// it with further tasks and chat, resume it. Returns the number of errors.
std::size_t interleaving_run(int scenario, int variant, const CompiledTask& guide, const CompiledTask& chat,
                             std::string& why) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(scenario) * 1000 + variant);
  kb::ConsoleKB global;
  Scheduler s(global);
  s.register_task(guide);
  s.register_task(chat);
  std::size_t errors = 0;
  auto fail = [&](const std::string& msg) {
    if (why.empty()) why = "scenario " + std::to_string(scenario) + "/" + std::to_string(variant) + ": " + msg;
    ++errors;
  };
  auto idle = [&](int max) {
    const int n = static_cast<int>(rng() % (max + 1));
    for (int i = 0; i < n; ++i) s.tick();
  };
  auto wait_ticket = [&](MachineId m) {
    for (int i = 0; i < 200 && s.open_tickets(m).empty() && !terminal(s.status(m)); ++i) s.tick();
    return !s.open_tickets(m).empty();
  };
  std::map<MachineId, std::string> expected;  // value each machine should end up with
  auto answer_of = [](MachineId m) { return "v" + std::to_string(m); };
  auto launch = [&](const std::string& task) {
    const MachineId m = s.launch(task);
    if (s.entry(m).task != task) fail("launched wrong task");
    if (s.foreground() != m) fail("new task did not take focus");
    return m;
  };

  const MachineId a = launch("guide");
  if (!wait_ticket(a)) fail("task A never asked");
  idle(2);

  // The scenario number fixes which interruptions happen; the variant
  // randomizes timing, pausing and answer order.
  const int interrupts = 1 + scenario % 4;
  std::vector<MachineId> deferred;
  for (int i = 0; i < interrupts; ++i) {
    const bool is_task = ((scenario >> i) & 1) != 0;
    const bool pause_a = i == 0 || rng() % 2 == 0;
    if (pause_a && s.status(a) != Status::paused && !terminal(s.status(a))) {
      s.pause(a);
      if (s.status(a) != Status::paused) fail("pause did not take effect");
    }
    const MachineId x = launch(is_task ? "guide" : "chat");
    if (!wait_ticket(x)) fail("interrupting task never asked");
    idle(2);
    if (rng() % 3 == 0) {
      deferred.push_back(x);
    } else {
      const RoutingReport r = s.deliver_answer(std::nullopt, Value(answer_of(x)));
      if (r.machine != x) fail("unaddressed answer went to machine " + std::to_string(r.machine));
    }
    expected[x] = answer_of(x);
    idle(3);
  }

  // Resume A: it takes focus and re-asks its question.
  if (s.status(a) == Status::paused) {
    const std::size_t before = s.trace().events().size();
    s.resume(a);
    bool reprompted = false;
    for (std::size_t i = before; i < s.trace().events().size(); ++i) {
      const auto& e = s.trace().events()[i];
      reprompted = reprompted || (e.kind == "ticket-open" && e.machine == a && e.payload["reprompt"] == true);
    }
    if (!reprompted) fail("resume did not re-prompt");
  }
  idle(2);
  if (s.foreground() != a) fail("A is not foreground after resume");
  const RoutingReport ra = s.deliver_answer(std::nullopt, Value(answer_of(a)));
  if (ra.machine != a) fail("answer after resume went to machine " + std::to_string(ra.machine));
  expected[a] = answer_of(a);

  std::shuffle(deferred.begin(), deferred.end(), rng);
  for (MachineId x : deferred) {
    idle(2);
    const auto open = s.open_tickets(x);
    if (open.size() != 1) {
      fail("deferred machine lost its ticket");
      continue;
    }
    const RoutingReport r = s.deliver_answer(open[0].id, Value(answer_of(x)));
    if (r.machine != x) fail("explicit ticket routed to the wrong machine");
  }

  if (!s.run(2000)) fail("did not finish");
  for (const auto& [m, value] : expected) {
    if (s.status(m) != Status::succeeded) fail("machine " + std::to_string(m) + " ended " + to_string(s.status(m)));
    const std::string key = s.entry(m).task == "guide" ? "destination" : "topic";
    if (s.entry(m).local.get(key) != Value(value)) fail("machine " + std::to_string(m) + " holds the wrong answer");
    for (const auto& [k, v] : s.entry(m).local.entries())
      if (v.kind() == Value::Kind::text && v.text().starts_with("v") && v.text() != value)
        fail("machine " + std::to_string(m) + " saw another machine's answer");
  }
  return errors;
}

Verdict interleaving_suite() {
  Checker c;
  const auto begin = Clock::now();
  const CompiledTask guide = compile_fixture("guide.yaml", "guide");
  const CompiledTask chat = compile_fixture("chat.yaml", "chat");
  std::size_t runs = 0, errors = 0;
  std::string why;
  for (int scenario = 0; scenario < 25; ++scenario)
    for (int variant = 0; variant < 10; ++variant) {
      try {
        errors += interleaving_run(scenario, variant, guide, chat, why);
      } catch (const std::exception& ex) {
        ++errors;
        if (why.empty()) why = ex.what();
      }
      ++runs;
    }
  const double ms = elapsed_ms(begin);
  c.expect(errors == 0, std::to_string(errors) + " errors, first: " + why);
  c.expect(ms < 10000.0, "took " + fmt_ms(ms));
  if (c.result.pass) c.result.detail = std::to_string(runs) + " runs, 0 routing errors, " + fmt_ms(ms);
  return c.result;
}

Verdict oracle_equivalence() {
  Checker c;
  const auto begin = Clock::now();
  std::mt19937_64 rng(7);
  std::size_t mismatches = 0, firings = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto naive = oracle::random_net(rng);
    const Net net = testing_support::to_net(naive);
    const auto matrices = build_incidence(net);
    auto naive_m = oracle::random_marking(rng, naive.places);
    Marking m(naive_m);
    for (int step = 0; step < 12; ++step) {
      std::vector<Tokens> counts(naive.transitions);
      for (auto& x : counts) x = static_cast<Tokens>(rng() % 3);
      const auto expected = oracle::fire_vector(naive, naive_m, counts);
      if (!expected) {
        bool threw = false;
        try {
          fire(m, FiringVector(counts), matrices);
        } catch (const InadmissibleFiring&) {
          threw = true;
        }
        mismatches += !threw;
        continue;
      }
      m = fire(m, FiringVector(counts), matrices);
      naive_m = *expected;
      ++firings;
      mismatches += m.counts() != naive_m;
    }
  }
  const double ms = elapsed_ms(begin);
  c.expect(mismatches == 0, std::to_string(mismatches) + " mismatches");
  c.expect(ms < 30000.0, "took " + fmt_ms(ms));
  if (c.result.pass)
    c.result.detail = "1000 nets, " + std::to_string(firings) + " admissible firings, 0 mismatches, " + fmt_ms(ms);
  return c.result;
}

std::vector<std::string> shipped_plans() {
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(source_path("fixtures")))
    if (e.is_regular_file() && e.path().extension() == ".yaml" && e.path().filename() != "domain.yaml")
      out.push_back(e.path().filename().string());
  std::sort(out.begin(), out.end());
  return out;
}

Verdict reachability_guarantee() {
  Checker c;
  const auto plans = shipped_plans();
  for (const auto& p : plans) {
    const CheckReport r = check(compile_fixture(p).machine);
    c.expect(r.unreachable_places.empty(), p + ": unreachable places");
    c.expect(r.goal_reachable, p + ": goal unreachable");
  }
  if (c.result.pass) c.result.detail = std::to_string(plans.size()) + " fixtures, no unreachable places, goal reachable";
  return c.result;
}

Verdict determinism() {
  Checker c;
  std::size_t runs = 0;
  for (const auto& p : shipped_plans()) {
    for (const std::string seed : {"1", "99"}) {
      const auto args = run_args(p, {"--faults", source_path("fixtures/faults/flaky_wait.yaml"), "--seed", seed});
      c.expect(run_cli_with_trace(args).trace == run_cli_with_trace(args).trace, p + ": traces differ");
      ++runs;
    }
  }
  for (const auto& [scenario, plan] : std::vector<std::pair<std::string, std::string>>{
           {"interleave.yaml", "guide.yaml"},
           {"restaurant.yaml", "restaurant.yaml"},
           {"preempt_on_pause.yaml", "alternative.yaml"},
           {"two_guides.yaml", "guide.yaml"}}) {
    const auto args = run_args(plan, {"--scenario", source_path("fixtures/scenarios/" + scenario)});
    c.expect(run_cli_with_trace(args).trace == run_cli_with_trace(args).trace, scenario + ": traces differ");
    ++runs;
  }
  if (c.result.pass) c.result.detail = std::to_string(runs) + " paired runs byte-identical";
  return c.result;
}

Verdict kb_isolation() {
  Checker c;
  const auto d = testing_support::domain();
  const auto plan = lang::parse_plan("plan:\n"
                                     "  - kb_op: {op: copy, from: who, to: sentinel}\n"
                                     "  - wait: {time: 2}\n"
                                     "  - kb_op: {op: copy, from: sentinel, to: text}\n"
                                     "  - echo: {}\n",
                                     d);
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile(d, plan, "sentinel"));
  const MachineId a = s.launch("sentinel", {{"who", Value("A")}});
  const MachineId b = s.launch("sentinel", {{"who", Value("B")}});
  bool overlapped = false;
  for (int i = 0; i < 100 && !s.quiescent(); ++i) {
    s.tick();
    overlapped = overlapped || (s.entry(a).in_flight.size() && s.entry(b).in_flight.size());
  }
  c.expect(overlapped, "instances never ran at the same time");
  std::size_t contaminated = 0;
  for (const auto& [m, mine, other] : {std::tuple{a, "A", "B"}, std::tuple{b, "B", "A"}}) {
    c.expect(s.status(m) == Status::succeeded, "instance did not succeed");
    c.expect(s.entry(m).local.get("sentinel") == Value(mine), "sentinel overwritten");
    c.expect(s.entry(m).local.get("echo") == Value(mine), "echo result crossed over");
    for (const auto& [k, v] : s.entry(m).local.entries()) contaminated += v == Value(other);
  }
  c.expect(contaminated == 0, std::to_string(contaminated) + " foreign values");
  if (c.result.pass) c.result.detail = "two overlapping instances, 0 foreign values";
  return c.result;
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"weighted net single step", weighted_step},
      {"fork/join marking sequence", fork_join_sequence},
      {"example domain and plan end to end", example_end_to_end},
      {"outcome branching under fault injection", outcome_branching},
      {"default recovery behaviour", recovery_defaults},
      {"interleaving suite", interleaving_suite},
      {"matrix firing equals token game", oracle_equivalence},
      {"reachability of shipped fixtures", reachability_guarantee},
      {"trace determinism", determinism},
      {"knowledge base isolation", kb_isolation},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& ex) {
      r = {false, std::string("exception: ") + ex.what()};
    }
    failed += !r.pass;
    std::cout << "criterion " << (i + 1) << " " << (r.pass ? "PASS" : "FAIL") << ": " << criteria[i].first << " ("
              << r.detail << ")" << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
