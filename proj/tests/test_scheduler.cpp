#include <gtest/gtest.h>

#include <random>

#include "pnm/scheduler.hpp"
#include "support.hpp"

using namespace pnm;
using kb::Value;
using testing_support::compile_fixture;

namespace {

CompiledTask inline_task(const std::string& name, const std::string& plan) {
  const auto d = testing_support::domain();
  return compile(d, lang::parse_plan(plan, d), name);
}

std::size_t count(const Trace& trace, MachineId m, const std::string& kind) {
  std::size_t n = 0;
  for (const auto& e : trace.events()) n += e.machine == m && e.kind == kind;
  return n;
}

void tick_until(Scheduler& s, const std::function<bool()>& done, std::size_t limit = 1000) {
  for (std::size_t i = 0; i < limit && !done(); ++i) s.tick();
  ASSERT_TRUE(done());
}

const char* kTwoQuestions = "plan:\n  - concurrent_actions:\n      - ask: {question: a}\n      - ask: {question: b}\n";

} // namespace

TEST(Scheduler, EmptyRegistryTick) {
  kb::StaticKB global;
  Scheduler s(global);
  const RoundReport r = s.tick();
  EXPECT_TRUE(r.steps.empty());
  EXPECT_TRUE(r.completions.empty());
  EXPECT_TRUE(r.idle);
  EXPECT_TRUE(s.quiescent());
}

TEST(Scheduler, LaunchUnknownTask) {
  kb::StaticKB global;
  Scheduler s(global);
  EXPECT_THROW(s.launch("nope"), UnknownTask);
  EXPECT_THROW(s.entry(1), UnknownMachine);
}

TEST(Scheduler, ExamplePlanFinishesWithinBudget) {
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("plan.yaml"));
  const MachineId m = s.launch("main");
  EXPECT_EQ(s.status(m), Status::running);
  EXPECT_EQ(s.foreground(), m);
  ASSERT_TRUE(s.run(40));
  EXPECT_LE(s.ticks(), 40u);
  EXPECT_EQ(s.status(m), Status::succeeded);
}

TEST(Scheduler, TwoMachinesFinishIndependently) {
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("plan.yaml"));
  s.register_task(compile_fixture("single.yaml", "single"));
  const MachineId a = s.launch("main");
  const MachineId b = s.launch("single");
  EXPECT_NE(a, b);
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(a), Status::succeeded);
  EXPECT_EQ(s.status(b), Status::succeeded);
}

TEST(Scheduler, EveryRunningMachineStepsEachTick) {
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("plan.yaml"));
  std::set<MachineId> launched;
  for (int i = 0; i < 3; ++i) launched.insert(s.launch("main"));
  const RoundReport r = s.tick();
  std::set<MachineId> stepped;
  for (const auto& [id, step] : r.steps) stepped.insert(id);
  EXPECT_EQ(stepped, launched);
}

TEST(Scheduler, InstancesHaveDisjointKnowledge) {
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(inline_task("copy", "plan:\n  - kb_op: {op: copy, from: who, to: sentinel}\n  - echo: {text: hi}\n"));
  const MachineId a = s.launch("copy", {{"who", Value("A")}});
  const MachineId b = s.launch("copy", {{"who", Value("B")}});
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.entry(a).local.get("sentinel"), Value("A"));
  EXPECT_EQ(s.entry(b).local.get("sentinel"), Value("B"));
  EXPECT_NE(&s.entry(a).local, &s.entry(b).local);
}

TEST(Scheduler, MissingParameterFailsMachine) {
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("missing_param.yaml"));
  const MachineId m = s.launch("main");
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(m), Status::failed);
  EXPECT_EQ(count(s.trace(), m, "action-start"), 0u);
}

TEST(Scheduler, LoopBodyRunsOnce) {
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("loop.yaml"));
  const MachineId m = s.launch("main");
  ASSERT_TRUE(s.run(200));
  EXPECT_EQ(s.status(m), Status::succeeded);
  EXPECT_EQ(count(s.trace(), m, "action-start"), 2u);
  EXPECT_FALSE(s.entry(m).local.contains("again"));
}

TEST(Scheduler, RetrySecondAttemptSucceeds) {
  kb::StaticKB global;
  FaultPlan faults;
  faults.add("wait", {1, Outcome::failed, 0, 1.0});
  Scheduler s(global, ActionRegistry::with_builtins(), faults);
  s.register_task(compile_fixture("retry.yaml"));
  const MachineId m = s.launch("main");
  ASSERT_TRUE(s.run(200));
  EXPECT_EQ(s.status(m), Status::succeeded);
  std::size_t waits = 0;
  for (const auto& e : s.trace().events())
    if (e.kind == "action-start" && e.payload["action"] == "wait") ++waits;
  EXPECT_EQ(waits, 2u);
}

TEST(Scheduler, AnswerRoutesToForeground) {
  kb::ConsoleKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("chat.yaml", "chat"));
  EXPECT_THROW(s.deliver_answer(std::nullopt, Value("x")), NoOpenTicket);
  const MachineId m = s.launch("chat");
  tick_until(s, [&] { return s.status(m) == Status::blocked; });
  EXPECT_EQ(s.status(m), Status::blocked);
  const RoutingReport r = s.deliver_answer(std::nullopt, Value("films"));
  EXPECT_EQ(r.machine, m);
  EXPECT_EQ(r.name, "topic");
  EXPECT_EQ(s.ticket(r.ticket).status, TicketStatus::answered);
  EXPECT_THROW(s.deliver_answer(r.ticket, Value("again")), NoOpenTicket);
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(m), Status::succeeded);
  EXPECT_EQ(s.entry(m).local.get("echo"), Value("films"));
}

TEST(Scheduler, AmbiguousWithoutTicket) {
  kb::ConsoleKB global;
  Scheduler s(global);
  s.register_task(inline_task("two", kTwoQuestions));
  const MachineId m = s.launch("two");
  tick_until(s, [&] { return s.open_tickets(m).size() == 2; });
  EXPECT_THROW(s.deliver_answer(std::nullopt, Value(1)), AmbiguousTarget);
  EXPECT_EQ(s.deliver_answer(std::nullopt, Value(2), std::string("b")).name, "b");
  EXPECT_EQ(s.deliver_answer(std::nullopt, Value(1)).name, "a");
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.entry(m).local.get("a"), Value(1));
  EXPECT_EQ(s.entry(m).local.get("b"), Value(2));
}

TEST(Scheduler, ExplicitTicketResumesOnlyItsMachine) {
  kb::ConsoleKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("chat.yaml", "chat"));
  const MachineId a = s.launch("chat");
  const MachineId b = s.launch("chat");
  tick_until(s, [&] { return s.open_tickets().size() == 2; });
  const TicketId ta = s.open_tickets(a).at(0).id;
  s.deliver_answer(ta, Value("art"));
  for (int i = 0; i < 20; ++i) s.tick();
  EXPECT_EQ(s.status(a), Status::succeeded);
  EXPECT_EQ(s.status(b), Status::blocked);
  EXPECT_TRUE(s.entry(b).local.get("topic").absent());
}

TEST(Scheduler, PauseWithholdsDispatchAndResumeReprompts) {
  kb::ConsoleKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("guide.yaml", "guide"));
  const MachineId m = s.launch("guide");
  tick_until(s, [&] { return !s.open_tickets(m).empty(); });
  s.pause(m);
  EXPECT_EQ(s.status(m), Status::paused);
  EXPECT_THROW(s.pause(m), InvalidStatus);
  EXPECT_FALSE(s.foreground());
  // A paused machine still accepts an addressed answer, but does not move on.
  s.deliver_answer(s.open_tickets(m).at(0).id, Value("shoe shop"));
  const std::size_t starts = count(s.trace(), m, "action-start");
  for (int i = 0; i < 20; ++i) s.tick();
  EXPECT_EQ(count(s.trace(), m, "action-start"), starts);
  EXPECT_EQ(s.status(m), Status::paused);
  s.resume(m);
  EXPECT_THROW(s.resume(m), InvalidStatus);
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(m), Status::succeeded);
  EXPECT_GT(count(s.trace(), m, "action-start"), starts);
}

TEST(Scheduler, ResumeRepromptsOpenQuestion) {
  kb::ConsoleKB global;
  Scheduler s(global);
  s.register_task(compile_fixture("chat.yaml", "chat"));
  const MachineId m = s.launch("chat");
  tick_until(s, [&] { return !s.open_tickets(m).empty(); });
  const TicketId t = s.open_tickets(m).at(0).id;
  s.pause(m);
  s.resume(m);
  const TraceEvent& last = s.trace().events().back();
  EXPECT_EQ(last.kind, "ticket-open");
  EXPECT_EQ(last.payload["ticket"], t);
  EXPECT_EQ(last.payload["reprompt"], true);
  EXPECT_EQ(last.payload["name"], "topic");
}

TEST(Scheduler, PreemptOnPauseStopsInFlightAction) {
  kb::StaticKB global;
  SchedulerOptions opts;
  opts.preempt_on_pause = true;
  Scheduler s(global, ActionRegistry::with_builtins(), {}, 0, opts);
  s.register_task(compile_fixture("alternative.yaml"));
  const MachineId m = s.launch("main");
  tick_until(s, [&] { return !s.entry(m).in_flight.empty(); });
  s.pause(m);
  for (int i = 0; i < 3; ++i) s.tick();
  s.resume(m);
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(m), Status::succeeded);
  bool interrupted = false;
  for (const auto& e : s.trace().events())
    if (e.kind == "action-start" && e.payload["goal"]["text"] == "interrupted") interrupted = true;
  EXPECT_TRUE(interrupted);
}

TEST(Scheduler, BlockedMachineIsAbandoned) {
  kb::ConsoleKB global;
  SchedulerOptions opts;
  opts.abandon_after = 5;
  Scheduler s(global, ActionRegistry::with_builtins(), {}, 0, opts);
  s.register_task(compile_fixture("chat.yaml", "chat"));
  const MachineId m = s.launch("chat");
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(m), Status::failed);
  EXPECT_EQ(s.entry(m).reason, "abandoned");
  EXPECT_TRUE(s.open_tickets().empty());
}

TEST(Scheduler, PlansInvokePlans) {
  auto d = testing_support::domain();
  d.actions["inner"] = lang::ActionDecl{"inner", lang::SuperType::ros_action, {}, std::nullopt, std::nullopt};
  kb::StaticKB global;
  Scheduler s(global);
  s.register_task(compile(d, lang::parse_plan(testing_support::read("fixtures/single.yaml"), d), "inner"));
  s.register_task(compile(d, lang::parse_plan("plan:\n  - inner: {}\n  - echo: {text: outer}\n", d), "outer"));
  const MachineId m = s.launch("outer");
  ASSERT_TRUE(s.run(100));
  EXPECT_EQ(s.status(m), Status::succeeded);
  ASSERT_EQ(s.machines().size(), 2u);
  const MachineId child = s.machines()[1];
  EXPECT_EQ(s.entry(child).task, "inner");
  EXPECT_EQ(s.status(child), Status::succeeded);
}

TEST(Scheduler, SameSeedSameTrace) {
  auto run = [] {
    kb::StaticKB global;
    FaultPlan faults;
    faults.add("wait", {std::nullopt, Outcome::failed, 0, 0.3});
    Scheduler s(global, ActionRegistry::with_builtins(), faults, 42);
    s.register_task(compile_fixture("plan.yaml"));
    s.launch("main");
    s.launch("main");
    s.run(200);
    return s.trace().dump();
  };
  EXPECT_EQ(run(), run());
}

TEST(Scheduler, PauseResumeRoundTripKeepsSuffix) {
  auto run = [](std::optional<std::size_t> pause_at) {
    kb::StaticKB global;
    Scheduler s(global);
    s.register_task(compile_fixture("plan.yaml"));
    const MachineId m = s.launch("main");
    for (std::size_t i = 0; i < 200 && !s.quiescent(); ++i) {
      if (pause_at && i == *pause_at) {
        s.submit({SchedulerCommand::Kind::pause, {}, {}, {}, m});
        s.submit({SchedulerCommand::Kind::resume, {}, {}, {}, m});
      }
      s.tick();
    }
    EXPECT_EQ(s.status(m), Status::succeeded);
    std::vector<std::string> out;
    for (const auto& e : s.trace().events()) {
      if (e.kind == "status-change" && (e.payload["cause"] == "pause" || e.payload["cause"] == "resume")) continue;
      out.push_back(std::to_string(e.time) + " " + e.kind + " " + e.payload.dump());
    }
    return out;
  };
  const auto control = run(std::nullopt);
  for (std::size_t at : {1u, 4u, 9u}) EXPECT_EQ(run(at), control) << "pause at tick " << at;
}

TEST(Scheduler, RandomInterleavedAnswersReachTheirTickets) {
  const std::vector<std::string> plans = {
      "plan:\n  - ask: {question: a}\n",
      "plan:\n  - ask: {question: a}\n  - ask: {question: b}\n",
      "plan:\n  - concurrent_actions:\n      - ask: {question: a}\n      - ask: {question: b}\n  - ask: {question: c}\n"};
  std::mt19937_64 rng(99);
  for (int round = 0; round < 40; ++round) {
    kb::ConsoleKB global;
    Scheduler s(global);
    for (std::size_t i = 0; i < plans.size(); ++i) s.register_task(inline_task("q" + std::to_string(i), plans[i]));
    const std::size_t n = 1 + rng() % 5;
    std::vector<MachineId> ids;
    for (std::size_t i = 0; i < n; ++i) {
      const MachineId m = s.launch("q" + std::to_string(rng() % plans.size()));
      ids.push_back(m);
      s.submit({SchedulerCommand::Kind::custom});
    }
    std::map<TicketId, std::string> expected;
    for (int guard = 0; guard < 500 && !s.quiescent(); ++guard) {
      s.tick();
      auto open = s.open_tickets();
      if (open.empty() || rng() % 2) continue;
      const Ticket t = open[rng() % open.size()];
      const std::string value = "m" + std::to_string(t.machine) + "-" + t.name;
      const RoutingReport r = s.deliver_answer(t.id, Value(value));
      ASSERT_EQ(r.machine, t.machine);
      ASSERT_EQ(r.ticket, t.id);
      expected[t.id] = value;
    }
    ASSERT_TRUE(s.quiescent());
    for (MachineId m : ids) {
      EXPECT_EQ(s.status(m), Status::succeeded);
      for (const auto& [k, v] : s.entry(m).local.entries())
        EXPECT_EQ(v, Value("m" + std::to_string(m) + "-" + k)) << "machine " << m;
    }
    for (const auto& [id, value] : expected) EXPECT_EQ(s.ticket(id).status, TicketStatus::answered);
  }
}
