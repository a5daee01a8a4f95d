#include "pnm/compiler.hpp"

#include <algorithm>

namespace pnm {

namespace {

/// Condition statically known from a literal, if any.
std::optional<bool> constant(const lang::Expression& e) {
  if (e.kind == lang::Expression::Kind::literal) return e.literal.truthy();
  return std::nullopt;
}

} // namespace

Compiler::Compiler(const lang::DomainSpec& domain, std::string name) : domain_(domain), name_(std::move(name)) {}

PlaceId Compiler::place(const std::string& label) {
  try {
    return net_.add_place(label);
  } catch (const NetError& e) {
    throw CompileError(e.what());
  }
}

PlaceId Compiler::fail_place() {
  if (!fail_) fail_ = place("failed");
  return *fail_;
}

std::size_t Compiler::add_check(Check check) {
  checks_.push_back(std::move(check));
  return checks_.size() - 1;
}

TransitionId Compiler::transition(const std::string& label, const std::vector<PlaceId>& in,
                                  const std::vector<PlaceId>& out, Guard guard, TransitionEffect effect) {
  TransitionId t;
  try {
    t = net_.add_transition(label);
  } catch (const NetError& e) {
    throw CompileError(e.what());
  }
  for (PlaceId p : in) net_.add_input(p, t);
  for (PlaceId p : out) net_.add_output(t, p);
  if (guard.kind != Guard::Kind::token_only) guards_[t] = std::move(guard);
  effects_.push_back(std::move(effect));
  return t;
}

ExpansionBox Compiler::expand(const lang::PlanNode& node, PlaceId entry, PlaceId exit, const std::string& path) {
  switch (node.kind) {
  case lang::PlanNode::Kind::action: return expand_action(node, entry, exit, path);
  case lang::PlanNode::Kind::concurrent: return expand_concurrent(node, entry, exit, path);
  case lang::PlanNode::Kind::loop:
  case lang::PlanNode::Kind::branch: return expand_control(node, entry, exit, path);
  case lang::PlanNode::Kind::kb_op: {
    ExpansionBox box{entry, exit, {}, {}, {}};
    static const char* names[] = {"set", "copy", "delete"};
    box.transitions.push_back(
        transition(path + ".kb_" + names[static_cast<int>(node.op.kind)], {entry}, {exit}, Guard::token_only(), node.op));
    return box;
  }
  }
  throw CompileError("unknown plan node kind");
}

void Compiler::attempt(const lang::PlanNode& node, const lang::ActionDecl& decl, PlaceId entry, PlaceId exit,
                       PlaceId on_failed, PlaceId on_preempted, const std::string& path, ExpansionBox& box) {
  const std::string base = path + "." + node.action;
  ActionSlot slot{base, node.action, node.args, decl.params, decl.preconditions, decl.effects};
  slots_.push_back(slot);
  const std::size_t s = slots_.size() - 1;

  const PlaceId exec = place(base + ".exec");
  const PlaceId done = place(base + ".done");
  box.places.push_back(exec);
  box.places.push_back(done);

  const bool needs_fill = std::any_of(decl.params.begin(), decl.params.end(),
                                      [&](const std::string& p) { return !node.args.contains(p); });
  if (needs_fill || decl.preconditions) {
    box.transitions.push_back(transition(base + ".precheck", {entry}, {exec},
                                         Guard::when(add_check({Check::Kind::ready, s, {}})), StartAction{s}));
    box.transitions.push_back(transition(base + ".precheck_fail", {entry}, {fail_place()},
                                         Guard::when(add_check({Check::Kind::not_ready, s, {}}))));
  } else {
    box.transitions.push_back(transition(base + ".precheck", {entry}, {exec}, Guard::token_only(), StartAction{s}));
  }

  box.transitions.push_back(transition(base + ".succeeded", {exec}, {done}, Guard::awaits(base, Outcome::succeeded)));
  box.transitions.push_back(transition(base + ".failed", {exec}, {on_failed}, Guard::awaits(base, Outcome::failed)));
  box.transitions.push_back(
      transition(base + ".preempted", {exec}, {on_preempted}, Guard::awaits(base, Outcome::preempted)));

  if (decl.effects) {
    box.transitions.push_back(transition(base + ".effectcheck", {done}, {exit},
                                         Guard::when(add_check({Check::Kind::effects_hold, s, {}}))));
    box.transitions.push_back(transition(base + ".effect_fail", {done}, {fail_place()},
                                         Guard::when(add_check({Check::Kind::effects_violated, s, {}}))));
  } else {
    box.transitions.push_back(transition(base + ".effectcheck", {done}, {exit}));
  }
}

ExpansionBox Compiler::expand_action(const lang::PlanNode& node, PlaceId entry, PlaceId exit,
                                     const std::string& path) {
  if (node.kind != lang::PlanNode::Kind::action) throw CompileError("expand_action needs an action node");
  const lang::ActionDecl* decl = domain_.find(node.action);
  if (!decl) throw CompileError("action '" + node.action + "' is not declared in the domain");
  for (const auto& [k, v] : node.args)
    if (std::find(decl->params.begin(), decl->params.end(), k) == decl->params.end())
      throw CompileError("action '" + node.action + "' has no parameter '" + k + "'");

  const lang::RecoveryPolicy& policy = node.recovery;
  ExpansionBox box{entry, exit, {}, {}, {}};

  PlaceId preempt_target = exit;
  if (policy.on_preempted == lang::RecoveryPolicy::OnPreempted::alternative) {
    preempt_target = place(path + ".preempt_alt.in");
    box.places.push_back(preempt_target);
    ExpansionBox alt = expand_sequence(policy.preempted_alternative, preempt_target, exit, path + ".preempt_alt");
    box.places.insert(box.places.end(), alt.places.begin(), alt.places.end());
    box.transitions.insert(box.transitions.end(), alt.transitions.begin(), alt.transitions.end());
  }

  PlaceId final_failure;
  switch (policy.on_failed) {
  case lang::RecoveryPolicy::OnFailed::fail_machine:
  case lang::RecoveryPolicy::OnFailed::retry: final_failure = fail_place(); break;
  case lang::RecoveryPolicy::OnFailed::alternative: {
    final_failure = place(path + ".fail_alt.in");
    box.places.push_back(final_failure);
    ExpansionBox alt = expand_sequence(policy.failed_alternative, final_failure, exit, path + ".fail_alt");
    box.places.insert(box.places.end(), alt.places.begin(), alt.places.end());
    box.transitions.insert(box.transitions.end(), alt.transitions.begin(), alt.transitions.end());
    break;
  }
  }

  const std::size_t attempts =
      1 + (policy.on_failed == lang::RecoveryPolicy::OnFailed::retry ? policy.retries : 0);
  PlaceId attempt_entry = entry;
  for (std::size_t i = 0; i < attempts; ++i) {
    const std::string attempt_path = i == 0 ? path : path + ".retry" + std::to_string(i);
    PlaceId on_failed = final_failure;
    if (i + 1 < attempts) {
      on_failed = place(path + ".retry" + std::to_string(i + 1) + ".in");
      box.places.push_back(on_failed);
    }
    attempt(node, *decl, attempt_entry, exit, on_failed, preempt_target, attempt_path, box);
    attempt_entry = on_failed;
  }
  if (fail_) box.fail_places.push_back(*fail_);
  return box;
}

ExpansionBox Compiler::expand_concurrent(const lang::PlanNode& node, PlaceId entry, PlaceId exit,
                                         const std::string& path) {
  if (node.body.empty()) throw CompileError("concurrent block at " + path + " has no children");
  ExpansionBox box{entry, exit, {}, {}, {}};
  std::vector<PlaceId> ins, outs;
  for (std::size_t i = 0; i < node.body.size(); ++i) {
    const std::string child = path + ".c" + std::to_string(i);
    ins.push_back(place(child + ".in"));
    outs.push_back(place(child + ".out"));
  }
  box.places.insert(box.places.end(), ins.begin(), ins.end());
  box.places.insert(box.places.end(), outs.begin(), outs.end());
  box.transitions.push_back(transition(path + ".fork", {entry}, ins));
  for (std::size_t i = 0; i < node.body.size(); ++i) {
    ExpansionBox c = expand(node.body[i], ins[i], outs[i], path + ".c" + std::to_string(i));
    box.places.insert(box.places.end(), c.places.begin(), c.places.end());
    box.transitions.insert(box.transitions.end(), c.transitions.begin(), c.transitions.end());
  }
  box.transitions.push_back(transition(path + ".join", outs, {exit}));
  if (fail_) box.fail_places.push_back(*fail_);
  return box;
}

ExpansionBox Compiler::expand_control(const lang::PlanNode& node, PlaceId entry, PlaceId exit,
                                      const std::string& path) {
  if (!node.condition) throw CompileError("control node at " + path + " has no condition");
  ExpansionBox box{entry, exit, {}, {}, {}};
  const std::optional<bool> fixed = constant(*node.condition);
  auto append = [&box](const ExpansionBox& inner) {
    box.places.insert(box.places.end(), inner.places.begin(), inner.places.end());
    box.transitions.insert(box.transitions.end(), inner.transitions.begin(), inner.transitions.end());
  };
  auto guard_for = [&](Check::Kind kind) {
    if (fixed) return Guard::token_only();
    return Guard::when(add_check({kind, 0, node.condition}));
  };

  if (node.kind == lang::PlanNode::Kind::loop) {
    if (node.body.empty()) throw CompileError("loop at " + path + " has an empty body");
    if (!fixed || *fixed) {
      const PlaceId body_in = place(path + ".body.in");
      box.places.push_back(body_in);
      box.transitions.push_back(transition(path + ".enter", {entry}, {body_in}, guard_for(Check::Kind::holds)));
      append(expand_sequence(node.body, body_in, entry, path + ".body"));
    }
    if (!fixed || !*fixed)
      box.transitions.push_back(transition(path + ".leave", {entry}, {exit}, guard_for(Check::Kind::fails)));
  } else if (node.kind == lang::PlanNode::Kind::branch) {
    auto arm = [&](const std::vector<lang::PlanNode>& nodes, const std::string& name, Check::Kind kind) {
      if (nodes.empty()) {
        box.transitions.push_back(transition(path + "." + name, {entry}, {exit}, guard_for(kind)));
        return;
      }
      const PlaceId in = place(path + "." + name + ".in");
      box.places.push_back(in);
      box.transitions.push_back(transition(path + "." + name, {entry}, {in}, guard_for(kind)));
      append(expand_sequence(nodes, in, exit, path + "." + name));
    };
    if (!fixed || *fixed) arm(node.body, "then", Check::Kind::holds);
    if (!fixed || !*fixed) arm(node.otherwise, "else", Check::Kind::fails);
  } else {
    throw CompileError("expand_control needs a loop or branch node");
  }
  if (fail_) box.fail_places.push_back(*fail_);
  return box;
}

ExpansionBox Compiler::expand_sequence(const std::vector<lang::PlanNode>& nodes, PlaceId entry, PlaceId exit,
                                       const std::string& prefix) {
  ExpansionBox box{entry, exit, {}, {}, {}};
  if (nodes.empty()) {
    box.transitions.push_back(transition(prefix + ".pass", {entry}, {exit}));
    return box;
  }
  PlaceId in = entry;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = prefix + std::to_string(i);
    PlaceId out = exit;
    if (i + 1 < nodes.size()) {
      out = place(path + ".out");
      box.places.push_back(out);
    }
    ExpansionBox inner = expand(nodes[i], in, out, path);
    box.places.insert(box.places.end(), inner.places.begin(), inner.places.end());
    box.transitions.insert(box.transitions.end(), inner.transitions.begin(), inner.transitions.end());
    in = out;
  }
  if (fail_) box.fail_places.push_back(*fail_);
  return box;
}

CompiledTask Compiler::build(PlaceId start, PlaceId goal, kb::Goal initial_knowledge) {
  Marking m0(net_.place_count());
  m0.set(start, 1);
  std::set<PlaceId> fails;
  if (fail_) fails.insert(*fail_);
  CompiledTask task;
  task.name = name_;
  task.machine = Machine(net_, m0, {goal}, fails, guards_);
  task.slots = slots_;
  task.checks = checks_;
  task.effects = effects_;
  task.initial_knowledge = std::move(initial_knowledge);
  return task;
}

CompiledTask compile(const lang::DomainSpec& domain, const lang::PlanSpec& plan, std::string name) {
  if (plan.plan.empty()) throw CompileError("plan is empty");
  Compiler c(domain, std::move(name));
  const PlaceId start = c.place("start");
  const PlaceId goal = c.place("goal");
  c.expand_sequence(plan.plan, start, goal, "s");
  return c.build(start, goal, plan.initial_knowledge);
}

} // namespace pnm
