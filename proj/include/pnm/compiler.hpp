#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pnm/machine.hpp"
#include "pnm/plan.hpp"

namespace pnm {

class CompileError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// One action occurrence in a compiled net. `key` is the event source its
/// outcome transitions wait on.
struct ActionSlot {
  std::string key;
  std::string action;
  kb::Goal args;
  std::vector<std::string> params;
  std::optional<lang::Expression> preconditions;
  std::optional<lang::Expression> effects;
};

/// Condition attached to a condition-guarded transition, evaluated when the
/// transition is about to fire.
struct Check {
  enum class Kind {
    ready,            // parameters resolvable and preconditions hold
    not_ready,
    effects_hold,
    effects_violated,
    holds,            // loop/branch condition true
    fails,
  };
  Kind kind = Kind::holds;
  std::size_t slot = 0;
  std::optional<lang::Expression> condition;
};

struct StartAction {
  std::size_t slot = 0;
};

using TransitionEffect = std::variant<std::monostate, StartAction, lang::KbOp>;

/// Places and transitions generated for one plan node.
struct ExpansionBox {
  PlaceId entry;
  PlaceId exit;
  std::vector<PlaceId> fail_places;
  std::vector<PlaceId> places;
  std::vector<TransitionId> transitions;
};

/// A machine plus the side tables the scheduler needs to run it.
struct CompiledTask {
  std::string name;
  Machine machine;
  std::vector<ActionSlot> slots;
  std::vector<Check> checks;
  /// Indexed by transition.
  std::vector<TransitionEffect> effects;
  kb::Goal initial_knowledge;
};

/// Incremental net builder following the fixed expansion templates:
///
/// action:   entry -precheck-> exec -{succeeded,failed,preempted}-> ...
///           succeeded -> done -effectcheck-> exit
///           precheck_fail / effect_fail / failed (default) -> machine fail
///           preempted (default) -> exit
/// concurrent: entry -fork-> child entries ... child exits -join-> exit
/// loop:     entry -enter-> body -> entry (back arc), entry -leave-> exit
/// branch:   entry -then-> then-body -> exit, entry -else-> else-body -> exit
class Compiler {
public:
  explicit Compiler(const lang::DomainSpec& domain, std::string name = "main");

  PlaceId place(const std::string& label);

  ExpansionBox expand(const lang::PlanNode& node, PlaceId entry, PlaceId exit, const std::string& path);
  ExpansionBox expand_action(const lang::PlanNode& node, PlaceId entry, PlaceId exit, const std::string& path);
  ExpansionBox expand_control(const lang::PlanNode& node, PlaceId entry, PlaceId exit, const std::string& path);
  ExpansionBox expand_concurrent(const lang::PlanNode& node, PlaceId entry, PlaceId exit, const std::string& path);
  /// Chains nodes so exit(i) == entry(i+1); element paths are prefix + index.
  ExpansionBox expand_sequence(const std::vector<lang::PlanNode>& nodes, PlaceId entry, PlaceId exit,
                               const std::string& prefix);

  /// Finalizes into a machine with one token on `start`.
  CompiledTask build(PlaceId start, PlaceId goal, kb::Goal initial_knowledge = {});

  const Net& net() const { return net_; }

private:
  TransitionId transition(const std::string& label, const std::vector<PlaceId>& in,
                          const std::vector<PlaceId>& out, Guard guard = Guard::token_only(),
                          TransitionEffect effect = {});
  PlaceId fail_place();
  std::size_t add_check(Check check);
  void attempt(const lang::PlanNode& node, const lang::ActionDecl& decl, PlaceId entry, PlaceId exit,
               PlaceId on_failed, PlaceId on_preempted, const std::string& path, ExpansionBox& box);

  const lang::DomainSpec& domain_;
  std::string name_;
  Net net_;
  std::map<TransitionId, Guard> guards_;
  std::vector<TransitionEffect> effects_;
  std::vector<ActionSlot> slots_;
  std::vector<Check> checks_;
  std::optional<PlaceId> fail_;
};

/// Compiles a validated plan: start place -> plan boxes -> goal place, with a
/// shared fail place whenever some route can fail.
CompiledTask compile(const lang::DomainSpec& domain, const lang::PlanSpec& plan, std::string name = "main");

} // namespace pnm
