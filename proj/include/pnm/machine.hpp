#pragma once

#include <deque>
#include <functional>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pnm/kb.hpp"
#include "pnm/net.hpp"

namespace pnm {

enum class Outcome { succeeded, failed, preempted };

const char* to_string(Outcome outcome);

struct KbAnswer {
  std::string name;
  kb::Value value;
  bool operator==(const KbAnswer&) const = default;
};

enum class Command { start, preempt_ack };

/// One input symbol of a machine. `source` names the action slot (or other
/// producer) the event belongs to.
struct Event {
  std::string source;
  std::variant<Outcome, KbAnswer, Command> payload;
  bool operator==(const Event&) const = default;
};

std::string to_string(const Event& event);

struct EventPattern {
  std::string source;
  /// An outcome, the name a KbAnswer must carry, or a command.
  std::variant<Outcome, std::string, Command> match;

  bool matches(const Event& event) const;
};

/// How a transition is allowed to fire beyond having tokens.
/// - token_only: as often as tokens allow.
/// - awaits_event: once per matching buffered event, consuming it.
/// - condition: only while an externally evaluated condition holds.
struct Guard {
  enum class Kind { token_only, awaits_event, condition };
  Kind kind = Kind::token_only;
  EventPattern pattern;
  std::size_t condition = 0;

  static Guard token_only() { return {}; }
  static Guard awaits(std::string source, Outcome outcome) {
    return {Kind::awaits_event, EventPattern{std::move(source), outcome}, 0};
  }
  static Guard when(std::size_t condition) { return {Kind::condition, {}, condition}; }
};

enum class Status { ready, running, blocked, paused, succeeded, failed, internal_error };

const char* to_string(Status status);
bool terminal(Status status);

/// Evaluates a condition guard at firing time.
using ConditionEvaluator = std::function<bool(TransitionId, std::size_t condition)>;

struct Selection {
  FiringVector firing;
  /// Indices into the event buffer, ascending.
  std::vector<std::size_t> consumed;
};

struct StepReport {
  std::vector<std::pair<TransitionId, Tokens>> fired;
  std::vector<Event> consumed;
  Marking marking;
  Status status = Status::running;
  std::string error;

  bool progressed() const { return !fired.empty(); }
};

class NotSteppable : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

/// A net with initial marking, goal and fail places, per-transition guards
/// and a FIFO input buffer.
class Machine {
public:
  Machine() = default;
  Machine(Net net, Marking initial, std::set<PlaceId> goals, std::set<PlaceId> fails = {},
          std::map<TransitionId, Guard> guards = {});

  const Net& net() const { return net_; }
  const IncidenceMatrices& matrices() const { return matrices_; }
  const Marking& marking() const { return marking_; }
  const Marking& initial_marking() const { return initial_; }
  const std::set<PlaceId>& goal_places() const { return goals_; }
  const std::set<PlaceId>& fail_places() const { return fails_; }
  const Guard& guard(TransitionId t) const;
  const std::map<TransitionId, Guard>& guards() const { return guards_; }
  const std::deque<Event>& events() const { return events_; }

  Status status() const { return status_; }
  void set_status(Status s) { status_ = s; }
  /// Number of unanswered external questions raised on behalf of this machine.
  std::size_t open_queries() const { return open_queries_; }
  void set_open_queries(std::size_t n) { open_queries_ = n; }

  bool goal_reached() const;
  bool fail_reached() const;

  void post(Event event) { events_.push_back(std::move(event)); }

  /// delta_hat followed by fire; updates status.
  StepReport step(const ConditionEvaluator& conditions = {});

  /// Back to the initial marking, empty buffer, status ready.
  void reset();

private:
  Net net_;
  IncidenceMatrices matrices_;
  Marking initial_;
  Marking marking_;
  std::set<PlaceId> goals_;
  std::set<PlaceId> fails_;
  std::map<TransitionId, Guard> guards_;
  std::deque<Event> events_;
  Status status_ = Status::ready;
  std::size_t open_queries_ = 0;
};

/// Input-driven transition function. Transitions are visited in ascending
/// index order; each takes as many firings as its guard and the tokens left
/// by lower-indexed transitions allow, so the result is always jointly
/// admissible.
Selection delta_hat(const std::deque<Event>& events, const Marking& marking, const Machine& machine,
                    const ConditionEvaluator& conditions = {});

/// Stable textual rendering used for trace comparison.
std::string format_step(const Net& net, const StepReport& report);

} // namespace pnm
