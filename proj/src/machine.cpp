#include "pnm/machine.hpp"

#include <algorithm>
#include <sstream>

namespace pnm {

const char* to_string(Outcome outcome) {
  switch (outcome) {
  case Outcome::succeeded: return "succeeded";
  case Outcome::failed: return "failed";
  case Outcome::preempted: return "preempted";
  }
  return "?";
}

const char* to_string(Status status) {
  switch (status) {
  case Status::ready: return "ready";
  case Status::running: return "running";
  case Status::blocked: return "blocked";
  case Status::paused: return "paused";
  case Status::succeeded: return "succeeded";
  case Status::failed: return "failed";
  case Status::internal_error: return "internal-error";
  }
  return "?";
}

bool terminal(Status status) {
  return status == Status::succeeded || status == Status::failed || status == Status::internal_error;
}

std::string to_string(const Event& event) {
  std::string out = event.source + ":";
  if (auto o = std::get_if<Outcome>(&event.payload)) return out + to_string(*o);
  if (auto a = std::get_if<KbAnswer>(&event.payload)) return out + "answer(" + a->name + "=" + a->value.to_string() + ")";
  return out + (std::get<Command>(event.payload) == Command::start ? "start" : "preempt-ack");
}

bool EventPattern::matches(const Event& event) const {
  if (event.source != source) return false;
  if (auto o = std::get_if<Outcome>(&match)) {
    auto e = std::get_if<Outcome>(&event.payload);
    return e && *e == *o;
  }
  if (auto name = std::get_if<std::string>(&match)) {
    auto e = std::get_if<KbAnswer>(&event.payload);
    return e && e->name == *name;
  }
  auto e = std::get_if<Command>(&event.payload);
  return e && *e == std::get<Command>(match);
}

Machine::Machine(Net net, Marking initial, std::set<PlaceId> goals, std::set<PlaceId> fails,
                 std::map<TransitionId, Guard> guards)
    : net_(std::move(net)), initial_(std::move(initial)), goals_(std::move(goals)), fails_(std::move(fails)),
      guards_(std::move(guards)) {
  if (initial_.size() != net_.place_count()) throw std::invalid_argument("initial marking size mismatch");
  for (PlaceId p : goals_)
    if (p.index >= net_.place_count()) throw std::invalid_argument("goal place out of range");
  for (PlaceId p : fails_) {
    if (p.index >= net_.place_count()) throw std::invalid_argument("fail place out of range");
    if (goals_.contains(p)) throw std::invalid_argument("a place cannot be both goal and fail: " + net_.label(p));
  }
  for (const auto& [t, g] : guards_)
    if (t.index >= net_.transition_count()) throw std::invalid_argument("guard on unknown transition");
  matrices_ = build_incidence(net_);
  marking_ = initial_;
}

const Guard& Machine::guard(TransitionId t) const {
  static const Guard none{};
  auto it = guards_.find(t);
  return it == guards_.end() ? none : it->second;
}

bool Machine::goal_reached() const {
  return std::any_of(goals_.begin(), goals_.end(), [&](PlaceId p) { return marking_.marked(p); });
}

bool Machine::fail_reached() const {
  return std::any_of(fails_.begin(), fails_.end(), [&](PlaceId p) { return marking_.marked(p); });
}

Selection delta_hat(const std::deque<Event>& events, const Marking& marking, const Machine& machine,
                    const ConditionEvaluator& conditions) {
  const IncidenceMatrices& m = machine.matrices();
  const std::size_t nt = machine.net().transition_count();
  Selection sel{FiringVector(nt), {}};
  std::vector<Tokens> left = marking.counts();
  std::vector<bool> taken(events.size(), false);

  for (std::size_t ti = 0; ti < nt; ++ti) {
    const TransitionId t{ti};
    Tokens n = enabled_count(Marking(left), t, m);
    if (n == 0) continue;
    const Guard& g = machine.guard(t);
    switch (g.kind) {
    case Guard::Kind::token_only: break;
    case Guard::Kind::condition:
      if (!conditions || !conditions(t, g.condition)) n = 0;
      break;
    case Guard::Kind::awaits_event: {
      Tokens matched = 0;
      for (std::size_t e = 0; e < events.size() && matched < n; ++e) {
        if (taken[e] || !g.pattern.matches(events[e])) continue;
        taken[e] = true;
        sel.consumed.push_back(e);
        ++matched;
      }
      n = matched;
      break;
    }
    }
    if (n == 0) continue;
    sel.firing.set(t, n);
    for (std::size_t p = 0; p < left.size(); ++p) left[p] -= n * m.d_minus(ti, p);
  }
  std::sort(sel.consumed.begin(), sel.consumed.end());
  return sel;
}

StepReport Machine::step(const ConditionEvaluator& conditions) {
  if (status_ != Status::ready && status_ != Status::running)
    throw NotSteppable(std::string("machine is not steppable in status ") + to_string(status_));
  status_ = Status::running;

  StepReport report;
  Selection sel = delta_hat(events_, marking_, *this, conditions);
  try {
    marking_ = fire(marking_, sel.firing, matrices_);
  } catch (const InadmissibleFiring& e) {
    status_ = Status::internal_error;
    report.marking = marking_;
    report.status = status_;
    report.error = e.what();
    return report;
  }

  for (std::size_t t = 0; t < sel.firing.size(); ++t)
    if (sel.firing[t] > 0) report.fired.emplace_back(TransitionId{t}, sel.firing[t]);
  for (auto it = sel.consumed.rbegin(); it != sel.consumed.rend(); ++it) {
    report.consumed.push_back(events_[*it]);
    events_.erase(events_.begin() + static_cast<std::ptrdiff_t>(*it));
  }
  std::reverse(report.consumed.begin(), report.consumed.end());

  if (goal_reached())
    status_ = Status::succeeded;
  else if (fail_reached())
    status_ = Status::failed;
  else if (sel.firing.zero() && open_queries_ > 0)
    status_ = Status::blocked;
  else
    status_ = Status::running;

  report.marking = marking_;
  report.status = status_;
  return report;
}

void Machine::reset() {
  marking_ = initial_;
  events_.clear();
  status_ = Status::ready;
  open_queries_ = 0;
}

std::string format_step(const Net& net, const StepReport& report) {
  std::ostringstream out;
  out << "fired=[";
  for (std::size_t i = 0; i < report.fired.size(); ++i) {
    if (i) out << ',';
    out << net.label(report.fired[i].first);
    if (report.fired[i].second > 1) out << 'x' << report.fired[i].second;
  }
  out << "] consumed=[";
  for (std::size_t i = 0; i < report.consumed.size(); ++i) {
    if (i) out << ',';
    out << to_string(report.consumed[i]);
  }
  out << "] marking=" << format_marking(net, report.marking) << " status=" << to_string(report.status);
  return out.str();
}

} // namespace pnm
