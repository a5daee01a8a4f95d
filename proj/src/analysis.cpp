#include "pnm/analysis.hpp"

#include <deque>
#include <sstream>

#include "pnm/trace.hpp"

namespace pnm {

namespace {

bool touches(const Marking& m, const std::set<PlaceId>& places) {
  for (PlaceId p : places)
    if (m.marked(p)) return true;
  return false;
}

bool has_inputs(const IncidenceMatrices& mx, std::size_t t) {
  for (std::size_t p = 0; p < mx.d_minus.cols(); ++p)
    if (mx.d_minus(t, p) > 0) return true;
  return false;
}

/// Tokens left after reserving tbar's consumption.
Marking remaining(const Marking& m, const FiringVector& tbar, const IncidenceMatrices& mx) {
  std::vector<Tokens> r = m.counts();
  for (std::size_t t = 0; t < tbar.size(); ++t)
    for (std::size_t p = 0; p < r.size(); ++p) r[p] -= tbar[t] * mx.d_minus(t, p);
  return Marking(std::move(r));
}

void maximal_steps(const Marking& m, const IncidenceMatrices& mx, std::size_t t, std::vector<Tokens>& counts,
                   std::vector<FiringVector>& out) {
  const std::size_t n = counts.size();
  if (t == n) {
    const FiringVector tbar(counts);
    if (tbar.zero()) return;
    const Marking left = remaining(m, tbar, mx);
    for (std::size_t u = 0; u < n; ++u) {
      if (!has_inputs(mx, u)) {
        if (counts[u] == 0) return;
      } else if (enabled_count(left, TransitionId{u}, mx) > 0) {
        return;
      }
    }
    out.push_back(tbar);
    return;
  }
  FiringVector partial(counts);
  const Tokens max = enabled_count(remaining(m, partial, mx), TransitionId{t}, mx);
  for (Tokens c = max; c >= 0; --c) {
    counts[t] = c;
    maximal_steps(m, mx, t + 1, counts, out);
  }
  counts[t] = 0;
}

} // namespace

std::optional<std::size_t> ReachabilityGraph::find(const Marking& m) const {
  auto it = index_.find(m);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ReachabilityGraph reachability(const Net& net, const Marking& m0, const Bounds& bounds,
                               const std::set<PlaceId>& terminal) {
  if (bounds.max_markings == 0 || bounds.max_tokens <= 0) throw std::invalid_argument("bounds must be positive");
  if (m0.size() != net.place_count()) throw std::invalid_argument("marking does not match the net");
  const IncidenceMatrices mx = build_incidence(net);
  const std::size_t n = net.transition_count();

  ReachabilityGraph g;
  auto intern = [&](const Marking& m) -> std::pair<std::size_t, bool> {
    auto it = g.index_.find(m);
    if (it != g.index_.end()) return {it->second, false};
    for (Tokens c : m.counts())
      if (c > bounds.max_tokens)
        throw BoundExceeded("a place exceeds " + std::to_string(bounds.max_tokens) + " tokens");
    if (g.nodes.size() >= bounds.max_markings)
      throw BoundExceeded("more than " + std::to_string(bounds.max_markings) + " reachable markings");
    g.nodes.push_back(m);
    g.index_.emplace(m, g.nodes.size() - 1);
    return {g.nodes.size() - 1, true};
  };

  g.root = intern(m0).first;
  std::deque<std::size_t> frontier{g.root};
  while (!frontier.empty()) {
    const std::size_t from = frontier.front();
    frontier.pop_front();
    const Marking m = g.nodes[from];
    if (bounds.stop_at_terminal && touches(m, terminal)) continue;

    std::vector<FiringVector> steps;
    if (bounds.semantics == Semantics::interleaving) {
      for (std::size_t t = 0; t < n; ++t) {
        if (enabled_count(m, TransitionId{t}, mx) == 0) continue;
        FiringVector tbar(n);
        tbar.set(TransitionId{t}, 1);
        steps.push_back(std::move(tbar));
      }
    } else {
      std::vector<Tokens> counts(n, 0);
      maximal_steps(m, mx, 0, counts, steps);
    }
    for (FiringVector& tbar : steps) {
      const auto [to, fresh] = intern(fire(m, tbar, mx));
      g.edges.push_back({from, std::move(tbar), to});
      if (fresh) frontier.push_back(to);
    }
  }
  return g;
}

ReachabilityGraph reachability(const Machine& machine, const Bounds& bounds) {
  std::set<PlaceId> terminal = machine.goal_places();
  terminal.insert(machine.fail_places().begin(), machine.fail_places().end());
  return reachability(machine.net(), machine.initial_marking(), bounds, terminal);
}

CheckReport check(const Machine& machine, const Bounds& bounds) {
  const ReachabilityGraph g = reachability(machine, bounds);
  const Net& net = machine.net();
  CheckReport r;
  r.markings = g.nodes.size();
  r.edges = g.edges.size();
  std::vector<bool> covered(net.place_count(), false);
  for (const Marking& m : g.nodes) {
    for (std::size_t p = 0; p < m.size(); ++p) {
      covered[p] = covered[p] || m[p] > 0;
      r.bound = std::max(r.bound, m[p]);
    }
    r.goal_reachable = r.goal_reachable || touches(m, machine.goal_places());
    r.fail_reachable = r.fail_reachable || touches(m, machine.fail_places());
  }
  std::vector<bool> fired(net.transition_count(), false);
  for (const auto& e : g.edges)
    for (std::size_t t = 0; t < e.firing.size(); ++t) fired[t] = fired[t] || e.firing[t] > 0;
  for (std::size_t p = 0; p < covered.size(); ++p)
    if (!covered[p]) r.unreachable_places.push_back(PlaceId{p});
  for (std::size_t t = 0; t < fired.size(); ++t)
    if (!fired[t]) r.dead_transitions.push_back(TransitionId{t});
  return r;
}

std::string format_report(const Net& net, const CheckReport& report) {
  Json j;
  j["ok"] = report.ok();
  j["places"] = net.place_count();
  j["transitions"] = net.transition_count();
  j["markings"] = report.markings;
  j["edges"] = report.edges;
  j["bound"] = report.bound;
  j["goal_reachable"] = report.goal_reachable;
  j["fail_reachable"] = report.fail_reachable;
  j["unreachable_places"] = Json::array();
  for (PlaceId p : report.unreachable_places) j["unreachable_places"].push_back(net.label(p));
  j["dead_transitions"] = Json::array();
  for (TransitionId t : report.dead_transitions) j["dead_transitions"].push_back(net.label(t));
  return j.dump(2);
}

namespace {

std::string dot_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + '"';
}

} // namespace

std::string export_dot(const Net& net, const Marking* marking) {
  if (marking && marking->size() != net.place_count()) throw std::invalid_argument("marking does not match the net");
  std::ostringstream out;
  out << "digraph pnm {\n  rankdir=LR;\n";
  for (std::size_t p = 0; p < net.place_count(); ++p) {
    std::string label = net.label(PlaceId{p});
    const Tokens tokens = marking ? (*marking)[p] : 0;
    if (tokens > 0) label += "\n" + std::to_string(tokens);
    out << "  p" << p << " [shape=circle, label=" << dot_string(label);
    if (tokens > 0) out << ", style=bold";
    out << "];\n";
  }
  for (std::size_t t = 0; t < net.transition_count(); ++t)
    out << "  t" << t << " [shape=box, label=" << dot_string(net.label(TransitionId{t})) << "];\n";
  for (std::size_t t = 0; t < net.transition_count(); ++t) {
    for (std::size_t p = 0; p < net.place_count(); ++p) {
      const Tokens w = net.input_weight(PlaceId{p}, TransitionId{t});
      if (w == 0) continue;
      out << "  p" << p << " -> t" << t;
      if (w > 1) out << " [label=\"" << w << "\"]";
      out << ";\n";
    }
    for (std::size_t p = 0; p < net.place_count(); ++p) {
      const Tokens w = net.output_weight(TransitionId{t}, PlaceId{p});
      if (w == 0) continue;
      out << "  t" << t << " -> p" << p;
      if (w > 1) out << " [label=\"" << w << "\"]";
      out << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

} // namespace pnm
