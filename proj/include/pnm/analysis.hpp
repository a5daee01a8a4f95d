#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnm/machine.hpp"

namespace pnm {

class BoundExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// interleaving: every admissible single-transition firing is an edge.
/// maximal_step: every maximal admissible firing vector is an edge; conflicts
/// (e.g. the three outcome transitions of an action) still branch.
enum class Semantics { interleaving, maximal_step };

struct Bounds {
  std::size_t max_markings = 100000;
  Tokens max_tokens = 16;
  /// Markings touching a goal or fail place are not expanded.
  bool stop_at_terminal = true;
  Semantics semantics = Semantics::interleaving;
};

struct ReachabilityEdge {
  std::size_t from = 0;
  FiringVector firing;
  std::size_t to = 0;
};

struct ReachabilityGraph {
  std::vector<Marking> nodes;
  std::vector<ReachabilityEdge> edges;
  std::size_t root = 0;

  std::optional<std::size_t> find(const Marking& m) const;

private:
  friend ReachabilityGraph reachability(const Net&, const Marking&, const Bounds&, const std::set<PlaceId>&);
  std::map<Marking, std::size_t> index_;
};

/// Breadth-first exploration from m0 with guards ignored, so every outcome of
/// every action is considered possible.
ReachabilityGraph reachability(const Net& net, const Marking& m0, const Bounds& bounds = {},
                               const std::set<PlaceId>& terminal = {});
ReachabilityGraph reachability(const Machine& machine, const Bounds& bounds = {});

struct CheckReport {
  std::vector<PlaceId> unreachable_places;
  std::vector<TransitionId> dead_transitions;
  bool goal_reachable = false;
  bool fail_reachable = false;
  /// Largest token count seen on any place.
  Tokens bound = 0;
  std::size_t markings = 0;
  std::size_t edges = 0;

  bool ok() const { return unreachable_places.empty() && goal_reachable; }
};

CheckReport check(const Machine& machine, const Bounds& bounds = {});

/// JSON document with labels instead of indices.
std::string format_report(const Net& net, const CheckReport& report);

/// Graphviz digraph: places as circles, transitions as boxes, weights above
/// one as edge labels, token counts when a marking is given. Node order
/// follows indices so output is stable.
std::string export_dot(const Net& net, const Marking* marking = nullptr);

} // namespace pnm
