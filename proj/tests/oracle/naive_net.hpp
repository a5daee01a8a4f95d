#pragma once

// Reference token game written without the incidence matrices: arcs are a
// plain list, tokens move one at a time. Used to cross-check the library.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

namespace oracle {

struct Arc {
  std::size_t place;
  std::size_t transition;
  bool into_transition;  // place -> transition when true
};

struct NaiveNet {
  std::size_t places = 0;
  std::size_t transitions = 0;
  /// One entry per unit of weight.
  std::vector<Arc> arcs;
};

using Tokens = std::vector<std::int64_t>;

/// Fires transition `t` once; nullopt when some input runs dry.
inline std::optional<Tokens> fire_once(const NaiveNet& net, Tokens m, std::size_t t) {
  for (const Arc& a : net.arcs) {
    if (!a.into_transition || a.transition != t) continue;
    if (m[a.place] == 0) return std::nullopt;
    --m[a.place];
  }
  for (const Arc& a : net.arcs)
    if (!a.into_transition && a.transition == t) ++m[a.place];
  return m;
}

/// Simultaneous firing of counts[t] copies of every t: take every token
/// first, then hand out the produced ones.
inline std::optional<Tokens> fire_vector(const NaiveNet& net, Tokens m, const std::vector<std::int64_t>& counts) {
  for (std::size_t t = 0; t < counts.size(); ++t)
    for (std::int64_t k = 0; k < counts[t]; ++k)
      for (const Arc& a : net.arcs) {
        if (!a.into_transition || a.transition != t) continue;
        if (m[a.place] == 0) return std::nullopt;
        --m[a.place];
      }
  for (std::size_t t = 0; t < counts.size(); ++t)
    for (std::int64_t k = 0; k < counts[t]; ++k)
      for (const Arc& a : net.arcs)
        if (!a.into_transition && a.transition == t) ++m[a.place];
  return m;
}

inline bool has_inputs(const NaiveNet& net, std::size_t t) {
  for (const Arc& a : net.arcs)
    if (a.into_transition && a.transition == t) return true;
  return false;
}

/// How many times `t` can fire back to back on the inputs alone.
inline std::int64_t times_enabled(const NaiveNet& net, Tokens m, std::size_t t) {
  if (!has_inputs(net, t)) return 1;
  std::int64_t n = 0;
  while (true) {
    bool ok = true;
    for (const Arc& a : net.arcs) {
      if (!a.into_transition || a.transition != t) continue;
      if (m[a.place] == 0) {
        ok = false;
        break;
      }
      --m[a.place];
    }
    if (!ok) return n;
    ++n;
  }
}

/// Every marking reachable by single firings, exploring depth first.
inline std::set<Tokens> enumerate(const NaiveNet& net, const Tokens& m0, const std::set<std::size_t>& stop_places,
                                  std::size_t limit) {
  std::set<Tokens> seen{m0};
  std::vector<Tokens> stack{m0};
  while (!stack.empty() && seen.size() <= limit) {
    Tokens m = stack.back();
    stack.pop_back();
    bool stop = false;
    for (std::size_t p : stop_places) stop = stop || m[p] > 0;
    if (stop) continue;
    for (std::size_t t = 0; t < net.transitions; ++t) {
      auto next = fire_once(net, m, t);
      if (next && seen.insert(*next).second) stack.push_back(*next);
    }
  }
  return seen;
}

inline NaiveNet random_net(std::mt19937_64& rng, std::size_t max_places = 8, std::size_t max_transitions = 8,
                           int max_weight = 3) {
  std::uniform_int_distribution<std::size_t> pc(1, max_places), tc(1, max_transitions);
  NaiveNet net;
  net.places = pc(rng);
  net.transitions = tc(rng);
  std::uniform_int_distribution<std::size_t> pick_p(0, net.places - 1), pick_t(0, net.transitions - 1);
  std::uniform_int_distribution<int> arcs(0, static_cast<int>(net.places + net.transitions) * 2);
  std::uniform_int_distribution<int> weight(1, max_weight);
  std::bernoulli_distribution direction(0.5);
  const int n = arcs(rng);
  for (int i = 0; i < n; ++i) {
    const Arc a{pick_p(rng), pick_t(rng), direction(rng)};
    const int w = weight(rng);
    for (int k = 0; k < w; ++k) net.arcs.push_back(a);
  }
  return net;
}

inline Tokens random_marking(std::mt19937_64& rng, std::size_t places, int max_tokens = 5) {
  std::uniform_int_distribution<int> d(0, max_tokens);
  Tokens m(places);
  for (auto& x : m) x = d(rng);
  return m;
}

} // namespace oracle
