#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "oracle/naive_net.hpp"
#include "pnm/compiler.hpp"
#include "pnm/net.hpp"

namespace pnm {
inline void PrintTo(const Event& e, std::ostream* os) { *os << to_string(e); }
inline void PrintTo(const kb::Value& v, std::ostream* os) { *os << v.to_string(); }
} // namespace pnm

namespace testing_support {

inline std::string source_path(const std::string& relative) { return std::string(PNM_SOURCE_DIR) + "/" + relative; }

inline std::string read(const std::string& relative) {
  std::ifstream in(source_path(relative), std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline pnm::lang::DomainSpec domain() { return pnm::lang::parse_domain(read("fixtures/domain.yaml")); }

inline pnm::CompiledTask compile_fixture(const std::string& plan, const std::string& name = "main") {
  const auto d = domain();
  return pnm::compile(d, pnm::lang::parse_plan(read("fixtures/" + plan), d), name);
}

/// Library net built from the oracle's arc list; weights accumulate.
inline pnm::Net to_net(const oracle::NaiveNet& n) {
  pnm::Net net;
  for (std::size_t p = 0; p < n.places; ++p) net.add_place("p" + std::to_string(p));
  for (std::size_t t = 0; t < n.transitions; ++t) net.add_transition("t" + std::to_string(t));
  for (const auto& a : n.arcs) {
    if (a.into_transition)
      net.add_input(pnm::PlaceId{a.place}, pnm::TransitionId{a.transition});
    else
      net.add_output(pnm::TransitionId{a.transition}, pnm::PlaceId{a.place});
  }
  return net;
}

/// Fork/join: p1 -t1-> p2,p3; p2 -t2-> p4; p3 -t3-> p5; p4,p5 -t4-> p6.
inline pnm::Net fork_join() {
  pnm::Net net;
  for (int i = 1; i <= 6; ++i) net.add_place("p" + std::to_string(i));
  for (int i = 1; i <= 4; ++i) net.add_transition("t" + std::to_string(i));
  auto p = [](std::size_t i) { return pnm::PlaceId{i - 1}; };
  auto t = [](std::size_t i) { return pnm::TransitionId{i - 1}; };
  net.add_input(p(1), t(1));
  net.add_output(t(1), p(2));
  net.add_output(t(1), p(3));
  net.add_input(p(2), t(2));
  net.add_output(t(2), p(4));
  net.add_input(p(3), t(3));
  net.add_output(t(3), p(5));
  net.add_input(p(4), t(4));
  net.add_input(p(5), t(4));
  net.add_output(t(4), p(6));
  return net;
}

/// p1 --2--> t --1--> p2
inline pnm::Net weighted_pair() {
  pnm::Net net;
  const auto p1 = net.add_place("p1");
  const auto p2 = net.add_place("p2");
  const auto t = net.add_transition("t");
  net.add_input(p1, t, 2);
  net.add_output(t, p2, 1);
  return net;
}

} // namespace testing_support
