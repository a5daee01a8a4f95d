#include "pnm/trace.hpp"

#include <ostream>
#include <sstream>

namespace pnm {

Json TraceEvent::to_json() const {
  Json j;
  j["seq"] = seq;
  j["time"] = time;
  j["machine"] = machine;
  j["kind"] = kind;
  j["payload"] = payload;
  return j;
}

std::string TraceEvent::to_line() const { return to_json().dump(); }

const TraceEvent& Trace::emit(TimeUnits time, MachineId machine, std::string kind, Json payload) {
  TraceEvent e{events_.size() + 1, time, machine, std::move(kind), std::move(payload)};
  events_.push_back(std::move(e));
  for (const auto& l : listeners_) l(events_.back());
  return events_.back();
}

std::string Trace::dump() const {
  std::ostringstream out;
  write(out);
  return out.str();
}

void Trace::write(std::ostream& out) const {
  for (const auto& e : events_) out << e.to_line() << '\n';
}

Json to_json(const kb::Value& value) {
  using K = kb::Value::Kind;
  switch (value.kind()) {
  case K::absent: return nullptr;
  case K::text: return value.text();
  case K::integer: return value.integer();
  case K::real: return value.real();
  case K::boolean: return value.boolean();
  case K::list: {
    Json arr = Json::array();
    for (const auto& v : value.list()) arr.push_back(to_json(v));
    return arr;
  }
  }
  return nullptr;
}

Json to_json(const kb::Goal& goal) {
  Json j = Json::object();
  for (const auto& [k, v] : goal) j[k] = to_json(v);
  return j;
}

} // namespace pnm
