#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "pnm/common.hpp"
#include "pnm/kb.hpp"

namespace pnm {

using Json = nlohmann::ordered_json;

/// One trace record. Kinds: step, fired, action-start, action-end, kb-query,
/// kb-update, ticket-open, ticket-answered, status-change.
struct TraceEvent {
  std::uint64_t seq = 0;
  TimeUnits time = 0;
  MachineId machine = 0;
  std::string kind;
  Json payload;

  Json to_json() const;
  /// Single line, no trailing newline.
  std::string to_line() const;
};

/// Append-only log with strictly increasing sequence numbers.
class Trace {
public:
  using Listener = std::function<void(const TraceEvent&)>;

  const TraceEvent& emit(TimeUnits time, MachineId machine, std::string kind, Json payload = Json::object());
  const std::vector<TraceEvent>& events() const { return events_; }
  void subscribe(Listener listener) { listeners_.push_back(std::move(listener)); }

  /// Newline-delimited records.
  std::string dump() const;
  void write(std::ostream& out) const;

private:
  std::vector<TraceEvent> events_;
  std::vector<Listener> listeners_;
};

Json to_json(const kb::Value& value);
Json to_json(const kb::Goal& goal);

} // namespace pnm
