#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "pnm/common.hpp"

namespace pnm::kb {

struct Absent {
  bool operator==(const Absent&) const = default;
};

class Value;
using List = std::vector<Value>;

/// A knowledge-base value. `absent` is distinct from empty text or list.
class Value {
public:
  using Storage = std::variant<Absent, std::string, std::int64_t, double, bool, List>;
  enum class Kind { absent, text, integer, real, boolean, list };

  Value() = default;
  Value(std::string s) : v_(std::move(s)) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(static_cast<std::int64_t>(i)) {}
  Value(double d) : v_(d) {}
  Value(bool b) : v_(b) {}
  Value(List l) : v_(std::move(l)) {}

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool absent() const { return kind() == Kind::absent; }
  bool is_number() const { return kind() == Kind::integer || kind() == Kind::real; }
  std::optional<double> number() const;

  const std::string& text() const { return std::get<std::string>(v_); }
  std::int64_t integer() const { return std::get<std::int64_t>(v_); }
  double real() const { return std::get<double>(v_); }
  bool boolean() const { return std::get<bool>(v_); }
  const List& list() const { return std::get<List>(v_); }
  const Storage& storage() const { return v_; }

  /// Truthiness used when a query or literal stands alone as a condition.
  bool truthy() const;
  /// Display form: text unquoted, lists as [a, b].
  std::string to_string() const;

  /// Structural equality (integer 3 != real 3.0).
  bool operator==(const Value&) const = default;

private:
  Storage v_;
};

/// Equality used by `eq`/`ne`: numbers compare by value across kinds.
bool loosely_equal(const Value& a, const Value& b);

/// Parses console/command-line input: integers, reals, true/false, else text.
Value parse_scalar(const std::string& text);

using Goal = std::map<std::string, Value>;

enum class Scope { local, global, all };

class KnowledgeStore {
public:
  Value get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.contains(name); }
  void set(const std::string& name, Value value);
  bool erase(const std::string& name);
  const std::map<std::string, Value>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

private:
  std::map<std::string, Value> entries_;
};

class GlobalUnavailable : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Who is asking; used to route deferred answers back.
struct QueryContext {
  MachineId machine = 0;
  ActionInstanceId action = 0;
  TimeUnits now = 0;
  /// False for non-interactive lookups (autofill, condition checks).
  bool may_defer = false;
};

/// The port forwarded the question (e.g. to the user); answer arrives later.
struct Deferred {};
using PortReply = std::variant<Value, Deferred>;

struct DeferredAnswer {
  QueryContext origin;
  std::string name;
  Value value;
};

/// Shared external knowledge source. Calls are serialized internally.
class GlobalKBPort {
public:
  virtual ~GlobalKBPort() = default;

  PortReply query(const std::string& name, const QueryContext& ctx);
  void inform(const std::string& name, const Value& value);
  /// Deferred answers that became available by `now`.
  std::vector<DeferredAnswer> poll(TimeUnits now);
  std::size_t query_count() const;

protected:
  virtual PortReply do_query(const std::string& name, const QueryContext& ctx) = 0;
  virtual void do_inform(const std::string& name, const Value& value) = 0;
  virtual std::vector<DeferredAnswer> do_poll(TimeUnits) { return {}; }

private:
  mutable std::mutex mutex_;
  std::size_t queries_ = 0;
};

/// Fixed map of facts. Read-only unless constructed writable.
class StaticKB : public GlobalKBPort {
public:
  explicit StaticKB(std::map<std::string, Value> facts = {}, bool writable = false)
      : facts_(std::move(facts)), writable_(writable) {}

protected:
  PortReply do_query(const std::string& name, const QueryContext& ctx) override;
  void do_inform(const std::string& name, const Value& value) override;

private:
  std::map<std::string, Value> facts_;
  bool writable_;
};

/// Stands in for a user: known questions are deferred and answered after a
/// scripted delay. Unknown questions come back absent, or stay deferred for
/// someone else to answer when `defer_unknown` is set.
class ScriptedOracle : public GlobalKBPort {
public:
  struct Answer {
    Value value;
    TimeUnits delay = 0;
  };
  explicit ScriptedOracle(std::map<std::string, Answer> script, bool defer_unknown = false)
      : script_(std::move(script)), defer_unknown_(defer_unknown) {}

protected:
  PortReply do_query(const std::string& name, const QueryContext& ctx) override;
  void do_inform(const std::string& name, const Value& value) override;
  std::vector<DeferredAnswer> do_poll(TimeUnits now) override;

private:
  std::map<std::string, Answer> script_;
  bool defer_unknown_;
  std::vector<std::pair<TimeUnits, DeferredAnswer>> due_;
  std::map<std::string, Value> informed_;
};

/// Every interactive question goes to a human; answers are delivered
/// through the scheduler, never through poll().
class ConsoleKB : public GlobalKBPort {
protected:
  PortReply do_query(const std::string& name, const QueryContext& ctx) override;
  void do_inform(const std::string& name, const Value& value) override;

private:
  std::map<std::string, Value> informed_;
};

struct PendingTicket {
  MachineId machine = 0;
  ActionInstanceId action = 0;
  std::string name;
  bool operator==(const PendingTicket&) const = default;
};

using QueryResult = std::variant<Value, PendingTicket>;

/// LOCAL: local only. GLOBAL: port only. ALL: local hit wins, else port.
QueryResult query(const KnowledgeStore& local, GlobalKBPort& global, Scope scope, const std::string& name,
                  const QueryContext& ctx = {});

/// LOCAL writes local, GLOBAL informs the port, ALL does both.
void update(KnowledgeStore& local, GlobalKBPort& global, Scope scope, const std::string& name, Value value);

struct MissingParam {
  std::string name;
  bool operator==(const MissingParam&) const = default;
};

/// Explicit arguments win; omitted parameters are looked up with scope ALL
/// (no deferral). The first unresolved name is reported.
std::variant<Goal, MissingParam> autofill(const std::vector<std::string>& params, const Goal& explicit_args,
                                          const KnowledgeStore& local, GlobalKBPort& global);

const char* to_string(Scope scope);

} // namespace pnm::kb
