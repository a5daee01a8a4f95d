#include "pnm/kb.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace pnm::kb {

std::optional<double> Value::number() const {
  if (kind() == Kind::integer) return static_cast<double>(integer());
  if (kind() == Kind::real) return real();
  return std::nullopt;
}

bool Value::truthy() const {
  switch (kind()) {
  case Kind::absent: return false;
  case Kind::text: return !text().empty();
  case Kind::integer: return integer() != 0;
  case Kind::real: return real() != 0.0;
  case Kind::boolean: return boolean();
  case Kind::list: return !list().empty();
  }
  return false;
}

std::string Value::to_string() const {
  switch (kind()) {
  case Kind::absent: return "<absent>";
  case Kind::text: return text();
  case Kind::integer: return std::to_string(integer());
  case Kind::real: {
    std::ostringstream out;
    out << real();
    return out.str();
  }
  case Kind::boolean: return boolean() ? "true" : "false";
  case Kind::list: {
    std::string out = "[";
    for (std::size_t i = 0; i < list().size(); ++i) {
      if (i) out += ", ";
      out += list()[i].to_string();
    }
    return out + "]";
  }
  }
  return {};
}

bool loosely_equal(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) return *a.number() == *b.number();
  if (a.kind() == Value::Kind::list && b.kind() == Value::Kind::list) {
    if (a.list().size() != b.list().size()) return false;
    for (std::size_t i = 0; i < a.list().size(); ++i)
      if (!loosely_equal(a.list()[i], b.list()[i])) return false;
    return true;
  }
  return a == b;
}

Value parse_scalar(const std::string& text) {
  if (text == "true") return Value(true);
  if (text == "false") return Value(false);
  std::int64_t i = 0;
  auto [iend, iec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (iec == std::errc() && iend == text.data() + text.size() && !text.empty()) return Value(i);
  double d = 0;
  auto [dend, dec] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (dec == std::errc() && dend == text.data() + text.size() && !text.empty() && std::isfinite(d))
    return Value(d);
  return Value(text);
}

Value KnowledgeStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? Value{} : it->second;
}

void KnowledgeStore::set(const std::string& name, Value value) {
  if (name.empty()) throw std::invalid_argument("knowledge names must not be empty");
  if (value.absent()) throw std::invalid_argument("cannot store an absent value under '" + name + "'");
  entries_[name] = std::move(value);
}

bool KnowledgeStore::erase(const std::string& name) { return entries_.erase(name) > 0; }

PortReply GlobalKBPort::query(const std::string& name, const QueryContext& ctx) {
  std::lock_guard lock(mutex_);
  ++queries_;
  return do_query(name, ctx);
}

void GlobalKBPort::inform(const std::string& name, const Value& value) {
  std::lock_guard lock(mutex_);
  do_inform(name, value);
}

std::vector<DeferredAnswer> GlobalKBPort::poll(TimeUnits now) {
  std::lock_guard lock(mutex_);
  return do_poll(now);
}

std::size_t GlobalKBPort::query_count() const {
  std::lock_guard lock(mutex_);
  return queries_;
}

PortReply StaticKB::do_query(const std::string& name, const QueryContext&) {
  auto it = facts_.find(name);
  return it == facts_.end() ? Value{} : it->second;
}

void StaticKB::do_inform(const std::string& name, const Value& value) {
  if (!writable_) throw GlobalUnavailable("global knowledge base is read-only (inform '" + name + "')");
  facts_[name] = value;
}

PortReply ScriptedOracle::do_query(const std::string& name, const QueryContext& ctx) {
  if (auto it = informed_.find(name); it != informed_.end()) return it->second;
  auto it = script_.find(name);
  if (!ctx.may_defer) return Value{};
  if (it == script_.end()) {
    if (defer_unknown_) return Deferred{};
    return Value{};
  }
  due_.push_back({ctx.now + it->second.delay, DeferredAnswer{ctx, name, it->second.value}});
  return Deferred{};
}

void ScriptedOracle::do_inform(const std::string& name, const Value& value) { informed_[name] = value; }

std::vector<DeferredAnswer> ScriptedOracle::do_poll(TimeUnits now) {
  std::vector<DeferredAnswer> ready;
  auto split = std::stable_partition(due_.begin(), due_.end(), [now](const auto& d) { return d.first > now; });
  for (auto it = split; it != due_.end(); ++it) ready.push_back(std::move(it->second));
  due_.erase(split, due_.end());
  return ready;
}

PortReply ConsoleKB::do_query(const std::string& name, const QueryContext& ctx) {
  if (auto it = informed_.find(name); it != informed_.end()) return it->second;
  if (!ctx.may_defer) return Value{};
  return Deferred{};
}

void ConsoleKB::do_inform(const std::string& name, const Value& value) { informed_[name] = value; }

QueryResult query(const KnowledgeStore& local, GlobalKBPort& global, Scope scope, const std::string& name,
                  const QueryContext& ctx) {
  if (name.empty()) throw std::invalid_argument("query name must not be empty");
  if (scope != Scope::global) {
    Value v = local.get(name);
    if (!v.absent() || scope == Scope::local) return v;
  }
  PortReply reply = global.query(name, ctx);
  if (std::holds_alternative<Deferred>(reply)) return PendingTicket{ctx.machine, ctx.action, name};
  return std::get<Value>(std::move(reply));
}

void update(KnowledgeStore& local, GlobalKBPort& global, Scope scope, const std::string& name, Value value) {
  if (value.absent()) throw std::invalid_argument("cannot update '" + name + "' with an absent value");
  if (scope != Scope::local) global.inform(name, value);
  if (scope != Scope::global) local.set(name, std::move(value));
}

std::variant<Goal, MissingParam> autofill(const std::vector<std::string>& params, const Goal& explicit_args,
                                          const KnowledgeStore& local, GlobalKBPort& global) {
  Goal goal;
  for (const auto& name : params) {
    if (auto it = explicit_args.find(name); it != explicit_args.end() && !it->second.absent()) {
      goal[name] = it->second;
      continue;
    }
    QueryResult r = query(local, global, Scope::all, name);
    const Value* v = std::get_if<Value>(&r);
    if (!v || v->absent()) return MissingParam{name};
    goal[name] = *v;
  }
  return goal;
}

const char* to_string(Scope scope) {
  switch (scope) {
  case Scope::local: return "LOCAL";
  case Scope::global: return "GLOBAL";
  case Scope::all: return "ALL";
  }
  return "?";
}

} // namespace pnm::kb
