#include "pnm/plan.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>

#include <yaml-cpp/yaml.h>

#include "yaml_detail.hpp"

namespace pnm::lang {

const char* to_string(CompareOp op) {
  switch (op) {
  case CompareOp::eq: return "eq";
  case CompareOp::ne: return "ne";
  case CompareOp::lt: return "lt";
  case CompareOp::gt: return "gt";
  case CompareOp::le: return "le";
  case CompareOp::ge: return "ge";
  }
  return "?";
}

Expression Expression::all_of(std::vector<Expression> parts) {
  Expression e;
  e.kind = Kind::conjunction;
  e.operands = std::move(parts);
  return e;
}

Expression Expression::any_of(std::vector<Expression> parts) {
  Expression e;
  e.kind = Kind::disjunction;
  e.operands = std::move(parts);
  return e;
}

Expression Expression::negate(Expression inner) {
  Expression e;
  e.kind = Kind::negation;
  e.operands.push_back(std::move(inner));
  return e;
}

Expression Expression::compare(CompareOp op, Expression lhs, Expression rhs) {
  Expression e;
  e.kind = Kind::comparison;
  e.op = op;
  e.operands.push_back(std::move(lhs));
  e.operands.push_back(std::move(rhs));
  return e;
}

Expression Expression::exists(Expression operand) {
  Expression e;
  e.kind = Kind::exists;
  e.operands.push_back(std::move(operand));
  return e;
}

Expression Expression::query(std::string name) {
  Expression e;
  e.kind = Kind::query;
  e.name = std::move(name);
  return e;
}

Expression Expression::value(kb::Value v) {
  Expression e;
  e.kind = Kind::literal;
  e.literal = std::move(v);
  return e;
}

std::string to_string(const Expression& e) {
  auto list = [](const std::vector<Expression>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out += ", ";
      out += to_string(xs[i]);
    }
    return out;
  };
  switch (e.kind) {
  case Expression::Kind::conjunction: return "and(" + list(e.operands) + ")";
  case Expression::Kind::disjunction: return "or(" + list(e.operands) + ")";
  case Expression::Kind::negation: return "not(" + list(e.operands) + ")";
  case Expression::Kind::comparison: return std::string(to_string(e.op)) + "(" + list(e.operands) + ")";
  case Expression::Kind::exists: return "exists(" + list(e.operands) + ")";
  case Expression::Kind::query: return "?" + e.name;
  case Expression::Kind::literal:
    return e.literal.kind() == kb::Value::Kind::text ? "\"" + e.literal.text() + "\"" : e.literal.to_string();
  }
  return {};
}

const ActionDecl* DomainSpec::find(const std::string& name) const {
  auto it = actions.find(name);
  return it == actions.end() ? nullptr : &it->second;
}

bool RecoveryPolicy::is_default() const {
  return on_failed == OnFailed::fail_machine && on_preempted == OnPreempted::proceed;
}

bool RecoveryPolicy::operator==(const RecoveryPolicy& o) const {
  return on_failed == o.on_failed && retries == o.retries && failed_alternative == o.failed_alternative &&
         on_preempted == o.on_preempted && preempted_alternative == o.preempted_alternative;
}

PlanNode PlanNode::make_action(std::string name, kb::Goal args) {
  PlanNode n;
  n.kind = Kind::action;
  n.action = std::move(name);
  n.args = std::move(args);
  return n;
}

PlanNode PlanNode::concurrent(std::vector<PlanNode> children) {
  PlanNode n;
  n.kind = Kind::concurrent;
  n.body = std::move(children);
  return n;
}

PlanNode PlanNode::loop(Expression condition, std::vector<PlanNode> body) {
  PlanNode n;
  n.kind = Kind::loop;
  n.condition = std::move(condition);
  n.body = std::move(body);
  return n;
}

PlanNode PlanNode::branch(Expression condition, std::vector<PlanNode> then, std::vector<PlanNode> otherwise) {
  PlanNode n;
  n.kind = Kind::branch;
  n.condition = std::move(condition);
  n.body = std::move(then);
  n.otherwise = std::move(otherwise);
  return n;
}

PlanNode PlanNode::kb(KbOp op) {
  PlanNode n;
  n.kind = Kind::kb_op;
  n.op = std::move(op);
  return n;
}

ParseError::ParseError(Kind kind, std::string message, int line, int column)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
                                        message
                                  : message),
      kind_(kind), line_(line), column_(column) {}

const char* to_string(ParseError::Kind kind) {
  switch (kind) {
  case ParseError::Kind::syntax: return "SyntaxError";
  case ParseError::Kind::unknown_super_type: return "UnknownSuperType";
  case ParseError::Kind::duplicate_action: return "DuplicateAction";
  case ParseError::Kind::unknown_action_ref: return "UnknownActionRef";
  case ParseError::Kind::unknown_param: return "UnknownParam";
  }
  return "?";
}

namespace {

using Kind = ParseError::Kind;

[[noreturn]] void fail(Kind kind, const std::string& message, const YAML::Node& at) {
  const YAML::Mark m = at.IsDefined() ? at.Mark() : YAML::Mark::null_mark();
  const bool known = m.line >= 0;
  throw ParseError(kind, message, known ? m.line + 1 : 0, known ? m.column + 1 : 0);
}

[[noreturn]] void syntax(const std::string& message, const YAML::Node& at) { fail(Kind::syntax, message, at); }

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string scalar(const YAML::Node& n, const char* what) {
  if (!n.IsScalar()) syntax(std::string("expected a scalar ") + what, n);
  return n.Scalar();
}

/// Map entries with `<<` merge keys resolved; explicit keys win.
std::vector<std::pair<YAML::Node, YAML::Node>> entries(const YAML::Node& map, const char* what) {
  if (!map.IsMap()) syntax(std::string("expected a mapping for ") + what, map);
  std::vector<std::pair<YAML::Node, YAML::Node>> out;
  std::set<std::string> seen;
  std::vector<YAML::Node> merges;
  for (auto it = map.begin(); it != map.end(); ++it) {
    const std::string key = scalar(it->first, "key");
    if (key == "<<") {
      merges.push_back(it->second);
      continue;
    }
    out.emplace_back(it->first, it->second);
    seen.insert(key);
  }
  auto merge_one = [&](const YAML::Node& src) {
    if (!src.IsMap()) syntax("merge key expects a mapping", src);
    for (auto it = src.begin(); it != src.end(); ++it) {
      const std::string key = scalar(it->first, "key");
      if (key == "<<" || seen.contains(key)) continue;
      out.emplace_back(it->first, it->second);
      seen.insert(key);
    }
  };
  for (const auto& m : merges) {
    if (m.IsSequence())
      for (const auto& item : m) merge_one(item);
    else
      merge_one(m);
  }
  return out;
}

void reject_duplicate_keys(const std::vector<std::pair<YAML::Node, YAML::Node>>& es) {
  std::set<std::string> keys;
  for (const auto& [k, v] : es)
    if (!keys.insert(k.Scalar()).second) syntax("duplicate key '" + k.Scalar() + "'", k);
}

kb::Value literal(const YAML::Node& n) {
  if (n.IsSequence()) {
    kb::List items;
    for (const auto& item : n) items.push_back(literal(item));
    return kb::Value(std::move(items));
  }
  if (!n.IsScalar()) syntax("expected a literal value", n);
  const std::string& s = n.Scalar();
  if (n.Tag() == "!" || n.Tag() == "tag:yaml.org,2002:str") return kb::Value(s);
  if (s == "~" || s == "null" || s == "Null" || s == "NULL") syntax("null is not a knowledge value", n);
  if (s == "true" || s == "True" || s == "TRUE") return kb::Value(true);
  if (s == "false" || s == "False" || s == "FALSE") return kb::Value(false);
  std::int64_t i = 0;
  auto [iend, iec] = std::from_chars(s.data(), s.data() + s.size(), i);
  if (!s.empty() && iec == std::errc() && iend == s.data() + s.size()) return kb::Value(i);
  double d = 0;
  auto [dend, dec] = std::from_chars(s.data(), s.data() + s.size(), d);
  if (!s.empty() && dec == std::errc() && dend == s.data() + s.size() && std::isfinite(d)) return kb::Value(d);
  return kb::Value(s);
}

Expression parse_expression(const YAML::Node& n);

Expression parse_operand(const YAML::Node& n) {
  if (n.IsMap()) {
    auto es = entries(n, "operand");
    if (es.size() != 1 || lower(es[0].first.Scalar()) != "query")
      syntax("operands must be a Query or a literal", n);
    return Expression::query(scalar(es[0].second, "query name"));
  }
  return Expression::value(literal(n));
}

std::vector<Expression> parse_list(const YAML::Node& n, const char* what) {
  if (!n.IsSequence()) syntax(std::string(what) + " expects a list", n);
  std::vector<Expression> out;
  for (const auto& item : n) out.push_back(parse_expression(item));
  return out;
}

Expression parse_expression(const YAML::Node& n) {
  if (n.IsScalar() || n.IsSequence()) return Expression::value(literal(n));
  auto es = entries(n, "expression");
  if (es.size() != 1) syntax("an expression mapping must have exactly one operator key", n);
  const std::string op = lower(es[0].first.Scalar());
  const YAML::Node& arg = es[0].second;
  if (op == "and") return Expression::all_of(parse_list(arg, "and"));
  if (op == "or") return Expression::any_of(parse_list(arg, "or"));
  if (op == "not") {
    if (arg.IsSequence()) {
      if (arg.size() != 1) syntax("not expects exactly one operand", arg);
      return Expression::negate(parse_expression(arg[0]));
    }
    return Expression::negate(parse_expression(arg));
  }
  if (op == "query") return Expression::query(scalar(arg, "query name"));
  if (op == "exists") {
    if (arg.IsSequence()) {
      if (arg.size() != 1) syntax("Exists expects exactly one operand", arg);
      return Expression::exists(parse_operand(arg[0]));
    }
    return Expression::exists(parse_operand(arg));
  }
  if (op == "comparison") {
    if (!arg.IsSequence() || arg.size() != 2) syntax("Comparison expects [operator, [lhs, rhs]]", arg);
    static const std::map<std::string, CompareOp> ops = {{"eq", CompareOp::eq}, {"ne", CompareOp::ne},
                                                         {"lt", CompareOp::lt}, {"gt", CompareOp::gt},
                                                         {"le", CompareOp::le}, {"ge", CompareOp::ge}};
    auto it = ops.find(lower(scalar(arg[0], "comparison operator")));
    if (it == ops.end()) syntax("unknown comparison operator '" + arg[0].Scalar() + "'", arg[0]);
    const YAML::Node& xs = arg[1];
    if (!xs.IsSequence() || xs.size() != 2) syntax("Comparison takes exactly two operands", xs);
    return Expression::compare(it->second, parse_operand(xs[0]), parse_operand(xs[1]));
  }
  syntax("unknown expression operator '" + es[0].first.Scalar() + "'", es[0].first);
}

ActionDecl parse_action(const std::string& name, const YAML::Node& body) {
  ActionDecl decl;
  decl.name = name;
  if (body.IsNull()) syntax("action '" + name + "' needs a super_type", body);
  auto es = entries(body, "action");
  reject_duplicate_keys(es);
  bool has_super = false;
  for (const auto& [k, v] : es) {
    const std::string key = k.Scalar();
    if (key == "super_type") {
      const std::string st = scalar(v, "super type");
      if (st == "rpn_action")
        decl.super_type = SuperType::rpn_action;
      else if (st == "ros_action")
        decl.super_type = SuperType::ros_action;
      else
        fail(Kind::unknown_super_type, "unknown super type '" + st + "'", v);
      has_super = true;
    } else if (key == "params") {
      if (v.IsNull()) continue;
      if (!v.IsSequence()) syntax("params must be a list", v);
      std::set<std::string> seen;
      for (const auto& p : v) {
        std::string param = scalar(p, "parameter name");
        if (param.empty()) syntax("parameter names must not be empty", p);
        if (!seen.insert(param).second) syntax("duplicate parameter '" + param + "'", p);
        decl.params.push_back(std::move(param));
      }
    } else if (key == "preconditions") {
      if (!v.IsNull()) decl.preconditions = parse_expression(v);
    } else if (key == "effects") {
      if (!v.IsNull()) decl.effects = parse_expression(v);
    } else {
      syntax("unknown key '" + key + "' in action '" + name + "'", k);
    }
  }
  if (!has_super) syntax("action '" + name + "' needs a super_type", body);
  return decl;
}

YAML::Node load(std::string_view document) {
  try {
    return YAML::Load(std::string(document));
  } catch (const YAML::Exception& e) {
    throw ParseError(Kind::syntax, e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0,
                     e.mark.column >= 0 ? e.mark.column + 1 : 0);
  }
}

template <class F>
auto guarded(F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const ParseError&) {
    throw;
  } catch (const YAML::Exception& e) {
    throw ParseError(Kind::syntax, e.msg, e.mark.line >= 0 ? e.mark.line + 1 : 0,
                     e.mark.column >= 0 ? e.mark.column + 1 : 0);
  }
}

const std::set<std::string>& reserved() {
  static const std::set<std::string> words = {"concurrent_actions", "loop", "branch", "kb_op", "recovery"};
  return words;
}

struct PlanParser {
  const DomainSpec& domain;

  std::vector<PlanNode> sequence(const YAML::Node& n, const char* what) {
    if (n.IsNull()) return {};
    if (!n.IsSequence()) syntax(std::string(what) + " must be a list of plan steps", n);
    std::vector<PlanNode> out;
    for (const auto& item : n) out.push_back(node(item));
    return out;
  }

  PlanNode node(const YAML::Node& n) {
    auto es = entries(n, "plan step");
    reject_duplicate_keys(es);
    if (es.empty()) syntax("empty plan step", n);
    const std::string head = es[0].first.Scalar();

    if (head == "concurrent_actions") {
      if (es.size() != 1) syntax("concurrent_actions takes no sibling keys", n);
      return PlanNode::concurrent(sequence(es[0].second, "concurrent_actions"));
    }
    if (head == "loop") {
      if (es.size() != 1) syntax("loop takes no sibling keys", n);
      auto body = entries(es[0].second, "loop");
      reject_duplicate_keys(body);
      std::optional<Expression> cond;
      std::vector<PlanNode> steps;
      for (const auto& [k, v] : body) {
        if (k.Scalar() == "while")
          cond = parse_expression(v);
        else if (k.Scalar() == "do")
          steps = sequence(v, "loop body");
        else
          syntax("unknown key '" + k.Scalar() + "' in loop", k);
      }
      if (!cond) syntax("loop needs a 'while' condition", es[0].second);
      return PlanNode::loop(std::move(*cond), std::move(steps));
    }
    if (head == "branch") {
      if (es.size() != 1) syntax("branch takes no sibling keys", n);
      auto body = entries(es[0].second, "branch");
      reject_duplicate_keys(body);
      std::optional<Expression> cond;
      std::vector<PlanNode> then, otherwise;
      for (const auto& [k, v] : body) {
        if (k.Scalar() == "if")
          cond = parse_expression(v);
        else if (k.Scalar() == "then")
          then = sequence(v, "branch then");
        else if (k.Scalar() == "else")
          otherwise = sequence(v, "branch else");
        else
          syntax("unknown key '" + k.Scalar() + "' in branch", k);
      }
      if (!cond) syntax("branch needs an 'if' condition", es[0].second);
      return PlanNode::branch(std::move(*cond), std::move(then), std::move(otherwise));
    }
    if (head == "kb_op") {
      if (es.size() != 1) syntax("kb_op takes no sibling keys", n);
      return PlanNode::kb(kb_op(es[0].second));
    }
    return action(n, es);
  }

  KbOp kb_op(const YAML::Node& n) {
    auto es = entries(n, "kb_op");
    reject_duplicate_keys(es);
    std::map<std::string, YAML::Node> fields;
    for (const auto& [k, v] : es) fields.emplace(k.Scalar(), v);
    auto take = [&](const std::string& key) -> std::string {
      auto it = fields.find(key);
      if (it == fields.end()) syntax("kb_op needs '" + key + "'", n);
      std::string s = scalar(it->second, key.c_str());
      if (s.empty()) syntax("kb_op '" + key + "' must not be empty", it->second);
      fields.erase(it);
      return s;
    };
    KbOp op;
    const std::string kind = take("op");
    if (kind == "set") {
      op.kind = KbOp::Kind::set;
      op.name = take("name");
      auto it = fields.find("value");
      if (it == fields.end()) syntax("kb_op set needs a value", n);
      op.value = literal(it->second);
      fields.erase(it);
    } else if (kind == "copy") {
      op.kind = KbOp::Kind::copy;
      op.name = take("from");
      op.target = take("to");
    } else if (kind == "delete") {
      op.kind = KbOp::Kind::remove;
      op.name = take("name");
    } else {
      syntax("unknown kb_op '" + kind + "'", n);
    }
    if (!fields.empty()) syntax("unknown key '" + fields.begin()->first + "' in kb_op", fields.begin()->second);
    return op;
  }

  PlanNode action(const YAML::Node& n, const std::vector<std::pair<YAML::Node, YAML::Node>>& es) {
    const YAML::Node* name_key = nullptr;
    const YAML::Node* args = nullptr;
    const YAML::Node* recovery = nullptr;
    for (const auto& [k, v] : es) {
      if (k.Scalar() == "recovery") {
        recovery = &v;
      } else {
        if (name_key) syntax("a plan step names exactly one action", k);
        if (reserved().contains(k.Scalar())) syntax("'" + k.Scalar() + "' cannot be combined with other keys", k);
        name_key = &k;
        args = &v;
      }
    }
    if (!name_key) syntax("plan step names no action", n);
    const std::string name = name_key->Scalar();
    const ActionDecl* decl = domain.find(name);
    if (!decl) fail(Kind::unknown_action_ref, "action '" + name + "' is not declared in the domain", *name_key);

    PlanNode out = PlanNode::make_action(name);
    if (!args->IsNull()) {
      auto as = entries(*args, "action arguments");
      reject_duplicate_keys(as);
      for (const auto& [k, v] : as) {
        if (std::find(decl->params.begin(), decl->params.end(), k.Scalar()) == decl->params.end())
          fail(Kind::unknown_param, "action '" + name + "' has no parameter '" + k.Scalar() + "'", k);
        out.args[k.Scalar()] = literal(v);
      }
    }
    if (recovery) out.recovery = policy(*recovery);
    return out;
  }

  RecoveryPolicy policy(const YAML::Node& n) {
    RecoveryPolicy p;
    auto es = entries(n, "recovery");
    reject_duplicate_keys(es);
    for (const auto& [k, v] : es) {
      const std::string key = k.Scalar();
      if (key == "failed") {
        if (v.IsScalar()) {
          if (v.Scalar() != "fail") syntax("failed recovery must be 'fail', {retry: n} or {alternative: [...]}", v);
          p.on_failed = RecoveryPolicy::OnFailed::fail_machine;
          continue;
        }
        auto fs = entries(v, "failed recovery");
        if (fs.size() != 1) syntax("failed recovery takes exactly one policy", v);
        const std::string kind = fs[0].first.Scalar();
        if (kind == "retry") {
          const kb::Value count = literal(fs[0].second);
          if (count.kind() != kb::Value::Kind::integer || count.integer() < 1)
            syntax("retry count must be an integer >= 1", fs[0].second);
          p.on_failed = RecoveryPolicy::OnFailed::retry;
          p.retries = static_cast<std::size_t>(count.integer());
        } else if (kind == "alternative") {
          p.on_failed = RecoveryPolicy::OnFailed::alternative;
          p.failed_alternative = sequence(fs[0].second, "alternative");
        } else {
          syntax("unknown failed recovery '" + kind + "'", fs[0].first);
        }
      } else if (key == "preempted") {
        if (v.IsScalar()) {
          if (v.Scalar() != "continue") syntax("preempted recovery must be 'continue' or {alternative: [...]}", v);
          p.on_preempted = RecoveryPolicy::OnPreempted::proceed;
          continue;
        }
        auto fs = entries(v, "preempted recovery");
        if (fs.size() != 1 || fs[0].first.Scalar() != "alternative")
          syntax("preempted recovery must be 'continue' or {alternative: [...]}", v);
        p.on_preempted = RecoveryPolicy::OnPreempted::alternative;
        p.preempted_alternative = sequence(fs[0].second, "alternative");
      } else {
        syntax("unknown key '" + key + "' in recovery", k);
      }
    }
    return p;
  }
};

} // namespace

DomainSpec parse_domain(std::string_view document) {
  YAML::Node root = load(document);
  return guarded([&] {
    DomainSpec domain;
    if (!root.IsMap()) syntax("a domain document must be a mapping with an 'actions' key", root);
    auto es = entries(root, "domain");
    reject_duplicate_keys(es);
    bool has_actions = false;
    for (const auto& [k, v] : es) {
      const std::string key = k.Scalar();
      if (key == "super_types") {
        if (!v.IsNull() && !v.IsMap()) syntax("super_types must be a mapping", v);
        continue;
      }
      if (key != "actions") syntax("unknown key '" + key + "' in domain", k);
      has_actions = true;
      if (v.IsNull()) continue;
      if (!v.IsMap()) syntax("actions must be a mapping", v);
      for (auto it = v.begin(); it != v.end(); ++it) {
        const std::string name = scalar(it->first, "action name");
        if (name.empty()) syntax("action names must not be empty", it->first);
        if (domain.actions.contains(name))
          fail(Kind::duplicate_action, "duplicate action '" + name + "'", it->first);
        domain.actions.emplace(name, parse_action(name, it->second));
      }
    }
    if (!has_actions) syntax("a domain document needs an 'actions' key", root);
    return domain;
  });
}

PlanSpec parse_plan(std::string_view document, const DomainSpec& domain) {
  YAML::Node root = load(document);
  return guarded([&] {
    PlanSpec plan;
    if (!root.IsMap()) syntax("a plan document must be a mapping with a 'plan' key", root);
    auto es = entries(root, "plan document");
    reject_duplicate_keys(es);
    bool has_plan = false;
    PlanParser parser{domain};
    for (const auto& [k, v] : es) {
      const std::string key = k.Scalar();
      if (key == "initial_knowledge") {
        if (v.IsNull()) continue;
        auto ks = entries(v, "initial_knowledge");
        reject_duplicate_keys(ks);
        for (const auto& [name, value] : ks) {
          if (name.Scalar().empty()) syntax("knowledge names must not be empty", name);
          plan.initial_knowledge[name.Scalar()] = literal(value);
        }
      } else if (key == "plan") {
        has_plan = true;
        plan.plan = parser.sequence(v, "plan");
        if (plan.plan.empty()) syntax("plan must not be empty", v);
      } else {
        syntax("unknown key '" + key + "' in plan document", k);
      }
    }
    if (!has_plan) syntax("a plan document needs a 'plan' key", root);
    return plan;
  });
}

namespace {

std::string real_text(double d) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, d);
  std::string s(buf, end);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

void emit(YAML::Emitter& out, const kb::Value& v) {
  switch (v.kind()) {
  case kb::Value::Kind::absent: out << YAML::Null; break;
  case kb::Value::Kind::text: out << YAML::DoubleQuoted << v.text(); break;
  case kb::Value::Kind::integer: out << std::to_string(v.integer()); break;
  case kb::Value::Kind::real: out << real_text(v.real()); break;
  case kb::Value::Kind::boolean: out << (v.boolean() ? "true" : "false"); break;
  case kb::Value::Kind::list:
    out << YAML::Flow << YAML::BeginSeq;
    for (const auto& item : v.list()) emit(out, item);
    out << YAML::EndSeq;
    break;
  }
}

void emit_operand(YAML::Emitter& out, const Expression& e) {
  if (e.kind == Expression::Kind::query) {
    out << YAML::BeginMap << YAML::Key << "Query" << YAML::Value << YAML::DoubleQuoted << e.name << YAML::EndMap;
  } else {
    emit(out, e.literal);
  }
}

void emit(YAML::Emitter& out, const Expression& e) {
  switch (e.kind) {
  case Expression::Kind::conjunction:
  case Expression::Kind::disjunction:
    out << YAML::BeginMap << YAML::Key << (e.kind == Expression::Kind::conjunction ? "and" : "or") << YAML::Value
        << YAML::BeginSeq;
    for (const auto& x : e.operands) emit(out, x);
    out << YAML::EndSeq << YAML::EndMap;
    break;
  case Expression::Kind::negation:
    out << YAML::BeginMap << YAML::Key << "not" << YAML::Value;
    emit(out, e.operands.at(0));
    out << YAML::EndMap;
    break;
  case Expression::Kind::comparison:
    out << YAML::BeginMap << YAML::Key << "Comparison" << YAML::Value << YAML::Flow << YAML::BeginSeq
        << YAML::DoubleQuoted << to_string(e.op) << YAML::BeginSeq;
    emit_operand(out, e.operands.at(0));
    emit_operand(out, e.operands.at(1));
    out << YAML::EndSeq << YAML::EndSeq << YAML::EndMap;
    break;
  case Expression::Kind::exists:
    out << YAML::BeginMap << YAML::Key << "Exists" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    emit_operand(out, e.operands.at(0));
    out << YAML::EndSeq << YAML::EndMap;
    break;
  case Expression::Kind::query:
    out << YAML::BeginMap << YAML::Key << "Query" << YAML::Value << YAML::DoubleQuoted << e.name << YAML::EndMap;
    break;
  case Expression::Kind::literal: emit(out, e.literal); break;
  }
}

void emit(YAML::Emitter& out, const std::vector<PlanNode>& nodes);

void emit(YAML::Emitter& out, const PlanNode& n) {
  out << YAML::BeginMap;
  switch (n.kind) {
  case PlanNode::Kind::action: {
    out << YAML::Key << n.action << YAML::Value << YAML::Flow << YAML::BeginMap;
    for (const auto& [k, v] : n.args) {
      out << YAML::Key << k << YAML::Value;
      emit(out, v);
    }
    out << YAML::EndMap;
    if (!n.recovery.is_default()) {
      const auto& r = n.recovery;
      out << YAML::Key << "recovery" << YAML::Value << YAML::BeginMap;
      out << YAML::Key << "failed" << YAML::Value;
      if (r.on_failed == RecoveryPolicy::OnFailed::fail_machine) {
        out << "fail";
      } else if (r.on_failed == RecoveryPolicy::OnFailed::retry) {
        out << YAML::BeginMap << YAML::Key << "retry" << YAML::Value << std::to_string(r.retries) << YAML::EndMap;
      } else {
        out << YAML::BeginMap << YAML::Key << "alternative" << YAML::Value;
        emit(out, r.failed_alternative);
        out << YAML::EndMap;
      }
      out << YAML::Key << "preempted" << YAML::Value;
      if (r.on_preempted == RecoveryPolicy::OnPreempted::proceed) {
        out << "continue";
      } else {
        out << YAML::BeginMap << YAML::Key << "alternative" << YAML::Value;
        emit(out, r.preempted_alternative);
        out << YAML::EndMap;
      }
      out << YAML::EndMap;
    }
    break;
  }
  case PlanNode::Kind::concurrent:
    out << YAML::Key << "concurrent_actions" << YAML::Value;
    emit(out, n.body);
    break;
  case PlanNode::Kind::loop:
    out << YAML::Key << "loop" << YAML::Value << YAML::BeginMap << YAML::Key << "while" << YAML::Value;
    emit(out, *n.condition);
    out << YAML::Key << "do" << YAML::Value;
    emit(out, n.body);
    out << YAML::EndMap;
    break;
  case PlanNode::Kind::branch:
    out << YAML::Key << "branch" << YAML::Value << YAML::BeginMap << YAML::Key << "if" << YAML::Value;
    emit(out, *n.condition);
    out << YAML::Key << "then" << YAML::Value;
    emit(out, n.body);
    out << YAML::Key << "else" << YAML::Value;
    emit(out, n.otherwise);
    out << YAML::EndMap;
    break;
  case PlanNode::Kind::kb_op:
    out << YAML::Key << "kb_op" << YAML::Value << YAML::BeginMap;
    switch (n.op.kind) {
    case KbOp::Kind::set:
      out << YAML::Key << "op" << YAML::Value << "set" << YAML::Key << "name" << YAML::Value << YAML::DoubleQuoted
          << n.op.name << YAML::Key << "value" << YAML::Value;
      emit(out, n.op.value);
      break;
    case KbOp::Kind::copy:
      out << YAML::Key << "op" << YAML::Value << "copy" << YAML::Key << "from" << YAML::Value << YAML::DoubleQuoted
          << n.op.name << YAML::Key << "to" << YAML::Value << YAML::DoubleQuoted << n.op.target;
      break;
    case KbOp::Kind::remove:
      out << YAML::Key << "op" << YAML::Value << "delete" << YAML::Key << "name" << YAML::Value
          << YAML::DoubleQuoted << n.op.name;
      break;
    }
    out << YAML::EndMap;
    break;
  }
  out << YAML::EndMap;
}

void emit(YAML::Emitter& out, const std::vector<PlanNode>& nodes) {
  out << YAML::BeginSeq;
  for (const auto& n : nodes) emit(out, n);
  out << YAML::EndSeq;
}

} // namespace

std::string serialize(const DomainSpec& domain) {
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "actions" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, decl] : domain.actions) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "super_type" << YAML::Value
        << (decl.super_type == SuperType::rpn_action ? "rpn_action" : "ros_action");
    out << YAML::Key << "params" << YAML::Value << YAML::Flow << YAML::BeginSeq;
    for (const auto& p : decl.params) out << YAML::DoubleQuoted << p;
    out << YAML::EndSeq;
    if (decl.preconditions) {
      out << YAML::Key << "preconditions" << YAML::Value;
      emit(out, *decl.preconditions);
    }
    if (decl.effects) {
      out << YAML::Key << "effects" << YAML::Value;
      emit(out, *decl.effects);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string serialize(const PlanSpec& plan) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "initial_knowledge" << YAML::Value << YAML::BeginMap;
  for (const auto& [k, v] : plan.initial_knowledge) {
    out << YAML::Key << k << YAML::Value;
    emit(out, v);
  }
  out << YAML::EndMap;
  out << YAML::Key << "plan" << YAML::Value;
  emit(out, plan.plan);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

namespace {

kb::Value resolve(const Expression& operand, const kb::KnowledgeStore& local, kb::GlobalKBPort& global,
                  const kb::Goal* overlay) {
  if (operand.kind == Expression::Kind::literal) return operand.literal;
  if (operand.kind != Expression::Kind::query) throw TypeMismatch("operand must be a query or a literal");
  if (overlay) {
    auto it = overlay->find(operand.name);
    if (it != overlay->end() && !it->second.absent()) return it->second;
  }
  auto r = kb::query(local, global, kb::Scope::all, operand.name);
  if (auto v = std::get_if<kb::Value>(&r)) return *v;
  return {};
}

} // namespace

bool eval(const Expression& expr, const kb::KnowledgeStore& local, kb::GlobalKBPort& global,
          const kb::Goal* overlay) {
  switch (expr.kind) {
  case Expression::Kind::conjunction:
    for (const auto& x : expr.operands)
      if (!eval(x, local, global, overlay)) return false;
    return true;
  case Expression::Kind::disjunction:
    for (const auto& x : expr.operands)
      if (eval(x, local, global, overlay)) return true;
    return false;
  case Expression::Kind::negation: return !eval(expr.operands.at(0), local, global, overlay);
  case Expression::Kind::exists: return !resolve(expr.operands.at(0), local, global, overlay).absent();
  case Expression::Kind::query:
  case Expression::Kind::literal: return resolve(expr, local, global, overlay).truthy();
  case Expression::Kind::comparison: {
    const kb::Value a = resolve(expr.operands.at(0), local, global, overlay);
    const kb::Value b = resolve(expr.operands.at(1), local, global, overlay);
    if (a.absent() || b.absent()) return false;
    switch (expr.op) {
    case CompareOp::eq: return kb::loosely_equal(a, b);
    case CompareOp::ne: return !kb::loosely_equal(a, b);
    default: break;
    }
    if (!a.is_number() || !b.is_number())
      throw TypeMismatch(std::string("ordered comparison '") + to_string(expr.op) + "' needs numbers, got '" +
                         a.to_string() + "' and '" + b.to_string() + "'");
    const double x = *a.number(), y = *b.number();
    switch (expr.op) {
    case CompareOp::lt: return x < y;
    case CompareOp::gt: return x > y;
    case CompareOp::le: return x <= y;
    case CompareOp::ge: return x >= y;
    default: return false;
    }
  }
  }
  return false;
}

namespace detail {

YAML::Node load(std::string_view document) { return lang::load(document); }
void syntax(const std::string& message, const YAML::Node& at) { lang::syntax(message, at); }
std::string scalar(const YAML::Node& n, const char* what) { return lang::scalar(n, what); }

std::vector<std::pair<YAML::Node, YAML::Node>> entries(const YAML::Node& map, const char* what) {
  auto es = lang::entries(map, what);
  reject_duplicate_keys(es);
  return es;
}

kb::Value literal(const YAML::Node& n) { return lang::literal(n); }

void guard(const std::function<void()>& f) {
  guarded([&] {
    f();
    return 0;
  });
}

} // namespace detail

} // namespace pnm::lang
