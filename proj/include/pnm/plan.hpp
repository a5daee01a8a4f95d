#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pnm/kb.hpp"

namespace pnm::lang {

enum class CompareOp { eq, ne, lt, gt, le, ge };

const char* to_string(CompareOp op);

/// Precondition/effect AST. Comparison and Exists operands are always a
/// query or a literal.
struct Expression {
  enum class Kind { conjunction, disjunction, negation, comparison, exists, query, literal };

  Kind kind = Kind::literal;
  CompareOp op = CompareOp::eq;
  std::vector<Expression> operands;
  std::string name;
  kb::Value literal;

  static Expression all_of(std::vector<Expression> parts);
  static Expression any_of(std::vector<Expression> parts);
  static Expression negate(Expression inner);
  static Expression compare(CompareOp op, Expression lhs, Expression rhs);
  static Expression exists(Expression operand);
  static Expression query(std::string name);
  static Expression value(kb::Value v);

  bool operator==(const Expression&) const = default;
};

/// Compact single-line rendering, e.g. `and(eq(?time, ?value), not(...))`.
std::string to_string(const Expression& e);

enum class SuperType { rpn_action, ros_action };

struct ActionDecl {
  std::string name;
  SuperType super_type = SuperType::ros_action;
  std::vector<std::string> params;
  std::optional<Expression> preconditions;
  std::optional<Expression> effects;

  bool operator==(const ActionDecl&) const = default;
};

struct DomainSpec {
  std::map<std::string, ActionDecl> actions;

  const ActionDecl* find(const std::string& name) const;
  bool operator==(const DomainSpec&) const = default;
};

struct PlanNode;

struct RecoveryPolicy {
  enum class OnFailed { fail_machine, retry, alternative };
  enum class OnPreempted { proceed, alternative };

  OnFailed on_failed = OnFailed::fail_machine;
  std::size_t retries = 0;
  std::vector<PlanNode> failed_alternative;
  OnPreempted on_preempted = OnPreempted::proceed;
  std::vector<PlanNode> preempted_alternative;

  bool is_default() const;
  bool operator==(const RecoveryPolicy& other) const;
};

/// Knowledge operation executed by the machine itself.
struct KbOp {
  enum class Kind { set, copy, remove };
  Kind kind = Kind::set;
  std::string name;
  /// Destination name for copy.
  std::string target;
  /// Value for set.
  kb::Value value;

  bool operator==(const KbOp&) const = default;
};

struct PlanNode {
  enum class Kind { action, concurrent, loop, branch, kb_op };

  Kind kind = Kind::action;
  std::string action;
  kb::Goal args;
  RecoveryPolicy recovery;
  /// Concurrent children, loop body or branch "then" list.
  std::vector<PlanNode> body;
  /// Branch "else" list.
  std::vector<PlanNode> otherwise;
  std::optional<Expression> condition;
  KbOp op;

  static PlanNode make_action(std::string name, kb::Goal args = {});
  static PlanNode concurrent(std::vector<PlanNode> children);
  static PlanNode loop(Expression condition, std::vector<PlanNode> body);
  static PlanNode branch(Expression condition, std::vector<PlanNode> then, std::vector<PlanNode> otherwise = {});
  static PlanNode kb(KbOp op);

  bool operator==(const PlanNode&) const = default;
};

struct PlanSpec {
  kb::Goal initial_knowledge;
  std::vector<PlanNode> plan;

  bool operator==(const PlanSpec&) const = default;
};

class ParseError : public std::runtime_error {
public:
  enum class Kind { syntax, unknown_super_type, duplicate_action, unknown_action_ref, unknown_param };

  ParseError(Kind kind, std::string message, int line = 0, int column = 0);

  Kind kind() const { return kind_; }
  /// 1-based; 0 when unknown.
  int line() const { return line_; }
  int column() const { return column_; }

private:
  Kind kind_;
  int line_;
  int column_;
};

const char* to_string(ParseError::Kind kind);

DomainSpec parse_domain(std::string_view document);
/// Every referenced action must exist in `domain` and explicit arguments
/// must be declared parameters.
PlanSpec parse_plan(std::string_view document, const DomainSpec& domain);

std::string serialize(const DomainSpec& domain);
std::string serialize(const PlanSpec& plan);

class TypeMismatch : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Queries resolve from `overlay` first (when given), then with scope ALL.
/// Comparisons and Exists on absent operands are false. Ordered comparisons
/// on non-numbers throw TypeMismatch.
bool eval(const Expression& expr, const kb::KnowledgeStore& local, kb::GlobalKBPort& global,
          const kb::Goal* overlay = nullptr);

} // namespace pnm::lang
