#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace pnm {

/// Token counts and arc weights. Markings never hold negative entries.
using Tokens = std::int64_t;

struct PlaceId {
  std::size_t index = 0;
  auto operator<=>(const PlaceId&) const = default;
};

struct TransitionId {
  std::size_t index = 0;
  auto operator<=>(const TransitionId&) const = default;
};

class NetError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Weighted place/transition net. Arcs form a multiset: adding the same arc
/// twice adds to its weight.
class Net {
public:
  using ArcMap = std::map<std::pair<std::size_t, std::size_t>, Tokens>;

  PlaceId add_place(std::string label);
  TransitionId add_transition(std::string label);

  /// Arc place -> transition.
  void add_input(PlaceId p, TransitionId t, Tokens weight = 1);
  /// Arc transition -> place.
  void add_output(TransitionId t, PlaceId p, Tokens weight = 1);

  std::size_t place_count() const { return place_labels_.size(); }
  std::size_t transition_count() const { return transition_labels_.size(); }

  const std::string& label(PlaceId p) const;
  const std::string& label(TransitionId t) const;
  std::optional<PlaceId> find_place(std::string_view label) const;
  std::optional<TransitionId> find_transition(std::string_view label) const;

  Tokens input_weight(PlaceId p, TransitionId t) const;
  Tokens output_weight(TransitionId t, PlaceId p) const;

  /// Keyed (place, transition).
  const ArcMap& inputs() const { return inputs_; }
  /// Keyed (transition, place).
  const ArcMap& outputs() const { return outputs_; }

private:
  void check(PlaceId p) const;
  void check(TransitionId t) const;

  std::vector<std::string> place_labels_;
  std::vector<std::string> transition_labels_;
  std::map<std::string, std::size_t, std::less<>> place_index_;
  std::map<std::string, std::size_t, std::less<>> transition_index_;
  ArcMap inputs_;
  ArcMap outputs_;
};

/// Multiset of tokens over places.
class Marking {
public:
  Marking() = default;
  explicit Marking(std::size_t places) : counts_(places, 0) {}
  explicit Marking(std::vector<Tokens> counts);

  std::size_t size() const { return counts_.size(); }
  Tokens operator[](PlaceId p) const { return counts_.at(p.index); }
  Tokens operator[](std::size_t i) const { return counts_.at(i); }
  void set(PlaceId p, Tokens n);
  void add(PlaceId p, Tokens n);
  Tokens total() const;
  bool marked(PlaceId p) const { return (*this)[p] > 0; }
  const std::vector<Tokens>& counts() const { return counts_; }

  auto operator<=>(const Marking&) const = default;

private:
  std::vector<Tokens> counts_;
};

/// Times each transition fires in one update.
class FiringVector {
public:
  FiringVector() = default;
  explicit FiringVector(std::size_t transitions) : counts_(transitions, 0) {}
  explicit FiringVector(std::vector<Tokens> counts);

  std::size_t size() const { return counts_.size(); }
  Tokens operator[](TransitionId t) const { return counts_.at(t.index); }
  Tokens operator[](std::size_t i) const { return counts_.at(i); }
  void set(TransitionId t, Tokens n);
  bool zero() const;
  const std::vector<Tokens>& counts() const { return counts_; }

  FiringVector operator+(const FiringVector& other) const;
  bool operator==(const FiringVector&) const = default;

private:
  std::vector<Tokens> counts_;
};

/// Dense row-major integer matrix, rows = transitions, columns = places.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Tokens& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  Tokens operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  std::vector<Tokens> row(std::size_t r) const;

  bool operator==(const Matrix&) const = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Tokens> data_;
};

/// Consumption, production and composite change matrices (|T| x |P|).
/// Entries hold arc weights; d == d_plus - d_minus always.
struct IncidenceMatrices {
  Matrix d_minus;
  Matrix d_plus;
  Matrix d;
};

class InadmissibleFiring : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

IncidenceMatrices build_incidence(const Net& net);

/// Largest n with n * d_minus[t] <= marking. Transitions without inputs are
/// capped at one firing per step.
Tokens enabled_count(const Marking& marking, TransitionId t, const IncidenceMatrices& m);

/// marking + tbar * D. Throws InadmissibleFiring when tbar * d_minus exceeds
/// the marking anywhere.
Marking fire(const Marking& marking, const FiringVector& tbar, const IncidenceMatrices& m);

struct StructureWarning {
  enum class Kind { isolated_place, isolated_transition };
  Kind kind;
  std::size_t index;
  std::string message;
};

std::vector<StructureWarning> validate(const Net& net);

/// "{p1, p2x2}" style rendering, places in index order.
std::string format_marking(const Net& net, const Marking& marking);

} // namespace pnm
