#include "pnm/net.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace pnm {

PlaceId Net::add_place(std::string label) {
  if (label.empty()) throw NetError("place label must not be empty");
  if (place_index_.contains(label) || transition_index_.contains(label))
    throw NetError("duplicate node label: " + label);
  const std::size_t index = place_labels_.size();
  place_index_.emplace(label, index);
  place_labels_.push_back(std::move(label));
  return PlaceId{index};
}

TransitionId Net::add_transition(std::string label) {
  if (label.empty()) throw NetError("transition label must not be empty");
  if (place_index_.contains(label) || transition_index_.contains(label))
    throw NetError("duplicate node label: " + label);
  const std::size_t index = transition_labels_.size();
  transition_index_.emplace(label, index);
  transition_labels_.push_back(std::move(label));
  return TransitionId{index};
}

void Net::check(PlaceId p) const {
  if (p.index >= place_labels_.size()) throw NetError("unknown place index " + std::to_string(p.index));
}

void Net::check(TransitionId t) const {
  if (t.index >= transition_labels_.size())
    throw NetError("unknown transition index " + std::to_string(t.index));
}

void Net::add_input(PlaceId p, TransitionId t, Tokens weight) {
  check(p);
  check(t);
  if (weight < 1) throw NetError("arc weight must be at least 1");
  inputs_[{p.index, t.index}] += weight;
}

void Net::add_output(TransitionId t, PlaceId p, Tokens weight) {
  check(t);
  check(p);
  if (weight < 1) throw NetError("arc weight must be at least 1");
  outputs_[{t.index, p.index}] += weight;
}

const std::string& Net::label(PlaceId p) const {
  check(p);
  return place_labels_[p.index];
}

const std::string& Net::label(TransitionId t) const {
  check(t);
  return transition_labels_[t.index];
}

std::optional<PlaceId> Net::find_place(std::string_view label) const {
  auto it = place_index_.find(label);
  if (it == place_index_.end()) return std::nullopt;
  return PlaceId{it->second};
}

std::optional<TransitionId> Net::find_transition(std::string_view label) const {
  auto it = transition_index_.find(label);
  if (it == transition_index_.end()) return std::nullopt;
  return TransitionId{it->second};
}

Tokens Net::input_weight(PlaceId p, TransitionId t) const {
  auto it = inputs_.find({p.index, t.index});
  return it == inputs_.end() ? 0 : it->second;
}

Tokens Net::output_weight(TransitionId t, PlaceId p) const {
  auto it = outputs_.find({t.index, p.index});
  return it == outputs_.end() ? 0 : it->second;
}

Marking::Marking(std::vector<Tokens> counts) : counts_(std::move(counts)) {
  if (std::any_of(counts_.begin(), counts_.end(), [](Tokens n) { return n < 0; }))
    throw std::invalid_argument("marking entries must be non-negative");
}

void Marking::set(PlaceId p, Tokens n) {
  if (n < 0) throw std::invalid_argument("marking entries must be non-negative");
  counts_.at(p.index) = n;
}

void Marking::add(PlaceId p, Tokens n) { set(p, counts_.at(p.index) + n); }

Tokens Marking::total() const {
  Tokens sum = 0;
  for (Tokens n : counts_) sum += n;
  return sum;
}

FiringVector::FiringVector(std::vector<Tokens> counts) : counts_(std::move(counts)) {
  if (std::any_of(counts_.begin(), counts_.end(), [](Tokens n) { return n < 0; }))
    throw std::invalid_argument("firing counts must be non-negative");
}

void FiringVector::set(TransitionId t, Tokens n) {
  if (n < 0) throw std::invalid_argument("firing counts must be non-negative");
  counts_.at(t.index) = n;
}

bool FiringVector::zero() const {
  return std::all_of(counts_.begin(), counts_.end(), [](Tokens n) { return n == 0; });
}

FiringVector FiringVector::operator+(const FiringVector& other) const {
  if (other.size() != size()) throw std::invalid_argument("firing vector size mismatch");
  FiringVector sum(size());
  for (std::size_t i = 0; i < size(); ++i) sum.counts_[i] = counts_[i] + other.counts_[i];
  return sum;
}

std::vector<Tokens> Matrix::row(std::size_t r) const {
  return {data_.begin() + static_cast<std::ptrdiff_t>(r * cols_),
          data_.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols_)};
}

IncidenceMatrices build_incidence(const Net& net) {
  const std::size_t nt = net.transition_count();
  const std::size_t np = net.place_count();
  IncidenceMatrices m{Matrix(nt, np), Matrix(nt, np), Matrix(nt, np)};
  for (const auto& [key, weight] : net.inputs()) m.d_minus(key.second, key.first) = weight;
  for (const auto& [key, weight] : net.outputs()) m.d_plus(key.first, key.second) = weight;
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t p = 0; p < np; ++p) m.d(t, p) = m.d_plus(t, p) - m.d_minus(t, p);
  return m;
}

Tokens enabled_count(const Marking& marking, TransitionId t, const IncidenceMatrices& m) {
  if (marking.size() != m.d_minus.cols() || t.index >= m.d_minus.rows())
    throw std::invalid_argument("marking/transition does not match incidence dimensions");
  Tokens n = std::numeric_limits<Tokens>::max();
  bool has_input = false;
  for (std::size_t p = 0; p < m.d_minus.cols(); ++p) {
    const Tokens need = m.d_minus(t.index, p);
    if (need == 0) continue;
    has_input = true;
    n = std::min(n, marking[p] / need);
  }
  return has_input ? n : 1;
}

Marking fire(const Marking& marking, const FiringVector& tbar, const IncidenceMatrices& m) {
  if (marking.size() != m.d.cols() || tbar.size() != m.d.rows())
    throw std::invalid_argument("marking/firing vector does not match incidence dimensions");
  std::vector<Tokens> consumed(marking.size(), 0);
  std::vector<Tokens> next = marking.counts();
  for (std::size_t t = 0; t < tbar.size(); ++t) {
    const Tokens times = tbar[t];
    if (times == 0) continue;
    for (std::size_t p = 0; p < marking.size(); ++p) {
      consumed[p] += times * m.d_minus(t, p);
      next[p] += times * m.d(t, p);
    }
  }
  for (std::size_t p = 0; p < marking.size(); ++p) {
    if (consumed[p] > marking[p]) {
      std::ostringstream msg;
      msg << "firing vector consumes " << consumed[p] << " tokens from place " << p << " holding "
          << marking[p];
      throw InadmissibleFiring(msg.str());
    }
  }
  return Marking(std::move(next));
}

std::vector<StructureWarning> validate(const Net& net) {
  std::vector<bool> place_used(net.place_count(), false);
  std::vector<bool> transition_used(net.transition_count(), false);
  for (const auto& [key, weight] : net.inputs()) {
    place_used[key.first] = true;
    transition_used[key.second] = true;
  }
  for (const auto& [key, weight] : net.outputs()) {
    transition_used[key.first] = true;
    place_used[key.second] = true;
  }
  std::vector<StructureWarning> warnings;
  for (std::size_t p = 0; p < place_used.size(); ++p)
    if (!place_used[p])
      warnings.push_back({StructureWarning::Kind::isolated_place, p,
                          "place '" + net.label(PlaceId{p}) + "' has no arcs"});
  for (std::size_t t = 0; t < transition_used.size(); ++t)
    if (!transition_used[t])
      warnings.push_back({StructureWarning::Kind::isolated_transition, t,
                          "transition '" + net.label(TransitionId{t}) + "' has no inputs and no outputs"});
  return warnings;
}

std::string format_marking(const Net& net, const Marking& marking) {
  std::ostringstream out;
  out << '{';
  bool first = true;
  for (std::size_t p = 0; p < marking.size(); ++p) {
    if (marking[p] == 0) continue;
    if (!first) out << ", ";
    first = false;
    out << net.label(PlaceId{p});
    if (marking[p] > 1) out << 'x' << marking[p];
  }
  out << '}';
  return out.str();
}

} // namespace pnm
