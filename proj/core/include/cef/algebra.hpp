#pragma once

// Events, unary predicates over events and their minterms: the effective
// Boolean algebra that guards symbolic automaton transitions.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cef/errors.hpp"

namespace cef {

using Value = std::variant<double, std::string, bool>;

/// One stream element: a timestamped tuple of attributes belonging to a partition.
class Event {
 public:
  using Attribute = std::pair<std::string, Value>;

  Event() = default;
  Event(std::int64_t timestamp, std::string partition)
      : timestamp(timestamp), partition(std::move(partition)) {}

  std::int64_t timestamp = 0;
  std::string partition;

  /// Inserts or overwrites an attribute.
  void set(std::string_view name, Value value);
  const Value* find(std::string_view name) const noexcept;
  /// Throws MissingAttribute when absent.
  const Value& at(std::string_view name) const;
  /// Numeric view of an attribute; booleans read as 0/1, strings are an error.
  double number(std::string_view name) const;

  std::span<const Attribute> attributes() const noexcept { return attrs_; }

 private:
  // Few attributes per event; a flat vector beats a node-based map here.
  std::vector<Attribute> attrs_;
};

/// A constant argument of a predicate: number, identifier, quoted string or (x, y) pair.
struct Constant {
  enum class Kind { Number, Identifier, String, Pair };

  Kind kind = Kind::Number;
  double x = 0.0;
  double y = 0.0;
  std::string text;

  static Constant number(double v) { return {Kind::Number, v, 0.0, {}}; }
  static Constant identifier(std::string s) { return {Kind::Identifier, 0.0, 0.0, std::move(s)}; }
  static Constant string(std::string s) { return {Kind::String, 0.0, 0.0, std::move(s)}; }
  static Constant pair(double a, double b) { return {Kind::Pair, a, b, {}}; }

  std::string canonical() const;
  bool operator==(const Constant&) const = default;
};

/// Half-open interval [lo, hi) over a scalar quantity identified by `key`.
/// Two atoms with the same key constrain the same quantity of an event.
struct Band {
  std::string key;
  double lo;
  double hi;
};

class AtomEvaluator {
 public:
  virtual ~AtomEvaluator() = default;
  virtual bool evaluate(const Event& event) const = 0;
  /// Present when the atom is a single-quantity band test; enables interval pruning.
  virtual std::optional<Band> band() const { return std::nullopt; }
};

/// A unary predicate applied to an event variable with constant arguments.
struct PredicateAtom {
  std::string name;
  std::string var;
  std::vector<Constant> args;
  std::shared_ptr<const AtomEvaluator> evaluator;

  /// Identity of the atom: name and constant arguments, not the variable.
  std::string key() const;
  /// Source form, e.g. `SpeedBetween(x, 1, 9)`.
  std::string toString() const;
  bool evaluate(const Event& event) const { return evaluator->evaluate(event); }
};

/// Boolean formula over predicate atoms.
class Formula {
 public:
  enum class Kind { Constant, Atom, Not, And, Or };

  static Formula constant(bool value, std::string var = {});
  static Formula atom(PredicateAtom atom);
  static Formula negate(Formula child);
  static Formula conjunction(std::vector<Formula> children);
  static Formula disjunction(std::vector<Formula> children);

  Kind kind() const noexcept { return kind_; }
  bool constantValue() const noexcept { return value_; }
  const PredicateAtom& atom() const { return *atom_; }
  std::span<const Formula> children() const noexcept { return children_; }

  bool evaluate(const Event& event) const;

  /// Evaluates with atom truth values supplied by `truth(atom)`.
  template <class Truth>
  bool evaluateWith(const Truth& truth) const {
    switch (kind_) {
      case Kind::Constant:
        return value_;
      case Kind::Atom:
        return truth(*atom_);
      case Kind::Not:
        return !children_.front().evaluateWith(truth);
      case Kind::And:
        for (const auto& c : children_)
          if (!c.evaluateWith(truth)) return false;
        return true;
      case Kind::Or:
        for (const auto& c : children_)
          if (c.evaluateWith(truth)) return true;
        return false;
    }
    return false;
  }

  /// Appends atoms not already present (by key), in order of first appearance.
  void collectAtoms(std::vector<PredicateAtom>& out) const;
  /// Event variables mentioned by the formula.
  std::vector<std::string> variables() const;
  std::string toString() const;

 private:
  Kind kind_ = Kind::Constant;
  bool value_ = true;
  std::string var_;
  std::shared_ptr<const PredicateAtom> atom_;
  std::vector<Formula> children_;
};

enum class SatStrategy { AssumeAllSatisfiable, IntervalPruning };

/// Decides which sign combinations may be dropped. Sound: never drops a
/// satisfiable combination. Interval pruning only reasons about band atoms.
struct SatOracle {
  SatStrategy strategy = SatStrategy::AssumeAllSatisfiable;

  /// `positive` bit i set means predicate i appears positively.
  bool satisfiable(std::span<const PredicateAtom> predicates, std::uint64_t positive) const;
};

struct Minterm {
  std::uint64_t positive = 0;
  bool operator==(const Minterm&) const = default;
};

/// The satisfiable minterms over an ordered predicate set, in canonical order:
/// index c of the binary counter has predicate j negated iff bit (k-1-j) of c is set,
/// so the all-positive combination comes first.
class MintermSet {
 public:
  static constexpr std::size_t kMaxPredicates = 20;

  MintermSet() : MintermSet(std::vector<PredicateAtom>{}, SatOracle{}) {}
  MintermSet(std::vector<PredicateAtom> predicates, SatOracle oracle);

  std::size_t size() const noexcept { return minterms_.size(); }
  std::span<const PredicateAtom> predicates() const noexcept { return predicates_; }
  std::span<const Minterm> minterms() const noexcept { return minterms_; }
  const Minterm& operator[](std::size_t i) const { return minterms_[i]; }

  bool holds(std::size_t minterm, std::size_t predicate) const {
    return (minterms_[minterm].positive >> predicate) & 1U;
  }

  /// Index of the unique minterm satisfied by the event.
  std::size_t classify(const Event& event) const;
  /// Minterm index for a truth vector (bit i = predicate i), if not pruned.
  std::optional<std::size_t> indexOf(std::uint64_t truth) const;

  /// Minterms whose conjunction implies `formula`. Atoms of the formula must be
  /// among the predicates (matched by key).
  std::vector<std::size_t> satisfying(const Formula& formula) const;

  Formula formula(std::size_t minterm) const;
  std::string describe(std::size_t minterm) const;

 private:
  std::vector<PredicateAtom> predicates_;
  std::vector<Minterm> minterms_;
  std::vector<std::int32_t> lookup_;  // truth vector -> minterm index or -1
};

std::vector<Minterm> computeMinterms(std::span<const PredicateAtom> predicates, SatOracle oracle);
Minterm classify(const Event& event, const MintermSet& minterms);
bool evaluate(const Formula& formula, const Event& event);

/// Maps predicate names to evaluator constructors.
class PredicateRegistry {
 public:
  using Factory =
      std::function<std::shared_ptr<const AtomEvaluator>(std::span<const Constant> args)>;

  void add(std::string name, Factory factory);
  bool contains(std::string_view name) const;
  /// Throws UnknownPredicate, or DataError on bad arguments.
  PredicateAtom make(std::string name, std::string var, std::vector<Constant> args) const;

 private:
  std::map<std::string, Factory, std::less<>> factories_;
};

/// Attribute-generic predicates: `Between(x, attr, lo, hi)` (half-open band)
/// and `Equals(x, attr, value)`.
PredicateRegistry genericRegistry();

}  // namespace cef
