#pragma once

// Pattern DSL:
//
//   pattern  := regex "WHERE" formula ["PARTITION" "BY" ident] [config]
//   regex    := concat ("|" concat)*                 lowest precedence
//   concat   := postfix (("·" | ";") postfix)*
//   postfix  := primary ("*" | "+")*                  highest precedence
//   primary  := var | Pred "(" var ("," const)* ")" | "(" regex ")"
//   formula  := disjunction with AND/∧, OR/∨, NOT/¬, parentheses, True(v)
//   config   := "[config]" line followed by `key = value` lines
//               (order, theta, horizon, extras = [Atom(v, ...), ...])
//
// `#` starts a comment. The WHERE formula is split on its top-level
// conjunctions and each conjunct must mention exactly one variable; the
// conjuncts of a variable form its binding.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cef/algebra.hpp"

namespace cef {

struct PatternNode {
  enum class Kind { Leaf, Concat, Union, Star, Plus };

  Kind kind = Kind::Leaf;
  std::string var;
  std::vector<PatternNode> children;

  static PatternNode leaf(std::string var) { return {Kind::Leaf, std::move(var), {}}; }
  static PatternNode concat(std::vector<PatternNode> c) { return {Kind::Concat, {}, std::move(c)}; }
  static PatternNode alternation(std::vector<PatternNode> c) { return {Kind::Union, {}, std::move(c)}; }
  static PatternNode star(PatternNode c) { return {Kind::Star, {}, {std::move(c)}}; }
  static PatternNode plus(PatternNode c) { return {Kind::Plus, {}, {std::move(c)}}; }

  bool operator==(const PatternNode&) const = default;
};

/// Rewrites every Plus(x) into Concat(x, Star(x)) and flattens nested Concat/Union.
PatternNode desugar(const PatternNode& node);
std::string toString(const PatternNode& node);

struct PatternSpec {
  PatternNode ast;
  /// Variable bindings in order of first appearance in the regular part.
  std::vector<std::pair<std::string, Formula>> bindings;
  std::string partitionAttribute = "partitionKey";
  std::vector<PredicateAtom> extras;
  int order = 0;
  double theta = 0.5;
  std::optional<int> horizon;

  const Formula& binding(std::string_view var) const;
  /// Distinct atoms of all bindings in order of appearance.
  std::vector<PredicateAtom> patternAtoms() const;
  /// Pattern atoms followed by extra features: the minterm predicate set.
  std::vector<PredicateAtom> alphabetAtoms() const;
};

PatternSpec parsePattern(std::string_view text, const PredicateRegistry& registry);
PatternSpec loadPattern(const std::string& path, const PredicateRegistry& registry);
/// Parses a bracketed or comma-separated atom list such as `[SpeedBetween(x,0,10)]`.
std::vector<PredicateAtom> parseAtomList(std::string_view text, const PredicateRegistry& registry);

/// Canonical text that parses back to a structurally identical spec.
std::string toString(const PatternSpec& spec);

}  // namespace cef
