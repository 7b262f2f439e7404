#pragma once

// Symbolic automata over a shared minterm alphabet: Thompson construction of
// Σ*·R, subset-construction determinization, m-unambiguous disambiguation and
// the per-event step used by the streaming runtime.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cef/algebra.hpp"
#include "cef/pattern.hpp"

namespace cef {

using StateId = std::uint32_t;
/// A word over minterm indices, oldest symbol first.
using Word = std::vector<std::uint32_t>;

struct SymbolicNfa {
  struct Transition {
    StateId from;
    std::optional<std::uint32_t> guard;  // minterm index; empty = epsilon
    StateId to;
  };

  std::shared_ptr<const MintermSet> alphabet;
  std::size_t stateCount = 0;
  StateId initial = 0;
  std::vector<StateId> finals;
  std::vector<Transition> transitions;

  /// Subset-simulation acceptance of a minterm word (reference semantics).
  bool accepts(const Word& word) const;
};

class SymbolicDfa {
 public:
  SymbolicDfa() = default;
  SymbolicDfa(std::shared_ptr<const MintermSet> alphabet, std::size_t states, StateId initial,
              std::vector<bool> finals, std::vector<StateId> delta);

  const MintermSet& alphabet() const noexcept { return *alphabet_; }
  std::shared_ptr<const MintermSet> alphabetPtr() const noexcept { return alphabet_; }
  std::size_t stateCount() const noexcept { return states_; }
  std::size_t symbolCount() const noexcept { return symbols_; }
  StateId initial() const noexcept { return initial_; }
  bool isFinal(StateId q) const { return finals_[q]; }
  std::vector<StateId> finals() const;

  StateId next(StateId q, std::size_t minterm) const { return delta_[q * symbols_ + minterm]; }
  /// Follows a whole word from `q`.
  StateId run(StateId q, const Word& word) const;
  bool accepts(const Word& word) const { return isFinal(run(initial_, word)); }

  /// Classifies the event and follows the transition; `second` is true on a final state.
  std::pair<StateId, bool> step(StateId q, const Event& event) const {
    const StateId n = next(q, alphabet_->classify(event));
    return {n, finals_[n]};
  }

  /// Distinct successor states of q.
  std::vector<StateId> successors(StateId q) const;

  bool operator==(const SymbolicDfa& other) const;

 private:
  std::shared_ptr<const MintermSet> alphabet_;
  std::size_t states_ = 0;
  std::size_t symbols_ = 0;
  StateId initial_ = 0;
  std::vector<bool> finals_;
  std::vector<StateId> delta_;  // states_ x symbols_
};

/// A DFA whose states remember the last `order` minterms read.
struct DisambiguatedDfa {
  SymbolicDfa dfa;
  int order = 0;
  /// Unique length-`order` word leading to each state; empty optional for states
  /// reachable only in fewer than `order` steps. Empty vector when order == 0.
  std::vector<std::optional<Word>> history;
};

/// Σ*·R over the minterms of the pattern atoms and extra features.
SymbolicNfa compileSnfa(const PatternSpec& spec, SatOracle oracle = {});
/// Thompson construction over an existing alphabet; guards per variable.
SymbolicNfa compileSnfa(const PatternNode& ast,
                        const std::vector<std::pair<std::string, std::vector<std::size_t>>>& guards,
                        std::shared_ptr<const MintermSet> alphabet, bool streamPrefix = true);

SymbolicDfa determinize(const SymbolicNfa& nfa);

inline constexpr std::size_t kDefaultStateCap = 50'000;

/// Splits states until each remembers its last m minterms. Throws StateCapExceeded.
DisambiguatedDfa disambiguate(const SymbolicDfa& dfa, int m, std::size_t stateCap = kDefaultStateCap);

/// Sets of length-m words leading to each state (δ^{-m}), by dynamic programming over paths.
std::vector<std::vector<Word>> incomingWords(const SymbolicDfa& dfa, int m);

struct CompiledPattern {
  SymbolicDfa deterministic;
  DisambiguatedDfa disambiguated;
};

CompiledPattern compilePattern(const PatternSpec& spec, int order, SatOracle oracle = {},
                               std::size_t stateCap = kDefaultStateCap);

/// The relabelled automaton: minterm i becomes symbol "a{i+1}".
struct ClassicalDfa {
  std::vector<std::string> symbols;
  std::size_t stateCount = 0;
  StateId initial = 0;
  std::vector<bool> finals;
  std::vector<StateId> delta;

  StateId next(StateId q, std::size_t symbol) const { return delta[q * symbols.size() + symbol]; }
};

ClassicalDfa relabelToClassical(const SymbolicDfa& dfa);

/// JSON dump: states, initial, finals, minterms, transition table (minterm index per column).
std::string exportAutomaton(const DisambiguatedDfa& dfa);

}  // namespace cef
