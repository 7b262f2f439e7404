#pragma once

// Pattern Markov Chains: the chain of automaton states driven by the induced
// minterm stream, its maximum-likelihood estimate, first-passage (waiting
// time) distributions into the final states, and forecast intervals.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cef/algebra.hpp"
#include "cef/sfa.hpp"

namespace cef {

/// An order-m Markov source over minterm indices.
class MintermSource {
 public:
  /// i.i.d. source.
  explicit MintermSource(std::vector<double> probabilities);
  /// `table` has k^m rows (context encoded base k, oldest symbol most significant);
  /// `initial` is used while fewer than m symbols have been emitted.
  MintermSource(int order, std::size_t symbols, std::vector<double> table, std::vector<double> initial);

  /// Random rows drawn from a flat Dirichlet, reproducible from `seed`.
  static MintermSource random(int order, std::size_t symbols, std::uint64_t seed);

  int order() const noexcept { return order_; }
  std::size_t symbols() const noexcept { return symbols_; }
  /// P(next = symbol | context); contexts shorter than the order use the initial row.
  double probability(std::span<const std::uint32_t> context, std::size_t symbol) const;
  std::span<const double> row(std::span<const std::uint32_t> context) const;

 private:
  int order_;
  std::size_t symbols_;
  std::vector<double> table_;
  std::vector<double> initial_;
};

/// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
/// Inverse-CDF draw from a probability row.
std::size_t sampleIndex(std::span<const double> probs, std::mt19937_64& rng);

class PatternMarkovChain {
 public:
  PatternMarkovChain() = default;
  PatternMarkovChain(std::vector<double> matrix, std::vector<std::uint64_t> counts, std::vector<bool> finals,
                     StateId initial);

  std::size_t size() const noexcept { return finals_.size(); }
  StateId initial() const noexcept { return initial_; }
  double at(std::size_t i, std::size_t j) const { return matrix_[i * size() + j]; }
  std::uint64_t count(std::size_t i, std::size_t j) const { return counts_[i * size() + j]; }
  std::span<const double> row(std::size_t i) const { return {matrix_.data() + i * size(), size()}; }
  bool isFinal(std::size_t i) const { return finals_[i]; }
  const std::vector<bool>& finals() const noexcept { return finals_; }
  /// Row index i corresponds to automaton state i.
  StateId stateOf(std::size_t row) const { return static_cast<StateId>(row); }

  /// Non-final rows with no observed transitions (filled by the fallback).
  std::vector<std::size_t> unvisited;

 private:
  std::vector<double> matrix_;
  std::vector<std::uint64_t> counts_;
  std::vector<bool> finals_;
  StateId initial_ = 0;
};

struct LearnOptions {
  bool perPartition = true;
  /// Restart the run at the initial state after each detection.
  bool resetOnDetection = true;
  /// Add-one smoothing over structural successors.
  bool laplace = false;
};

/// Maximum-likelihood estimate from a replay of the training stream.
/// Final rows are made absorbing; unvisited rows are uniform over structural successors.
PatternMarkovChain learnMatrix(const SymbolicDfa& dfa, std::span<const Event> training,
                               const LearnOptions& options = {});
/// Same estimate from per-partition minterm sequences.
PatternMarkovChain learnMatrix(const SymbolicDfa& dfa, std::span<const Word> sequences,
                               const LearnOptions& options = {});
/// The chain induced by a known source: Π(p, q) = Σ_{t: δ(p,t)=q} P(t | history(p)).
/// States without a full-length history use the source's initial row.
PatternMarkovChain analyticChain(const DisambiguatedDfa& dfa, const MintermSource& source);

struct WaitingTimeDistribution {
  std::size_t state = 0;
  std::size_t horizon = 0;
  std::vector<double> probs;  // probs[n-1] = P(W = n), n = 1..horizon
  double tailMass = 0.0;
};

/// Sparse absorbing block form: N over non-final states plus the one-step
/// completion mass (I - N)1 computed as row sums of C.
class AbsorbingForm {
 public:
  explicit AbsorbingForm(const PatternMarkovChain& pmc);

  std::size_t transientCount() const noexcept { return transient_.size(); }
  /// Position of a chain row among the non-final rows, if non-final.
  std::optional<std::size_t> positionOf(std::size_t row) const;

  /// P(W = n) for n = 1..horizon from an initial distribution over non-final positions.
  std::vector<double> firstPassage(std::vector<double> xi, std::size_t horizon) const;
  /// Smallest n with cumulative mass >= target (capped); 0 if never reached within cap.
  std::size_t horizonFor(std::size_t row, double target, std::size_t cap) const;

 private:
  std::vector<std::size_t> transient_;
  std::vector<std::int64_t> position_;
  std::vector<std::vector<std::pair<std::size_t, double>>> rows_;
  std::vector<double> completion_;
};

/// Throws FinalStateQuery for a final state.
WaitingTimeDistribution waitingTimeDistribution(const PatternMarkovChain& pmc, std::size_t state,
                                                std::size_t horizon);
/// General initial distribution over all chain rows; mass on final rows is ignored.
WaitingTimeDistribution waitingTimeDistribution(const PatternMarkovChain& pmc, std::span<const double> xiInit,
                                                std::size_t horizon);

struct Forecast {
  std::size_t state = 0;
  int start = 1;
  int end = 1;
  double probability = 0.0;
};

/// Shortest [start, end] with mass >= theta; ties go to higher mass, then smaller start.
/// Throws HorizonTooShort when the total mass is below theta.
Forecast forecastInterval(std::span<const double> probs, double theta);
Forecast forecastInterval(const WaitingTimeDistribution& dist, double theta);

inline constexpr std::size_t kMaxHorizon = 5000;

/// Smallest n with cumulative mass >= max(theta, 0.999), capped at kMaxHorizon.
std::size_t defaultHorizon(const PatternMarkovChain& pmc, std::size_t state, double theta);

struct ForecastTable {
  double theta = 0.5;
  std::vector<std::optional<Forecast>> byState;
  /// States whose mass within the horizon stayed below theta (only when allowPartial).
  std::vector<std::size_t> failures;

  const Forecast* find(StateId q) const {
    return q < byState.size() && byState[q] ? &*byState[q] : nullptr;
  }
  std::size_t size() const;
};

/// One forecast per non-final state reachable from the initial state. `horizon`
/// of 0 selects defaultHorizon per state. Throws HorizonTooShort listing all
/// failing states unless `allowPartial`.
ForecastTable buildForecastTable(const PatternMarkovChain& pmc, double theta, std::size_t horizon = 0,
                                 bool allowPartial = false);

/// JSON with state index, dense matrix rows, counts and finals. Doubles use
/// shortest round-trip decimal, so import(export(x)) is bit-exact.
std::string exportPmc(const PatternMarkovChain& pmc);
PatternMarkovChain importPmc(const std::string& json);

}  // namespace cef
