#pragma once

// Synthetic streams. A Markov source (or a learned chain) picks the minterm of
// every event; an AttributeEmitter turns that minterm back into concrete
// attribute values that satisfy exactly that minterm.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cef/algebra.hpp"
#include "cef/geo.hpp"
#include "cef/pmc.hpp"
#include "cef/sfa.hpp"

namespace cef {

/// Draws an event with random attributes; partition and timestamp are set by the caller.
using AttributeSampler = std::function<Event(std::mt19937_64&)>;

struct UniformAttribute {
  std::string name;
  double lo;
  double hi;
};

/// Independent uniform draws for each listed attribute.
AttributeSampler uniformSampler(std::vector<UniformAttribute> attributes);

/// AIS-like positions around the named points and regions of `ctx`, with
/// speed in [0, 30) knots and a heading that is often aimed at a landmark.
AttributeSampler aisSampler(const geo::GeoContext& ctx, double marginKm = 15.0);

/// Inverts minterms by rejection sampling: a pool of witness events per
/// minterm is collected up front; events whose truth also depends on the
/// partition key are re-checked (and re-drawn) for the target partition.
class AttributeEmitter {
 public:
  AttributeEmitter(std::shared_ptr<const MintermSet> minterms, AttributeSampler sampler,
                   std::size_t poolSize = 16, std::size_t maxDraws = 400'000, std::uint64_t seed = 0x5eed);

  bool invertible(std::size_t minterm) const { return !pools_[minterm].empty(); }
  /// Throws UninvertibleMinterm when no witness is known or none fits the partition.
  Event emit(std::size_t minterm, const std::string& partition, std::int64_t timestamp,
             std::mt19937_64& rng) const;

  const MintermSet& minterms() const { return *minterms_; }

 private:
  std::shared_ptr<const MintermSet> minterms_;
  AttributeSampler sampler_;
  std::size_t maxDraws_;
  std::vector<std::vector<Event>> pools_;
};

/// `count` keys `prefix000`, `prefix001`, ...
std::vector<std::string> partitionKeys(std::size_t count, const std::string& prefix = "vessel-");

/// Events drawn from an order-m source; each event goes to a uniformly chosen
/// partition and each partition keeps its own source context. Deterministic in `seed`.
std::vector<Event> generateSyntheticStream(const MintermSource& source, const AttributeEmitter& emitter,
                                           std::size_t n, const std::vector<std::string>& partitions,
                                           std::uint64_t seed);

/// Events whose automaton runs follow the chain itself: from state q the next
/// state is drawn from row q, then a minterm leading there is chosen uniformly.
/// Runs restart at the initial state after a final state, as the engine does.
std::vector<Event> generateFromChain(const PatternMarkovChain& pmc, const SymbolicDfa& dfa,
                                     const AttributeEmitter& emitter, std::size_t n,
                                     const std::vector<std::string>& partitions, std::uint64_t seed);

}  // namespace cef
