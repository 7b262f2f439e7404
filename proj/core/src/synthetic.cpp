#include "cef/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace cef {

AttributeSampler uniformSampler(std::vector<UniformAttribute> attributes) {
  return [attributes = std::move(attributes)](std::mt19937_64& rng) {
    Event e;
    for (const auto& a : attributes) e.set(a.name, a.lo + (a.hi - a.lo) * uniform01(rng));
    return e;
  };
}

AttributeSampler aisSampler(const geo::GeoContext& ctx, double marginKm) {
  std::vector<geo::GeoPoint> anchors;
  for (const auto& [name, p] : ctx.points) anchors.push_back(p);
  for (const auto& [name, r] : ctx.regions) anchors.push_back(r.anchor());
  if (anchors.empty()) anchors.push_back({0.0, 0.0});

  return [anchors, marginKm](std::mt19937_64& rng) {
    const auto& anchor = anchors[static_cast<std::size_t>(uniform01(rng) * anchors.size())];
    // Uniform over a disc of radius marginKm around the anchor.
    const double r = marginKm * std::sqrt(uniform01(rng));
    const double a = 2.0 * std::numbers::pi * uniform01(rng);
    const double dLat = r * std::sin(a) / 111.195;
    const double dLon = r * std::cos(a) / (111.195 * std::max(0.05, std::cos(anchor.lat * std::numbers::pi / 180.0)));
    const geo::GeoPoint p{anchor.lon + dLon, anchor.lat + dLat};

    double heading = 360.0 * uniform01(rng);
    if (uniform01(rng) < 0.4) {
      const auto& target = anchors[static_cast<std::size_t>(uniform01(rng) * anchors.size())];
      heading = std::fmod(geo::bearingDeg(p, target) + 40.0 * (uniform01(rng) - 0.5) + 360.0, 360.0);
    }
    Event e;
    e.set("lon", p.lon);
    e.set("lat", p.lat);
    e.set("speed", 30.0 * uniform01(rng));
    e.set("heading", heading);
    return e;
  };
}

AttributeEmitter::AttributeEmitter(std::shared_ptr<const MintermSet> minterms, AttributeSampler sampler,
                                   std::size_t poolSize, std::size_t maxDraws, std::uint64_t seed)
    : minterms_(std::move(minterms)), sampler_(std::move(sampler)), maxDraws_(maxDraws) {
  pools_.resize(minterms_->size());
  std::mt19937_64 rng(seed);
  std::size_t open = pools_.size();
  for (std::size_t draw = 0; draw < maxDraws && open > 0; ++draw) {
    Event e = sampler_(rng);
    const std::size_t m = minterms_->classify(e);
    if (pools_[m].size() < poolSize) {
      pools_[m].push_back(std::move(e));
      if (pools_[m].size() == poolSize) --open;
    }
  }
}

Event AttributeEmitter::emit(std::size_t minterm, const std::string& partition, std::int64_t timestamp,
                             std::mt19937_64& rng) const {
  const auto& pool = pools_.at(minterm);
  if (pool.empty()) throw UninvertibleMinterm(minterms_->describe(minterm));
  Event e = pool[static_cast<std::size_t>(uniform01(rng) * pool.size())];
  e.partition = partition;
  e.timestamp = timestamp;
  if (minterms_->classify(e) == minterm) return e;

  // The witness's truth depends on the partition; search again with it fixed.
  for (std::size_t draw = 0; draw < maxDraws_ / 10; ++draw) {
    Event c = sampler_(rng);
    c.partition = partition;
    c.timestamp = timestamp;
    if (minterms_->classify(c) == minterm) return c;
  }
  throw UninvertibleMinterm(minterms_->describe(minterm) + " in partition " + partition);
}

std::vector<std::string> partitionKeys(std::size_t count, const std::string& prefix) {
  std::vector<std::string> keys;
  keys.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%03zu", i);
    keys.push_back(prefix + buf);
  }
  return keys;
}

namespace {

std::size_t pickPartition(std::size_t count, std::mt19937_64& rng) {
  return count == 1 ? 0 : std::min(count - 1, static_cast<std::size_t>(uniform01(rng) * count));
}

}  // namespace

std::vector<Event> generateSyntheticStream(const MintermSource& source, const AttributeEmitter& emitter,
                                           std::size_t n, const std::vector<std::string>& partitions,
                                           std::uint64_t seed) {
  if (source.symbols() != emitter.minterms().size())
    throw DataError("source alphabet does not match the minterm set");
  if (partitions.empty() && n > 0) throw DataError("at least one partition is required");
  std::mt19937_64 rng(seed);
  std::vector<Word> contexts(partitions.size());
  const auto order = static_cast<std::size_t>(source.order());
  std::vector<Event> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = pickPartition(partitions.size(), rng);
    Word& ctx = contexts[p];
    const std::size_t symbol = sampleIndex(source.row(ctx), rng);
    if (order > 0) {
      ctx.push_back(static_cast<std::uint32_t>(symbol));
      if (ctx.size() > order) ctx.erase(ctx.begin());
    }
    out.push_back(emitter.emit(symbol, partitions[p], static_cast<std::int64_t>(i), rng));
  }
  return out;
}

std::vector<Event> generateFromChain(const PatternMarkovChain& pmc, const SymbolicDfa& dfa,
                                     const AttributeEmitter& emitter, std::size_t n,
                                     const std::vector<std::string>& partitions, std::uint64_t seed) {
  if (pmc.size() != dfa.stateCount()) throw DataError("chain and automaton sizes differ");
  if (partitions.empty() && n > 0) throw DataError("at least one partition is required");
  std::mt19937_64 rng(seed);
  std::vector<StateId> state(partitions.size(), dfa.initial());
  std::vector<std::uint32_t> choices;
  std::vector<Event> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t p = pickPartition(partitions.size(), rng);
    const StateId q = state[p];
    const auto next = static_cast<StateId>(sampleIndex(pmc.row(q), rng));
    choices.clear();
    for (std::size_t t = 0; t < dfa.symbolCount(); ++t)
      if (dfa.next(q, t) == next && emitter.invertible(t)) choices.push_back(static_cast<std::uint32_t>(t));
    if (choices.empty())
      throw UninvertibleMinterm("for transition " + std::to_string(q) + " -> " + std::to_string(next));
    const std::size_t symbol = choices[static_cast<std::size_t>(uniform01(rng) * choices.size())];
    out.push_back(emitter.emit(symbol, partitions[p], static_cast<std::int64_t>(i), rng));
    state[p] = dfa.isFinal(next) ? dfa.initial() : next;
  }
  return out;
}

}  // namespace cef
