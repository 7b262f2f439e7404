#include <cmath>

#include "cef/synthetic.hpp"
#include "doctest.h"

using namespace cef;

namespace {

// Minterm 0: v in [0, 0.5); minterm 1: v outside.
std::shared_ptr<const MintermSet> halfBand() {
  auto atom = genericRegistry().make("Between", "x", {Constant::identifier("v"), Constant::number(0),
                                                       Constant::number(0.5)});
  return std::make_shared<const MintermSet>(std::vector<PredicateAtom>{atom}, SatOracle{});
}

AttributeEmitter emitter() { return AttributeEmitter(halfBand(), uniformSampler({{"v", 0.0, 1.0}})); }

}  // namespace

TEST_CASE("i.i.d. source: empirical frequency within 0.01") {
  const auto em = emitter();
  const auto ev = generateSyntheticStream(MintermSource({0.7, 0.3}), em, 100000, {"p"}, 3);
  REQUIRE(ev.size() == 100000);
  std::size_t a = 0;
  for (const auto& e : ev) a += em.minterms().classify(e) == 0;
  CHECK(std::fabs(static_cast<double>(a) / 1e5 - 0.7) <= 0.01);
}

TEST_CASE("empty stream") {
  CHECK(generateSyntheticStream(MintermSource({0.5, 0.5}), emitter(), 0, {"p"}, 1).empty());
}

TEST_CASE("order-1 source: conditional frequency within 0.02") {
  const auto em = emitter();
  const MintermSource src(1, 2, {0.9, 0.1, 0.3, 0.7}, {0.5, 0.5});
  const auto ev = generateSyntheticStream(src, em, 100000, partitionKeys(3), 4);
  std::map<std::string, std::size_t> last;
  double aa = 0, a = 0;
  for (const auto& e : ev) {
    const auto m = em.minterms().classify(e);
    if (auto it = last.find(e.partition); it != last.end() && it->second == 0) {
      ++a;
      aa += m == 0;
    }
    last[e.partition] = m;
  }
  CHECK(std::fabs(aa / a - 0.9) <= 0.02);
}

TEST_CASE("deterministic under a fixed seed, sensitive to it") {
  const auto em = emitter();
  const auto src = MintermSource::random(1, 2, 5);
  const auto x = generateSyntheticStream(src, em, 500, partitionKeys(4), 8);
  const auto y = generateSyntheticStream(src, em, 500, partitionKeys(4), 8);
  const auto z = generateSyntheticStream(src, em, 500, partitionKeys(4), 9);
  auto same = [](const std::vector<Event>& p, const std::vector<Event>& q) {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (p[i].partition != q[i].partition || p[i].number("v") != q[i].number("v")) return false;
    return p.size() == q.size();
  };
  CHECK(same(x, y));
  CHECK_FALSE(same(x, z));
  CHECK(x[7].timestamp == 7);
}

TEST_CASE("uninvertible minterms are reported") {
  // v in [0, 0.5) can never hold when v is drawn from [2, 3).
  AttributeEmitter em(halfBand(), uniformSampler({{"v", 2.0, 3.0}}), 4, 1000);
  CHECK_FALSE(em.invertible(0));
  CHECK(em.invertible(1));
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(em.emit(0, "p", 0, rng), UninvertibleMinterm);
  CHECK_THROWS_AS(generateSyntheticStream(MintermSource({1.0, 0.0}), em, 5, {"p"}, 1), UninvertibleMinterm);
}

TEST_CASE("partition keys") {
  CHECK(partitionKeys(3) == std::vector<std::string>{"vessel-000", "vessel-001", "vessel-002"});
}

TEST_CASE("streams generated from a chain follow its transitions") {
  auto ms = halfBand();
  auto atom = ms->predicates()[0];
  // Σ*·x·x over {a, b}: states 0, 1, 2 (final).
  const auto dfa = determinize(compileSnfa(parsePattern(
      "x · x WHERE Between(x, v, 0, 0.5)", genericRegistry())));
  std::vector<double> P(dfa.stateCount() * dfa.stateCount(), 0.0);
  std::vector<bool> finals;
  for (std::size_t q = 0; q < dfa.stateCount(); ++q) {
    finals.push_back(dfa.isFinal(static_cast<StateId>(q)));
    for (std::size_t t = 0; t < 2; ++t) P[q * dfa.stateCount() + dfa.next(static_cast<StateId>(q), t)] += finals.back() ? 0.0 : 0.5;
    if (finals.back()) P[q * dfa.stateCount() + q] = 1.0;
  }
  const PatternMarkovChain pmc(P, std::vector<std::uint64_t>(P.size(), 0), finals, dfa.initial());
  const AttributeEmitter em(ms, uniformSampler({{"v", 0.0, 1.0}}));
  const auto ev = generateFromChain(pmc, dfa, em, 20000, partitionKeys(2), 1);
  std::size_t a = 0;
  for (const auto& e : ev) a += ms->classify(e) == 0;
  CHECK(std::fabs(static_cast<double>(a) / 20000.0 - 0.5) < 0.02);
}
