#include <random>

#include "cef/geo.hpp"
#include "cef/pattern.hpp"
#include "cef/sfa.hpp"
#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"

using namespace cef;

namespace {

const char* kAbbb = "x · y · y · y WHERE Equals(x, type, a) AND NOT Equals(y, type, a)";

PatternSpec parse(const char* text) { return parsePattern(text, geo::builtinRegistry()); }

Event typed(const char* t, std::int64_t ts = 0) {
  Event e(ts, "p");
  e.set("type", std::string(t));
  return e;
}

// Truth of a binding under a minterm, from the minterm's sign bits alone.
std::function<bool(const std::string&, std::uint32_t)> guardOf(const PatternSpec& spec, const MintermSet& ms) {
  return [&spec, &ms](const std::string& var, std::uint32_t t) {
    return spec.binding(var).evaluateWith([&](const PredicateAtom& a) {
      const auto preds = ms.predicates();
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (preds[i].key() == a.key()) return ms.holds(t, i);
      FAIL("atom missing from alphabet");
      return false;
    });
  };
}

std::shared_ptr<const MintermSet> oneBit() {
  auto atom = genericRegistry().make("Equals", "x", {Constant::identifier("type"), Constant::identifier("a")});
  return std::make_shared<const MintermSet>(std::vector<PredicateAtom>{atom}, SatOracle{});
}

SymbolicDfa randomDfa(std::mt19937_64& rng, std::size_t states, std::shared_ptr<const MintermSet> alphabet) {
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(states - 1));
  std::vector<bool> finals(states);
  std::vector<StateId> delta;
  for (std::size_t q = 0; q < states; ++q) {
    finals[q] = rng() % 3 == 0;
    for (std::size_t t = 0; t < alphabet->size(); ++t) delta.push_back(pick(rng));
  }
  return SymbolicDfa(alphabet, states, 0, finals, delta);
}

}  // namespace

TEST_CASE("a·b·b·b: five states, final 4, delta(1,a)=1, delta(1,b)=2") {
  const auto spec = parse(kAbbb);
  const auto nfa = compileSnfa(spec);
  CHECK(nfa.alphabet->size() == 2);
  const auto dfa = determinize(nfa);
  REQUIRE(dfa.stateCount() == 5);
  CHECK(dfa.finals() == std::vector<StateId>{4});
  const std::size_t a = 0, b = 1;  // all-positive minterm first
  CHECK(dfa.alphabet().holds(a, 0));
  CHECK(dfa.next(1, a) == 1);
  CHECK(dfa.next(1, b) == 2);
  CHECK(dfa.next(0, a) == 1);
  CHECK(dfa.next(0, b) == 0);
  CHECK(dfa.next(2, b) == 3);
  CHECK(dfa.next(3, b) == 4);
}

TEST_CASE("single vacuous leaf: two states, accepts after any event") {
  const auto dfa = determinize(compileSnfa(parse("x WHERE True(x)")));
  CHECK(dfa.stateCount() == 2);
  CHECK(dfa.symbolCount() == 1);
  CHECK_FALSE(dfa.accepts({}));
  CHECK(dfa.accepts({0}));
  CHECK(dfa.accepts({0, 0, 0}));
}

TEST_CASE("step: detection exactly at the fourth event of abbb") {
  const auto dfa = determinize(compileSnfa(parse(kAbbb)));
  auto r = dfa.step(3, typed("b"));
  CHECK(r.first == 4);
  CHECK(r.second);
  StateId q = dfa.initial();
  const char* stream[] = {"a", "b", "b", "b"};
  for (int i = 0; i < 4; ++i) {
    auto [n, hit] = dfa.step(q, typed(stream[i]));
    CHECK(hit == (i == 3));
    q = n;
  }
  Event missing(0, "p");
  CHECK_THROWS_AS(dfa.step(0, missing), MissingAttribute);
}

TEST_CASE("step: dead state absorbs") {
  auto ms = oneBit();
  // 0 -a-> 1 (final), 0 -b-> 2 (dead), 1 -> 2, 2 -> 2
  const SymbolicDfa dfa(ms, 3, 0, {false, true, false}, {1, 2, 2, 2, 2, 2});
  for (const char* t : {"a", "b"}) {
    auto [n, hit] = dfa.step(2, typed(t));
    CHECK(n == 2);
    CHECK_FALSE(hit);
  }
}

TEST_CASE("determinize: already deterministic automaton is preserved") {
  auto ms = oneBit();
  SymbolicNfa nfa;
  nfa.alphabet = ms;
  nfa.stateCount = 2;
  nfa.initial = 0;
  nfa.finals = {1};
  nfa.transitions = {{0, 0u, 1}, {0, 1u, 0}, {1, 0u, 1}, {1, 1u, 0}};
  const auto dfa = determinize(nfa);
  REQUIRE(dfa.stateCount() == 2);
  CHECK(dfa.next(0, 0) == 1);
  CHECK(dfa.next(0, 1) == 0);
  CHECK(dfa.next(1, 0) == 1);
  CHECK(dfa.next(1, 1) == 0);
  CHECK(dfa.isFinal(1));
  CHECK(determinize(nfa) == dfa);
}

TEST_CASE("determinize agrees with the NFA interpreter on every prefix of random streams") {
  for (const char* text :
       {kAbbb, "x · y+ · z WHERE Equals(x, k, 1) AND Equals(y, k, 2) AND NOT Equals(z, k, 1)",
        "(x | y)* · x · y WHERE Equals(x, a, 1) AND (Equals(y, b, 1) OR NOT Equals(y, a, 1))"}) {
    const auto spec = parse(text);
    const auto nfa = compileSnfa(spec);
    const auto dfa = determinize(nfa);
    const oracle::NfaInterpreter interp(nfa);
    std::mt19937_64 rng(42);
    for (int s = 0; s < 1000; ++s) {
      auto conf = interp.start();
      StateId q = dfa.initial();
      for (int i = 0; i < 50; ++i) {
        const auto t = static_cast<std::uint32_t>(rng() % dfa.symbolCount());
        conf = interp.step(conf, t);
        q = dfa.next(q, t);
        REQUIRE(interp.accepting(conf) == dfa.isFinal(q));
      }
    }
  }
}

TEST_CASE("approaching pattern: automaton matches the reference regex on induced strings") {
  geo::GeoContext ctx;
  ctx.points["PortCoords"] = {-4.49, 48.38};
  const auto spec = parsePattern(
      "x · y+ · z WHERE Distance(x, PortCoords, 7.0, 10.0) AND Distance(y, PortCoords, 5.0, 7.0) AND "
      "WithinCircle(z, PortCoords, 5.0)",
      geo::builtinRegistry(ctx));
  const auto nfa = compileSnfa(spec);
  CHECK(nfa.alphabet->size() <= 8);
  const auto dfa = determinize(nfa);
  const auto guard = guardOf(spec, *nfa.alphabet);
  const auto k = dfa.symbolCount();
  for (std::size_t n = 0; n <= 5; ++n)
    for (std::uint64_t i = 0; i < oracle::power(k, n); ++i) {
      const auto w = oracle::wordAt(i, n, k);
      REQUIRE(dfa.accepts(w) == oracle::suffixMatches(spec.ast, w, guard));
    }
  std::mt19937_64 rng(3);
  for (int s = 0; s < 3000; ++s) {
    oracle::Word w(8);
    for (auto& t : w) t = static_cast<std::uint32_t>(rng() % k);
    REQUIRE(dfa.accepts(w) == oracle::suffixMatches(spec.ast, w, guard));
  }
}

TEST_CASE("skip property: an accepted suffix is detected after any prefix") {
  const auto spec = parse(kAbbb);
  const auto dfa = determinize(compileSnfa(spec));
  std::mt19937_64 rng(5);
  for (int s = 0; s < 500; ++s) {
    oracle::Word w(rng() % 20);
    for (auto& t : w) t = static_cast<std::uint32_t>(rng() % 2);
    w.insert(w.end(), {0, 1, 1, 1});
    CHECK(dfa.accepts(w));
  }
}

TEST_CASE("Plus equals x·x* on all short strings") {
  const auto a = parse("x+ · y WHERE Equals(x, k, 1) AND Equals(y, k, 2)");
  const auto b = parse("x · x* · y WHERE Equals(x, k, 1) AND Equals(y, k, 2)");
  const auto da = determinize(compileSnfa(a));
  const auto db = determinize(compileSnfa(b));
  REQUIRE(da.symbolCount() == db.symbolCount());
  for (std::size_t n = 0; n <= 8; ++n)
    for (std::uint64_t i = 0; i < oracle::power(da.symbolCount(), n); ++i) {
      const auto w = oracle::wordAt(i, n, da.symbolCount());
      REQUIRE(da.accepts(w) == db.accepts(w));
    }
}

TEST_CASE("disambiguate: m = 0 is the identity") {
  const auto dfa = determinize(compileSnfa(parse(kAbbb)));
  const auto d = disambiguate(dfa, 0);
  CHECK(d.dfa == dfa);
  CHECK(d.history.empty());
}

TEST_CASE("disambiguate: abbb at m = 1 remembers the last symbol") {
  const auto dfa = determinize(compileSnfa(parse(kAbbb)));
  const auto d = disambiguate(dfa, 1);
  // Every state already has a single incoming symbol; two symbols split the a-state.
  CHECK(d.dfa.stateCount() == dfa.stateCount());
  CHECK(disambiguate(dfa, 2).dfa.stateCount() > dfa.stateCount());
  const auto t = oracle::tableOf(d.dfa);
  const auto preds = oracle::predecessorsByEnumeration(t, 1);
  for (std::size_t q = 0; q < t.states; ++q) {
    REQUIRE(preds[q].size() <= 1);
    if (preds[q].size() == 1) {
      REQUIRE(d.history[q].has_value());
      CHECK(*d.history[q] == *preds[q].begin());
    }
  }
  for (std::size_t n = 0; n <= 10; ++n)
    for (std::uint64_t i = 0; i < oracle::power(2, n); ++i) {
      const auto w = oracle::wordAt(i, n, 2);
      REQUIRE(d.dfa.accepts(w) == dfa.accepts(w));
    }
}

TEST_CASE("disambiguate: random 4-state automata at m = 2") {
  std::mt19937_64 rng(11);
  auto ms = oneBit();
  for (int c = 0; c < 50; ++c) {
    const auto dfa = randomDfa(rng, 4, ms);
    const auto d = disambiguate(dfa, 2);
    const auto t = oracle::tableOf(d.dfa);
    const auto preds = oracle::predecessorsByEnumeration(t, 2);
    for (std::size_t q = 0; q < t.states; ++q) {
      REQUIRE(preds[q].size() <= 1);
      if (preds[q].size() == 1) CHECK(d.history[q] == std::optional<Word>(*preds[q].begin()));
    }
    for (std::size_t n = 0; n <= 10; ++n)
      for (std::uint64_t i = 0; i < oracle::power(2, n); ++i) {
        const auto w = oracle::wordAt(i, n, 2);
        REQUIRE(d.dfa.accepts(w) == dfa.accepts(w));
      }
  }
}

TEST_CASE("disambiguate: state cap") {
  const auto dfa = determinize(compileSnfa(parse(kAbbb)));
  CHECK_THROWS_AS(disambiguate(dfa, 3, 6), StateCapExceeded);
  CHECK_THROWS_AS(disambiguate(dfa, -1), DataError);
}

TEST_CASE("incomingWords on abbb") {
  const auto dfa = determinize(compileSnfa(parse(kAbbb)));
  const auto w = incomingWords(dfa, 1);
  // State 1 is entered only by a; state 0 by b from 0 and 4.
  CHECK(w[1] == std::vector<Word>{{0}});
  CHECK(w[0] == std::vector<Word>{{1}});
}

TEST_CASE("relabel to classical symbols") {
  std::vector<PredicateAtom> atoms{
      genericRegistry().make("Equals", "x", {Constant::identifier("a"), Constant::number(1)}),
      genericRegistry().make("Equals", "x", {Constant::identifier("b"), Constant::number(1)})};
  auto ms = std::make_shared<const MintermSet>(atoms, SatOracle{});
  std::mt19937_64 rng(9);
  const auto dfa = randomDfa(rng, 5, ms);
  const auto c = relabelToClassical(dfa);
  CHECK(c.symbols == std::vector<std::string>{"a1", "a2", "a3", "a4"});
  CHECK(c.stateCount == dfa.stateCount());

  // Acceptance of induced event streams equals acceptance of the mapped symbol strings.
  for (int s = 0; s < 500; ++s) {
    StateId q = dfa.initial();
    StateId cq = c.initial;
    const auto len = rng() % 15;
    for (std::size_t i = 0; i < len; ++i) {
      Event e(static_cast<std::int64_t>(i), "p");
      e.set("a", static_cast<double>(rng() % 2));
      e.set("b", static_cast<double>(rng() % 2));
      q = dfa.step(q, e).first;
      const std::size_t mt = ms->classify(e);
      cq = c.next(cq, mt);
    }
    CHECK(dfa.isFinal(q) == c.finals[cq]);
  }

  const auto unary = relabelToClassical(determinize(compileSnfa(parse("x WHERE True(x)"))));
  CHECK(unary.symbols == std::vector<std::string>{"a1"});
}

TEST_CASE("automaton export") {
  const auto d = compilePattern(parse(kAbbb), 1);
  const auto j = nlohmann::json::parse(exportAutomaton(d.disambiguated));
  CHECK(j["states"] == d.disambiguated.dfa.stateCount());
  CHECK(j["delta"].size() == d.disambiguated.dfa.stateCount());
  CHECK(j["minterms"].size() == 2);
  CHECK(j["order"] == 1);
}

TEST_CASE("state count is non-decreasing in the order") {
  for (const char* text : {kAbbb, "x · y+ · z WHERE Equals(x, k, 1) AND Equals(y, k, 2) AND Equals(z, k, 3)"}) {
    const auto spec = parse(text);
    std::size_t prev = 0;
    for (int m = 0; m <= 3; ++m) {
      const auto n = compilePattern(spec, m).disambiguated.dfa.stateCount();
      CHECK(n >= prev);
      prev = n;
    }
  }
}

TEST_CASE("extras refine the alphabet without changing the language") {
  auto plain = parse(kAbbb);
  auto refined = parse(
      "x · y · y · y WHERE Equals(x, type, a) AND NOT Equals(y, type, a)\n[config]\nextras = [Between(x, v, 0, "
      "1)]\n");
  const auto d0 = determinize(compileSnfa(plain));
  const auto d1 = determinize(compileSnfa(refined));
  CHECK(d1.symbolCount() == 4);
  std::mt19937_64 rng(1);
  for (int s = 0; s < 300; ++s) {
    StateId q0 = d0.initial(), q1 = d1.initial();
    for (int i = 0; i < 30; ++i) {
      Event e = typed(rng() % 2 ? "a" : "b");
      e.set("v", static_cast<double>(rng() % 3) * 0.75);
      q0 = d0.step(q0, e).first;
      q1 = d1.step(q1, e).first;
      REQUIRE(d0.isFinal(q0) == d1.isFinal(q1));
    }
  }
}
