#include <random>

#include "cef/algebra.hpp"
#include "cef/geo.hpp"
#include "doctest.h"

using namespace cef;

namespace {

const PredicateRegistry& registry() {
  static const PredicateRegistry r = geo::builtinRegistry();
  return r;
}

PredicateAtom speed(double lo, double hi) {
  return registry().make("SpeedBetween", "x", {Constant::number(lo), Constant::number(hi)});
}

PredicateAtom band(const char* attr, double lo, double hi) {
  return registry().make("Between", "x", {Constant::identifier(attr), Constant::number(lo), Constant::number(hi)});
}

Event withSpeed(double v) {
  Event e(0, "p");
  e.set("speed", v);
  return e;
}

}  // namespace

TEST_CASE("event attributes") {
  Event e(5, "v1");
  e.set("speed", 3.0);
  e.set("flag", true);
  e.set("name", std::string("alpha"));
  e.set("speed", 4.0);
  CHECK(e.attributes().size() == 3);
  CHECK(e.number("speed") == 4.0);
  CHECK(e.number("flag") == 1.0);
  CHECK(e.find("missing") == nullptr);
  CHECK_THROWS_AS(e.at("missing"), MissingAttribute);
  CHECK_THROWS_AS(e.number("name"), DataError);
}

TEST_CASE("evaluate: speed band holds inside") {
  CHECK(evaluate(Formula::atom(speed(1.0, 9.0)), withSpeed(5.0)));
}

TEST_CASE("evaluate: contradiction is false on any event") {
  const auto a = Formula::atom(speed(0, 10));
  const auto f = Formula::conjunction({a, Formula::negate(a)});
  for (double v : {-1.0, 0.0, 5.0, 10.0, 99.0}) CHECK_FALSE(evaluate(f, withSpeed(v)));
}

TEST_CASE("evaluate: both bands negated above their range") {
  const auto f = Formula::conjunction(
      {Formula::negate(Formula::atom(speed(0, 10))), Formula::negate(Formula::atom(speed(10, 20)))});
  CHECK(evaluate(f, withSpeed(25.0)));
  CHECK_FALSE(evaluate(f, withSpeed(15.0)));
}

TEST_CASE("evaluate: bands are half-open") {
  CHECK(evaluate(Formula::atom(speed(9.0, 20.0)), withSpeed(9.0)));
  CHECK_FALSE(evaluate(Formula::atom(speed(1.0, 9.0)), withSpeed(9.0)));
}

TEST_CASE("evaluate: missing attribute is an error, not false") {
  Event e(0, "p");
  CHECK_THROWS_AS(evaluate(Formula::atom(speed(0, 10)), e), MissingAttribute);
}

TEST_CASE("evaluate: Equals on strings and numbers") {
  Event e(0, "p");
  e.set("type", std::string("a"));
  e.set("n", 3.0);
  auto eqA = registry().make("Equals", "x", {Constant::identifier("type"), Constant::identifier("a")});
  auto eqB = registry().make("Equals", "x", {Constant::identifier("type"), Constant::string("b")});
  auto eq3 = registry().make("Equals", "x", {Constant::identifier("n"), Constant::number(3)});
  CHECK(eqA.evaluate(e));
  CHECK_FALSE(eqB.evaluate(e));
  CHECK(eq3.evaluate(e));
}

TEST_CASE("registry rejects unknown predicates and bad arity") {
  CHECK_THROWS_AS(registry().make("Nope", "x", {}), UnknownPredicate);
  CHECK_THROWS_AS(registry().make("SpeedBetween", "x", {Constant::number(1)}), DataError);
}

TEST_CASE("computeMinterms: two predicates, all satisfiable, canonical order") {
  std::vector<PredicateAtom> ps{speed(0, 10), speed(5, 20)};
  const MintermSet ms(ps, SatOracle{});
  REQUIRE(ms.size() == 4);
  // psi1 & psi2, psi1 & !psi2, !psi1 & psi2, !psi1 & !psi2
  CHECK(ms[0].positive == 0b11);
  CHECK(ms[1].positive == 0b01);
  CHECK(ms[2].positive == 0b10);
  CHECK(ms[3].positive == 0b00);
}

TEST_CASE("computeMinterms: empty predicate set yields the vacuous minterm") {
  const auto m = computeMinterms({}, SatOracle{});
  REQUIRE(m.size() == 1);
  const MintermSet ms({}, SatOracle{});
  CHECK(ms.classify(Event(0, "p")) == 0);
  CHECK(ms.formula(0).evaluate(Event(0, "p")));
}

TEST_CASE("computeMinterms: interval pruning drops the disjoint pair") {
  std::vector<PredicateAtom> ps{speed(0, 10), speed(10, 20)};
  const auto all = computeMinterms(ps, SatOracle{});
  const auto pruned = computeMinterms(ps, SatOracle{SatStrategy::IntervalPruning});
  CHECK(all.size() == 4);
  REQUIRE(pruned.size() == 3);
  for (const auto& m : pruned) CHECK(m.positive != 0b11);
}

TEST_CASE("interval pruning: negated bands covering a positive band") {
  // [0,10) positive while [0,5) and [5,10) both negated is impossible.
  std::vector<PredicateAtom> ps{speed(0, 10), speed(0, 5), speed(5, 10)};
  SatOracle o{SatStrategy::IntervalPruning};
  CHECK_FALSE(o.satisfiable(ps, 0b001));
  CHECK(o.satisfiable(ps, 0b011));
  CHECK(o.satisfiable(ps, 0b000));
}

TEST_CASE("interval pruning ignores bands on different quantities") {
  std::vector<PredicateAtom> ps{band("a", 0, 1), band("b", 2, 3)};
  CHECK(computeMinterms(ps, SatOracle{SatStrategy::IntervalPruning}).size() == 4);
}

TEST_CASE("computeMinterms is deterministic") {
  std::vector<PredicateAtom> ps{speed(0, 10), speed(10, 20), band("lat", 0, 1)};
  const auto a = computeMinterms(ps, SatOracle{SatStrategy::IntervalPruning});
  const auto b = computeMinterms(ps, SatOracle{SatStrategy::IntervalPruning});
  CHECK(a == b);
}

TEST_CASE("classify: event satisfying only the first predicate") {
  const MintermSet ms({speed(0, 10), speed(10, 20)}, SatOracle{});
  const auto m = classify(withSpeed(4.0), ms);
  CHECK(m.positive == 0b01);
  CHECK(ms.describe(ms.classify(withSpeed(4.0))).find("NOT") != std::string::npos);
}

TEST_CASE("classify: unsound pruning surfaces as NoMatchingMinterm") {
  // Only keep minterms where predicate 0 holds: a hand-built unsound set.
  struct AlwaysFalse final : AtomEvaluator {
    bool evaluate(const Event&) const override { return false; }
    std::optional<Band> band() const override { return Band{"k", 0.0, 0.0}; }  // empty band
  };
  PredicateAtom p{"Never", "x", {}, std::make_shared<AlwaysFalse>()};
  PredicateAtom q = speed(0, 10);
  // The empty band makes every combination with p positive unsatisfiable (sound);
  // flip it: an evaluator that is always true but declares an empty band is unsound.
  struct AlwaysTrue final : AtomEvaluator {
    bool evaluate(const Event&) const override { return true; }
    std::optional<Band> band() const override { return Band{"k", 0.0, 0.0}; }
  };
  PredicateAtom liar{"Liar", "x", {}, std::make_shared<AlwaysTrue>()};
  const MintermSet sound({p, q}, SatOracle{SatStrategy::IntervalPruning});
  CHECK_NOTHROW(sound.classify(withSpeed(3)));
  const MintermSet unsound({liar, q}, SatOracle{SatStrategy::IntervalPruning});
  CHECK_THROWS_AS(unsound.classify(withSpeed(3)), NoMatchingMinterm);
}

TEST_CASE("property: random events over three bands fall into exactly one minterm") {
  std::vector<PredicateAtom> ps{speed(0, 10), speed(5, 15), band("lat", 0, 1)};
  for (auto strategy : {SatStrategy::AssumeAllSatisfiable, SatStrategy::IntervalPruning}) {
    const MintermSet ms(ps, SatOracle{strategy});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> sp(-5, 25), la(-1, 2);
    std::vector<int> counts(ms.size(), 0);
    for (int i = 0; i < 1000; ++i) {
      Event e(i, "p");
      e.set("speed", sp(rng));
      e.set("lat", la(rng));
      int satisfied = 0;
      std::size_t which = 0;
      for (std::size_t m = 0; m < ms.size(); ++m)
        if (ms.formula(m).evaluate(e)) {
          ++satisfied;
          which = m;
        }
      REQUIRE(satisfied == 1);
      CHECK(ms.classify(e) == which);
      ++counts[which];
    }
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == 1000);
  }
}

TEST_CASE("satisfying: minterms implying a formula") {
  const MintermSet ms({speed(0, 10), speed(10, 20)}, SatOracle{});
  const auto idx = ms.satisfying(Formula::atom(speed(0, 10)));
  REQUIRE(idx.size() == 2);
  for (auto i : idx) CHECK(ms.holds(i, 0));
  CHECK(ms.satisfying(Formula::constant(true)).size() == 4);
  CHECK(ms.satisfying(Formula::constant(false)).empty());
}

TEST_CASE("formula printing and atom keys") {
  const auto a = speed(1, 9);
  CHECK(a.toString() == "SpeedBetween(x, 1, 9)");
  auto b = a;
  b.var = "y";
  CHECK(a.key() == b.key());
  const auto f = Formula::conjunction({Formula::atom(a), Formula::negate(Formula::atom(speed(9, 20)))});
  CHECK(f.toString().find("AND") != std::string::npos);
  std::vector<PredicateAtom> atoms;
  f.collectAtoms(atoms);
  Formula::atom(b).collectAtoms(atoms);
  CHECK(atoms.size() == 2);
}
