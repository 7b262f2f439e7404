#include "cef/algebra.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>

namespace cef {

namespace {

std::string formatNumber(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

}  // namespace

// ---------------------------------------------------------------------------
// Event

void Event::set(std::string_view name, Value value) {
  for (auto& [n, v] : attrs_) {
    if (n == name) {
      v = std::move(value);
      return;
    }
  }
  attrs_.emplace_back(std::string(name), std::move(value));
}

const Value* Event::find(std::string_view name) const noexcept {
  for (const auto& [n, v] : attrs_)
    if (n == name) return &v;
  return nullptr;
}

const Value& Event::at(std::string_view name) const {
  if (const Value* v = find(name)) return *v;
  throw MissingAttribute(std::string(name));
}

double Event::number(std::string_view name) const {
  const Value& v = at(name);
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  throw DataError("attribute '" + std::string(name) + "' is not numeric");
}

// ---------------------------------------------------------------------------
// Constants and atoms

std::string Constant::canonical() const {
  switch (kind) {
    case Kind::Number:
      return formatNumber(x);
    case Kind::Identifier:
      return text;
    case Kind::String:
      return "\"" + text + "\"";
    case Kind::Pair:
      return "(" + formatNumber(x) + ", " + formatNumber(y) + ")";
  }
  return {};
}

std::string PredicateAtom::key() const {
  std::string s = name + "(";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i) s += ", ";
    s += args[i].canonical();
  }
  return s + ")";
}

std::string PredicateAtom::toString() const {
  std::string s = name + "(" + var;
  for (const auto& a : args) s += ", " + a.canonical();
  return s + ")";
}

// ---------------------------------------------------------------------------
// Formula

Formula Formula::constant(bool value, std::string var) {
  Formula f;
  f.kind_ = Kind::Constant;
  f.value_ = value;
  f.var_ = std::move(var);
  return f;
}

Formula Formula::atom(PredicateAtom atom) {
  Formula f;
  f.kind_ = Kind::Atom;
  f.atom_ = std::make_shared<const PredicateAtom>(std::move(atom));
  return f;
}

Formula Formula::negate(Formula child) {
  Formula f;
  f.kind_ = Kind::Not;
  f.children_.push_back(std::move(child));
  return f;
}

Formula Formula::conjunction(std::vector<Formula> children) {
  if (children.size() == 1) return std::move(children.front());
  Formula f;
  f.kind_ = Kind::And;
  f.children_ = std::move(children);
  return f;
}

Formula Formula::disjunction(std::vector<Formula> children) {
  if (children.size() == 1) return std::move(children.front());
  Formula f;
  f.kind_ = Kind::Or;
  f.children_ = std::move(children);
  return f;
}

bool Formula::evaluate(const Event& event) const {
  return evaluateWith([&](const PredicateAtom& a) { return a.evaluate(event); });
}

void Formula::collectAtoms(std::vector<PredicateAtom>& out) const {
  if (kind_ == Kind::Atom) {
    const auto k = atom_->key();
    const bool seen =
        std::any_of(out.begin(), out.end(), [&](const PredicateAtom& a) { return a.key() == k; });
    if (!seen) out.push_back(*atom_);
    return;
  }
  for (const auto& c : children_) c.collectAtoms(out);
}

std::vector<std::string> Formula::variables() const {
  std::set<std::string> vars;
  std::function<void(const Formula&)> walk = [&](const Formula& f) {
    if (f.kind_ == Kind::Atom) vars.insert(f.atom_->var);
    if (f.kind_ == Kind::Constant && !f.var_.empty()) vars.insert(f.var_);
    for (const auto& c : f.children_) walk(c);
  };
  walk(*this);
  return {vars.begin(), vars.end()};
}

std::string Formula::toString() const {
  switch (kind_) {
    case Kind::Constant:
      if (!var_.empty()) return std::string(value_ ? "True(" : "False(") + var_ + ")";
      return value_ ? "TRUE" : "FALSE";
    case Kind::Atom:
      return atom_->toString();
    case Kind::Not:
      return "NOT " + children_.front().toString();
    case Kind::And:
    case Kind::Or: {
      std::string s = "(";
      for (std::size_t i = 0; i < children_.size(); ++i) {
        if (i) s += kind_ == Kind::And ? " AND " : " OR ";
        s += children_[i].toString();
      }
      return s + ")";
    }
  }
  return {};
}

bool evaluate(const Formula& formula, const Event& event) { return formula.evaluate(event); }

// ---------------------------------------------------------------------------
// Satisfiability

bool SatOracle::satisfiable(std::span<const PredicateAtom> predicates,
                            std::uint64_t positive) const {
  if (strategy == SatStrategy::AssumeAllSatisfiable) return true;

  struct Constraint {
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    std::vector<std::pair<double, double>> excluded;
  };
  std::map<std::string, Constraint> byKey;
  for (std::size_t i = 0; i < predicates.size(); ++i) {
    auto band = predicates[i].evaluator ? predicates[i].evaluator->band() : std::nullopt;
    if (!band) continue;
    auto& c = byKey[band->key];
    if ((positive >> i) & 1U) {
      c.lo = std::max(c.lo, band->lo);
      c.hi = std::min(c.hi, band->hi);
    } else {
      c.excluded.emplace_back(band->lo, band->hi);
    }
  }
  for (auto& [key, c] : byKey) {
    if (!(c.lo < c.hi)) return false;
    // Is [lo, hi) covered by the union of the negated bands?
    std::sort(c.excluded.begin(), c.excluded.end());
    double reach = c.lo;
    for (const auto& [lo, hi] : c.excluded) {
      if (lo > reach) break;
      reach = std::max(reach, hi);
      if (reach >= c.hi) return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// Minterms

std::vector<Minterm> computeMinterms(std::span<const PredicateAtom> predicates, SatOracle oracle) {
  const std::size_t k = predicates.size();
  if (k > MintermSet::kMaxPredicates)
    throw DataError("too many distinct predicates (" + std::to_string(k) + "); at most " +
                    std::to_string(MintermSet::kMaxPredicates) + " are supported");
  std::set<std::string> keys;
  for (const auto& p : predicates)
    if (!keys.insert(p.key()).second) throw DataError("duplicate predicate " + p.key());

  std::vector<Minterm> out;
  const std::uint64_t total = std::uint64_t{1} << k;
  for (std::uint64_t counter = 0; counter < total; ++counter) {
    std::uint64_t positive = 0;
    for (std::size_t j = 0; j < k; ++j)
      if (!((counter >> (k - 1 - j)) & 1U)) positive |= std::uint64_t{1} << j;
    if (oracle.satisfiable(predicates, positive)) out.push_back({positive});
  }
  return out;
}

MintermSet::MintermSet(std::vector<PredicateAtom> predicates, SatOracle oracle)
    : predicates_(std::move(predicates)) {
  minterms_ = computeMinterms(predicates_, oracle);
  lookup_.assign(std::size_t{1} << predicates_.size(), -1);
  for (std::size_t i = 0; i < minterms_.size(); ++i)
    lookup_[minterms_[i].positive] = static_cast<std::int32_t>(i);
}

std::optional<std::size_t> MintermSet::indexOf(std::uint64_t truth) const {
  if (truth >= lookup_.size() || lookup_[truth] < 0) return std::nullopt;
  return static_cast<std::size_t>(lookup_[truth]);
}

std::size_t MintermSet::classify(const Event& event) const {
  std::uint64_t truth = 0;
  for (std::size_t i = 0; i < predicates_.size(); ++i)
    if (predicates_[i].evaluate(event)) truth |= std::uint64_t{1} << i;
  const auto idx = lookup_[truth];
  if (idx < 0) throw NoMatchingMinterm();
  return static_cast<std::size_t>(idx);
}

std::vector<std::size_t> MintermSet::satisfying(const Formula& formula) const {
  std::map<std::string, std::size_t, std::less<>> position;
  for (std::size_t i = 0; i < predicates_.size(); ++i) position.emplace(predicates_[i].key(), i);

  std::vector<std::size_t> out;
  for (std::size_t m = 0; m < minterms_.size(); ++m) {
    const bool sat = formula.evaluateWith([&](const PredicateAtom& a) {
      auto it = position.find(a.key());
      if (it == position.end())
        throw InvariantViolation("atom " + a.key() + " is not part of the minterm alphabet");
      return holds(m, it->second);
    });
    if (sat) out.push_back(m);
  }
  return out;
}

Formula MintermSet::formula(std::size_t minterm) const {
  if (predicates_.empty()) return Formula::constant(true);
  std::vector<Formula> parts;
  for (std::size_t i = 0; i < predicates_.size(); ++i) {
    auto a = Formula::atom(predicates_[i]);
    parts.push_back(holds(minterm, i) ? std::move(a) : Formula::negate(std::move(a)));
  }
  return Formula::conjunction(std::move(parts));
}

std::string MintermSet::describe(std::size_t minterm) const {
  if (predicates_.empty()) return "TRUE";
  std::string s;
  for (std::size_t i = 0; i < predicates_.size(); ++i) {
    if (i) s += " AND ";
    if (!holds(minterm, i)) s += "NOT ";
    s += predicates_[i].key();
  }
  return s;
}

Minterm classify(const Event& event, const MintermSet& minterms) {
  return minterms[minterms.classify(event)];
}

// ---------------------------------------------------------------------------
// Registry

void PredicateRegistry::add(std::string name, Factory factory) {
  factories_[std::move(name)] = std::move(factory);
}

bool PredicateRegistry::contains(std::string_view name) const {
  return factories_.find(name) != factories_.end();
}

PredicateAtom PredicateRegistry::make(std::string name, std::string var,
                                      std::vector<Constant> args) const {
  auto it = factories_.find(name);
  if (it == factories_.end()) throw UnknownPredicate(name);
  auto evaluator = it->second(args);
  return PredicateAtom{std::move(name), std::move(var), std::move(args), std::move(evaluator)};
}

namespace {

double requireNumber(std::span<const Constant> args, std::size_t i, std::string_view pred) {
  if (i >= args.size() || args[i].kind != Constant::Kind::Number)
    throw DataError(std::string(pred) + ": argument " + std::to_string(i + 2) + " must be a number");
  return args[i].x;
}

std::string requireName(std::span<const Constant> args, std::size_t i, std::string_view pred) {
  if (i >= args.size() ||
      (args[i].kind != Constant::Kind::Identifier && args[i].kind != Constant::Kind::String))
    throw DataError(std::string(pred) + ": argument " + std::to_string(i + 2) +
                    " must be an attribute name");
  return args[i].text;
}

class BetweenAtom final : public AtomEvaluator {
 public:
  BetweenAtom(std::string attr, double lo, double hi) : attr_(std::move(attr)), lo_(lo), hi_(hi) {}
  bool evaluate(const Event& e) const override {
    const double v = e.number(attr_);
    return v >= lo_ && v < hi_;
  }
  std::optional<Band> band() const override { return Band{"attr:" + attr_, lo_, hi_}; }

 private:
  std::string attr_;
  double lo_, hi_;
};

class EqualsAtom final : public AtomEvaluator {
 public:
  EqualsAtom(std::string attr, Constant value) : attr_(std::move(attr)), value_(std::move(value)) {}
  bool evaluate(const Event& e) const override {
    const Value& v = e.at(attr_);
    if (value_.kind == Constant::Kind::Number) {
      if (const auto* d = std::get_if<double>(&v)) return *d == value_.x;
      return false;
    }
    if (const auto* s = std::get_if<std::string>(&v)) return *s == value_.text;
    if (const auto* b = std::get_if<bool>(&v)) return (*b ? "true" : "false") == value_.text;
    return false;
  }

 private:
  std::string attr_;
  Constant value_;
};

}  // namespace

PredicateRegistry genericRegistry() {
  PredicateRegistry r;
  r.add("Between", [](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    if (a.size() != 3) throw DataError("Between expects (x, attribute, lo, hi)");
    return std::make_shared<BetweenAtom>(requireName(a, 0, "Between"), requireNumber(a, 1, "Between"),
                                         requireNumber(a, 2, "Between"));
  });
  r.add("Equals", [](std::span<const Constant> a) -> std::shared_ptr<const AtomEvaluator> {
    if (a.size() != 2) throw DataError("Equals expects (x, attribute, value)");
    return std::make_shared<EqualsAtom>(requireName(a, 0, "Equals"), a[1]);
  });
  return r;
}

}  // namespace cef
