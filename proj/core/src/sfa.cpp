#include "cef/sfa.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>

#include "json.hpp"

namespace cef {

// ---------------------------------------------------------------------------
// SymbolicNfa

namespace {

std::vector<std::vector<StateId>> epsilonEdges(const SymbolicNfa& nfa) {
  std::vector<std::vector<StateId>> eps(nfa.stateCount);
  for (const auto& t : nfa.transitions)
    if (!t.guard) eps[t.from].push_back(t.to);
  return eps;
}

std::vector<StateId> closure(std::vector<StateId> seeds, const std::vector<std::vector<StateId>>& eps) {
  std::vector<bool> seen(eps.size(), false);
  std::vector<StateId> stack;
  for (StateId s : seeds)
    if (!seen[s]) {
      seen[s] = true;
      stack.push_back(s);
    }
  std::vector<StateId> out;
  while (!stack.empty()) {
    const StateId s = stack.back();
    stack.pop_back();
    out.push_back(s);
    for (StateId n : eps[s])
      if (!seen[n]) {
        seen[n] = true;
        stack.push_back(n);
      }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

bool SymbolicNfa::accepts(const Word& word) const {
  const auto eps = epsilonEdges(*this);
  std::vector<StateId> current = closure({initial}, eps);
  for (auto symbol : word) {
    std::vector<StateId> moved;
    for (const auto& t : transitions)
      if (t.guard && *t.guard == symbol &&
          std::binary_search(current.begin(), current.end(), t.from))
        moved.push_back(t.to);
    current = closure(std::move(moved), eps);
  }
  return std::any_of(current.begin(), current.end(), [&](StateId s) {
    return std::find(finals.begin(), finals.end(), s) != finals.end();
  });
}

// ---------------------------------------------------------------------------
// SymbolicDfa

SymbolicDfa::SymbolicDfa(std::shared_ptr<const MintermSet> alphabet, std::size_t states,
                         StateId initial, std::vector<bool> finals, std::vector<StateId> delta)
    : alphabet_(std::move(alphabet)),
      states_(states),
      symbols_(alphabet_->size()),
      initial_(initial),
      finals_(std::move(finals)),
      delta_(std::move(delta)) {
  if (finals_.size() != states_ || delta_.size() != states_ * symbols_ || initial_ >= states_)
    throw InvariantViolation("inconsistent DFA dimensions");
  for (StateId t : delta_)
    if (t >= states_) throw InvariantViolation("DFA transition to unknown state");
}

std::vector<StateId> SymbolicDfa::finals() const {
  std::vector<StateId> out;
  for (std::size_t q = 0; q < states_; ++q)
    if (finals_[q]) out.push_back(static_cast<StateId>(q));
  return out;
}

StateId SymbolicDfa::run(StateId q, const Word& word) const {
  for (auto symbol : word) q = next(q, symbol);
  return q;
}

std::vector<StateId> SymbolicDfa::successors(StateId q) const {
  std::vector<StateId> out(delta_.begin() + static_cast<std::ptrdiff_t>(q * symbols_),
                           delta_.begin() + static_cast<std::ptrdiff_t>((q + 1) * symbols_));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

bool SymbolicDfa::operator==(const SymbolicDfa& o) const {
  return states_ == o.states_ && symbols_ == o.symbols_ && initial_ == o.initial_ &&
         finals_ == o.finals_ && delta_ == o.delta_;
}

// ---------------------------------------------------------------------------
// Thompson construction

namespace {

class ThompsonBuilder {
 public:
  using Guards = std::vector<std::pair<std::string, std::vector<std::size_t>>>;

  explicit ThompsonBuilder(const Guards& guards) : guards_(guards) {}

  StateId fresh() { return static_cast<StateId>(count_++); }
  void edge(StateId from, std::optional<std::uint32_t> guard, StateId to) {
    transitions_.push_back({from, guard, to});
  }

  std::pair<StateId, StateId> build(const PatternNode& n) {
    using K = PatternNode::Kind;
    switch (n.kind) {
      case K::Leaf: {
        const StateId s = fresh(), e = fresh();
        for (std::size_t m : guardOf(n.var)) edge(s, static_cast<std::uint32_t>(m), e);
        return {s, e};
      }
      case K::Concat: {
        auto [s, e] = build(n.children.front());
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          auto [cs, ce] = build(n.children[i]);
          edge(e, std::nullopt, cs);
          e = ce;
        }
        return {s, e};
      }
      case K::Union: {
        const StateId s = fresh(), e = fresh();
        for (const auto& c : n.children) {
          auto [cs, ce] = build(c);
          edge(s, std::nullopt, cs);
          edge(ce, std::nullopt, e);
        }
        return {s, e};
      }
      case K::Star:
      case K::Plus: {
        const StateId s = fresh(), e = fresh();
        auto [cs, ce] = build(n.children.front());
        edge(s, std::nullopt, cs);
        edge(ce, std::nullopt, e);
        edge(ce, std::nullopt, cs);
        if (n.kind == K::Star) edge(s, std::nullopt, e);
        return {s, e};
      }
    }
    throw InvariantViolation("unknown pattern node");
  }

  std::size_t count() const { return count_; }
  std::vector<SymbolicNfa::Transition> take() { return std::move(transitions_); }

 private:
  const std::vector<std::size_t>& guardOf(const std::string& var) const {
    for (const auto& [v, g] : guards_)
      if (v == var) return g;
    throw UnboundVariable(var);
  }

  const Guards& guards_;
  std::size_t count_ = 0;
  std::vector<SymbolicNfa::Transition> transitions_;
};

}  // namespace

SymbolicNfa compileSnfa(const PatternNode& ast,
                        const std::vector<std::pair<std::string, std::vector<std::size_t>>>& guards,
                        std::shared_ptr<const MintermSet> alphabet, bool streamPrefix) {
  ThompsonBuilder b(guards);
  SymbolicNfa nfa;
  StateId start = 0;
  if (streamPrefix) {
    // Σ*: a self-loop over every minterm lets a match begin at any event.
    start = b.fresh();
    for (std::size_t m = 0; m < alphabet->size(); ++m) b.edge(start, static_cast<std::uint32_t>(m), start);
  }
  auto [rs, re] = b.build(ast);
  if (streamPrefix) {
    b.edge(start, std::nullopt, rs);
  } else {
    start = rs;
  }
  nfa.alphabet = std::move(alphabet);
  nfa.stateCount = b.count();
  nfa.initial = start;
  nfa.finals = {re};
  nfa.transitions = b.take();
  return nfa;
}

SymbolicNfa compileSnfa(const PatternSpec& spec, SatOracle oracle) {
  auto alphabet = std::make_shared<const MintermSet>(spec.alphabetAtoms(), oracle);
  std::vector<std::pair<std::string, std::vector<std::size_t>>> guards;
  for (const auto& [var, f] : spec.bindings) guards.emplace_back(var, alphabet->satisfying(f));
  return compileSnfa(spec.ast, guards, std::move(alphabet), true);
}

// ---------------------------------------------------------------------------
// Determinization

SymbolicDfa determinize(const SymbolicNfa& nfa) {
  const std::size_t symbols = nfa.alphabet->size();
  const auto eps = epsilonEdges(nfa);

  std::vector<std::vector<std::pair<std::uint32_t, StateId>>> moves(nfa.stateCount);
  for (const auto& t : nfa.transitions)
    if (t.guard) moves[t.from].emplace_back(*t.guard, t.to);

  std::map<std::vector<StateId>, StateId> ids;
  std::vector<std::vector<StateId>> subsets;
  std::deque<StateId> queue;
  auto intern = [&](std::vector<StateId> set) {
    auto [it, inserted] = ids.emplace(std::move(set), static_cast<StateId>(subsets.size()));
    if (inserted) {
      subsets.push_back(it->first);
      queue.push_back(it->second);
    }
    return it->second;
  };

  intern(closure({nfa.initial}, eps));
  std::vector<StateId> delta;
  while (!queue.empty()) {
    const StateId id = queue.front();
    queue.pop_front();
    std::vector<std::vector<StateId>> targets(symbols);
    for (StateId s : subsets[id])
      for (const auto& [m, to] : moves[s]) targets[m].push_back(to);
    delta.resize(subsets.size() * symbols);
    for (std::size_t m = 0; m < symbols; ++m) {
      const StateId t = intern(closure(std::move(targets[m]), eps));
      delta.resize(subsets.size() * symbols);
      delta[id * symbols + m] = t;
    }
  }
  delta.resize(subsets.size() * symbols);

  std::vector<bool> finals(subsets.size(), false);
  for (std::size_t i = 0; i < subsets.size(); ++i)
    for (StateId f : nfa.finals)
      if (std::binary_search(subsets[i].begin(), subsets[i].end(), f)) finals[i] = true;

  return SymbolicDfa(nfa.alphabet, subsets.size(), 0, std::move(finals), std::move(delta));
}

// ---------------------------------------------------------------------------
// Disambiguation

std::vector<std::vector<Word>> incomingWords(const SymbolicDfa& dfa, int m) {
  const std::size_t n = dfa.stateCount();
  std::vector<std::set<Word>> current(n, std::set<Word>{Word{}});
  for (int j = 0; j < m; ++j) {
    std::vector<std::set<Word>> nextLevel(n);
    for (std::size_t p = 0; p < n; ++p) {
      if (current[p].empty()) continue;
      for (std::size_t t = 0; t < dfa.symbolCount(); ++t) {
        auto& target = nextLevel[dfa.next(static_cast<StateId>(p), t)];
        for (const Word& w : current[p]) {
          Word x = w;
          x.push_back(static_cast<std::uint32_t>(t));
          target.insert(std::move(x));
        }
      }
    }
    current = std::move(nextLevel);
  }
  std::vector<std::vector<Word>> out(n);
  for (std::size_t q = 0; q < n; ++q) out[q].assign(current[q].begin(), current[q].end());
  return out;
}

namespace {

struct Labelled {
  std::size_t states;
  StateId initial;
  std::vector<bool> finals;
  std::vector<StateId> delta;
  std::vector<std::optional<Word>> label;  // upper bound on δ^{-k}
};

// Keeps states reachable from the initial one, numbered in BFS order.
Labelled prune(const Labelled& in, std::size_t symbols) {
  std::vector<std::int64_t> remap(in.states, -1);
  std::vector<StateId> order;
  std::deque<StateId> queue{in.initial};
  remap[in.initial] = 0;
  order.push_back(in.initial);
  while (!queue.empty()) {
    const StateId q = queue.front();
    queue.pop_front();
    for (std::size_t t = 0; t < symbols; ++t) {
      const StateId r = in.delta[q * symbols + t];
      if (remap[r] < 0) {
        remap[r] = static_cast<std::int64_t>(order.size());
        order.push_back(r);
        queue.push_back(r);
      }
    }
  }
  Labelled out{order.size(), 0, std::vector<bool>(order.size()), std::vector<StateId>(order.size() * symbols),
               std::vector<std::optional<Word>>(order.size())};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const StateId old = order[i];
    out.finals[i] = in.finals[old];
    out.label[i] = in.label[old];
    for (std::size_t t = 0; t < symbols; ++t)
      out.delta[i * symbols + t] = static_cast<StateId>(remap[in.delta[old * symbols + t]]);
  }
  return out;
}

// One splitting round: input labels are words of length k-1, output of length k.
Labelled splitRound(const Labelled& in, std::size_t symbols, std::size_t cap) {
  auto extend = [&](StateId p, std::size_t t) -> std::optional<Word> {
    if (!in.label[p]) return std::nullopt;
    Word w = *in.label[p];
    w.push_back(static_cast<std::uint32_t>(t));
    return w;
  };

  std::vector<std::set<Word>> words(in.states);
  for (std::size_t p = 0; p < in.states; ++p)
    for (std::size_t t = 0; t < symbols; ++t)
      if (auto w = extend(static_cast<StateId>(p), t))
        words[in.delta[p * symbols + t]].insert(std::move(*w));

  // Clone q once per distinct incoming word.
  std::vector<std::vector<Word>> clones(in.states);
  std::vector<StateId> base(in.states);
  std::size_t total = 0;
  for (std::size_t q = 0; q < in.states; ++q) {
    clones[q].assign(words[q].begin(), words[q].end());
    base[q] = static_cast<StateId>(total);
    total += std::max<std::size_t>(1, clones[q].size());
    if (total > cap) throw StateCapExceeded(cap);
  }

  Labelled out{total, base[in.initial], std::vector<bool>(total), std::vector<StateId>(total * symbols),
               std::vector<std::optional<Word>>(total)};
  for (std::size_t p = 0; p < in.states; ++p) {
    // Edges out of every clone of p agree: they only depend on p's label.
    std::vector<StateId> targets(symbols);
    for (std::size_t t = 0; t < symbols; ++t) {
      const StateId q = in.delta[p * symbols + t];
      StateId offset = 0;
      if (auto w = extend(static_cast<StateId>(p), t)) {
        const auto& cs = clones[q];
        offset = static_cast<StateId>(std::lower_bound(cs.begin(), cs.end(), *w) - cs.begin());
      }
      targets[t] = base[q] + offset;
    }
    const std::size_t n = std::max<std::size_t>(1, clones[p].size());
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t id = base[p] + j;
      out.finals[id] = in.finals[p];
      if (!clones[p].empty()) out.label[id] = clones[p][j];
      std::copy(targets.begin(), targets.end(), out.delta.begin() + static_cast<std::ptrdiff_t>(id * symbols));
    }
  }
  return prune(out, symbols);
}

}  // namespace

DisambiguatedDfa disambiguate(const SymbolicDfa& dfa, int m, std::size_t stateCap) {
  if (m < 0) throw DataError("order must be non-negative");
  if (m == 0) return {dfa, 0, {}};

  const std::size_t symbols = dfa.symbolCount();
  Labelled cur{dfa.stateCount(), dfa.initial(), {}, {}, {}};
  cur.finals.resize(cur.states);
  cur.delta.resize(cur.states * symbols);
  cur.label.assign(cur.states, Word{});
  for (std::size_t q = 0; q < cur.states; ++q) {
    cur.finals[q] = dfa.isFinal(static_cast<StateId>(q));
    for (std::size_t t = 0; t < symbols; ++t)
      cur.delta[q * symbols + t] = dfa.next(static_cast<StateId>(q), t);
  }

  for (int k = 1; k <= m; ++k) cur = splitRound(cur, symbols, stateCap);

  DisambiguatedDfa out{SymbolicDfa(dfa.alphabetPtr(), cur.states, cur.initial, cur.finals, cur.delta), m, {}};
  const auto words = incomingWords(out.dfa, m);
  out.history.resize(cur.states);
  for (std::size_t q = 0; q < cur.states; ++q) {
    if (words[q].size() > 1) throw InvariantViolation("disambiguation left an ambiguous state");
    if (words[q].size() == 1) out.history[q] = words[q].front();
  }
  return out;
}

CompiledPattern compilePattern(const PatternSpec& spec, int order, SatOracle oracle, std::size_t stateCap) {
  SymbolicDfa dfa = determinize(compileSnfa(spec, oracle));
  DisambiguatedDfa dis = disambiguate(dfa, order, stateCap);
  return {std::move(dfa), std::move(dis)};
}

// ---------------------------------------------------------------------------
// Relabelling and export

ClassicalDfa relabelToClassical(const SymbolicDfa& dfa) {
  ClassicalDfa out;
  for (std::size_t i = 0; i < dfa.symbolCount(); ++i) out.symbols.push_back("a" + std::to_string(i + 1));
  out.stateCount = dfa.stateCount();
  out.initial = dfa.initial();
  out.finals.resize(dfa.stateCount());
  out.delta.resize(dfa.stateCount() * dfa.symbolCount());
  for (std::size_t q = 0; q < dfa.stateCount(); ++q) {
    out.finals[q] = dfa.isFinal(static_cast<StateId>(q));
    for (std::size_t t = 0; t < dfa.symbolCount(); ++t)
      out.delta[q * dfa.symbolCount() + t] = dfa.next(static_cast<StateId>(q), t);
  }
  return out;
}

std::string exportAutomaton(const DisambiguatedDfa& d) {
  using nlohmann::json;
  const auto& dfa = d.dfa;
  json j;
  j["states"] = dfa.stateCount();
  j["initial"] = dfa.initial();
  j["finals"] = dfa.finals();
  j["order"] = d.order;
  json minterms = json::array();
  for (std::size_t i = 0; i < dfa.symbolCount(); ++i)
    minterms.push_back({{"index", i}, {"formula", dfa.alphabet().describe(i)}});
  j["minterms"] = minterms;
  json delta = json::array();
  for (std::size_t q = 0; q < dfa.stateCount(); ++q) {
    json row = json::array();
    for (std::size_t t = 0; t < dfa.symbolCount(); ++t) row.push_back(dfa.next(static_cast<StateId>(q), t));
    delta.push_back(row);
  }
  j["delta"] = delta;
  json history = json::array();
  for (const auto& h : d.history) history.push_back(h ? json(*h) : json(nullptr));
  j["history"] = history;
  return j.dump(2);
}

}  // namespace cef
