#include "cef/pmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <unordered_map>

#include "json.hpp"

namespace cef {

namespace {

// Masses within this distance of the threshold count as reaching it.
constexpr double kMassTolerance = 1e-12;

std::size_t power(std::size_t base, int exp) {
  std::size_t r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// MintermSource

MintermSource::MintermSource(std::vector<double> probabilities)
    : MintermSource(0, probabilities.size(), probabilities, probabilities) {}

MintermSource::MintermSource(int order, std::size_t symbols, std::vector<double> table,
                             std::vector<double> initial)
    : order_(order), symbols_(symbols), table_(std::move(table)), initial_(std::move(initial)) {
  if (order < 0 || symbols == 0) throw DataError("source needs order >= 0 and at least one symbol");
  if (table_.size() != power(symbols, order) * symbols || initial_.size() != symbols)
    throw DataError("source table has the wrong shape");
  auto checkRow = [](std::span<const double> row) {
    double s = 0.0;
    for (double p : row) {
      if (!(p >= 0.0)) throw DataError("source probabilities must be non-negative");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw DataError("source rows must sum to 1");
  };
  for (std::size_t r = 0; r < table_.size() / symbols; ++r)
    checkRow(std::span<const double>(table_).subspan(r * symbols, symbols));
  checkRow(initial_);
}

MintermSource MintermSource::random(int order, std::size_t symbols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto dirichletRow = [&](std::vector<double>& out) {
    double s = 0.0;
    const std::size_t first = out.size();
    for (std::size_t i = 0; i < symbols; ++i) {
      const double g = -std::log(1.0 - uniform01(rng));
      out.push_back(g);
      s += g;
    }
    for (std::size_t i = first; i < out.size(); ++i) out[i] /= s;
  };
  std::vector<double> table;
  const std::size_t rows = power(symbols, order);
  for (std::size_t r = 0; r < rows; ++r) dirichletRow(table);
  std::vector<double> initial;
  dirichletRow(initial);
  return MintermSource(order, symbols, std::move(table), std::move(initial));
}

std::span<const double> MintermSource::row(std::span<const std::uint32_t> context) const {
  if (static_cast<int>(context.size()) < order_) return initial_;
  std::size_t r = 0;
  for (std::size_t i = context.size() - static_cast<std::size_t>(order_); i < context.size(); ++i)
    r = r * symbols_ + context[i];
  return std::span<const double>(table_).subspan(r * symbols_, symbols_);
}

double MintermSource::probability(std::span<const std::uint32_t> context, std::size_t symbol) const {
  return row(context)[symbol];
}

std::size_t sampleIndex(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

// ---------------------------------------------------------------------------
// PatternMarkovChain

PatternMarkovChain::PatternMarkovChain(std::vector<double> matrix, std::vector<std::uint64_t> counts,
                                       std::vector<bool> finals, StateId initial)
    : matrix_(std::move(matrix)), counts_(std::move(counts)), finals_(std::move(finals)), initial_(initial) {
  const std::size_t l = finals_.size();
  if (matrix_.size() != l * l || counts_.size() != l * l || (l > 0 && initial_ >= l))
    throw DataError("chain dimensions are inconsistent");
  for (std::size_t i = 0; i < l; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < l; ++j) {
      const double v = matrix_[i * l + j];
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("transition probability outside [0, 1]");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-9) throw DataError("chain row " + std::to_string(i) + " does not sum to 1");
  }
}

namespace {

PatternMarkovChain fromCounts(const SymbolicDfa& dfa, std::vector<std::uint64_t> counts, bool laplace) {
  const std::size_t l = dfa.stateCount();
  std::vector<double> matrix(l * l, 0.0);
  std::vector<bool> finals(l);
  std::vector<std::size_t> unvisited;
  for (std::size_t i = 0; i < l; ++i) {
    finals[i] = dfa.isFinal(static_cast<StateId>(i));
    double* row = matrix.data() + i * l;
    if (finals[i]) {
      row[i] = 1.0;
      continue;
    }
    const auto succ = dfa.successors(static_cast<StateId>(i));
    const std::uint64_t* c = counts.data() + i * l;
    const double extra = laplace ? 1.0 : 0.0;
    double total = 0.0;
    for (StateId j : succ) total += static_cast<double>(c[j]) + extra;
    if (total == 0.0) {
      unvisited.push_back(i);
      for (StateId j : succ) row[j] = 1.0 / static_cast<double>(succ.size());
      continue;
    }
    for (StateId j : succ) row[j] = (static_cast<double>(c[j]) + extra) / total;
  }
  PatternMarkovChain pmc(std::move(matrix), std::move(counts), std::move(finals), dfa.initial());
  pmc.unvisited = std::move(unvisited);
  return pmc;
}

}  // namespace

PatternMarkovChain learnMatrix(const SymbolicDfa& dfa, std::span<const Word> sequences,
                               const LearnOptions& options) {
  const std::size_t l = dfa.stateCount();
  std::vector<std::uint64_t> counts(l * l, 0);
  bool any = false;
  for (const Word& seq : sequences) {
    StateId q = dfa.initial();
    for (auto symbol : seq) {
      any = true;
      const StateId n = dfa.next(q, symbol);
      ++counts[q * l + n];
      q = (dfa.isFinal(n) && options.resetOnDetection) ? dfa.initial() : n;
    }
  }
  if (!any) throw EmptyTraining();
  return fromCounts(dfa, std::move(counts), options.laplace);
}

PatternMarkovChain learnMatrix(const SymbolicDfa& dfa, std::span<const Event> training,
                               const LearnOptions& options) {
  if (training.empty()) throw EmptyTraining();
  const std::size_t l = dfa.stateCount();
  std::vector<std::uint64_t> counts(l * l, 0);
  std::unordered_map<std::string, StateId> runs;
  StateId single = dfa.initial();
  for (const Event& e : training) {
    StateId* q = &single;
    if (options.perPartition) q = &runs.try_emplace(e.partition, dfa.initial()).first->second;
    const auto [n, detected] = dfa.step(*q, e);
    ++counts[*q * l + n];
    *q = (detected && options.resetOnDetection) ? dfa.initial() : n;
  }
  return fromCounts(dfa, std::move(counts), options.laplace);
}

PatternMarkovChain analyticChain(const DisambiguatedDfa& d, const MintermSource& source) {
  const auto& dfa = d.dfa;
  if (source.symbols() != dfa.symbolCount()) throw DataError("source and automaton alphabets differ");
  const std::size_t l = dfa.stateCount();
  std::vector<double> matrix(l * l, 0.0);
  std::vector<bool> finals(l);
  for (std::size_t i = 0; i < l; ++i) {
    finals[i] = dfa.isFinal(static_cast<StateId>(i));
    if (finals[i]) {
      matrix[i * l + i] = 1.0;
      continue;
    }
    Word context;
    if (i < d.history.size() && d.history[i]) context = *d.history[i];
    if (static_cast<int>(context.size()) < source.order()) context.clear();
    const auto probs = source.row(context);
    for (std::size_t t = 0; t < dfa.symbolCount(); ++t)
      matrix[i * l + dfa.next(static_cast<StateId>(i), t)] += probs[t];
  }
  return PatternMarkovChain(std::move(matrix), std::vector<std::uint64_t>(l * l, 0), std::move(finals),
                            dfa.initial());
}

// ---------------------------------------------------------------------------
// Waiting times

AbsorbingForm::AbsorbingForm(const PatternMarkovChain& pmc) {
  const std::size_t l = pmc.size();
  position_.assign(l, -1);
  for (std::size_t i = 0; i < l; ++i)
    if (!pmc.isFinal(i)) {
      position_[i] = static_cast<std::int64_t>(transient_.size());
      transient_.push_back(i);
    }
  rows_.resize(transient_.size());
  completion_.assign(transient_.size(), 0.0);
  for (std::size_t a = 0; a < transient_.size(); ++a) {
    const auto row = pmc.row(transient_[a]);
    for (std::size_t j = 0; j < l; ++j) {
      if (row[j] == 0.0) continue;
      if (pmc.isFinal(j)) {
        completion_[a] += row[j];
      } else {
        rows_[a].emplace_back(static_cast<std::size_t>(position_[j]), row[j]);
      }
    }
  }
}

std::optional<std::size_t> AbsorbingForm::positionOf(std::size_t row) const {
  if (row >= position_.size() || position_[row] < 0) return std::nullopt;
  return static_cast<std::size_t>(position_[row]);
}

std::vector<double> AbsorbingForm::firstPassage(std::vector<double> xi, std::size_t horizon) const {
  std::vector<double> probs(horizon, 0.0);
  std::vector<double> next(xi.size());
  for (std::size_t n = 0; n < horizon; ++n) {
    // P(W = n+1) = xi N^n (I - N) 1
    double mass = 0.0;
    for (std::size_t a = 0; a < xi.size(); ++a) mass += xi[a] * completion_[a];
    probs[n] = mass;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < xi.size(); ++a) {
      if (xi[a] == 0.0) continue;
      for (const auto& [b, v] : rows_[a]) next[b] += xi[a] * v;
    }
    xi.swap(next);
  }
  return probs;
}

std::size_t AbsorbingForm::horizonFor(std::size_t row, double target, std::size_t cap) const {
  const auto pos = positionOf(row);
  if (!pos) throw FinalStateQuery(row);
  std::vector<double> xi(transient_.size(), 0.0), next(transient_.size());
  xi[*pos] = 1.0;
  double cumulative = 0.0;
  for (std::size_t n = 1; n <= cap; ++n) {
    for (std::size_t a = 0; a < xi.size(); ++a) cumulative += xi[a] * completion_[a];
    if (cumulative >= target - kMassTolerance) return n;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t a = 0; a < xi.size(); ++a) {
      if (xi[a] == 0.0) continue;
      for (const auto& [b, v] : rows_[a]) next[b] += xi[a] * v;
    }
    xi.swap(next);
  }
  return 0;
}

namespace {

WaitingTimeDistribution finish(std::size_t state, std::size_t horizon, std::vector<double> probs) {
  WaitingTimeDistribution d;
  d.state = state;
  d.horizon = horizon;
  double s = 0.0;
  for (double p : probs) s += p;
  d.tailMass = std::max(0.0, 1.0 - s);
  d.probs = std::move(probs);
  return d;
}

}  // namespace

WaitingTimeDistribution waitingTimeDistribution(const PatternMarkovChain& pmc, std::size_t state,
                                                std::size_t horizon) {
  if (state >= pmc.size()) throw DataError("state " + std::to_string(state) + " is not a chain row");
  if (pmc.isFinal(state)) throw FinalStateQuery(state);
  if (horizon < 1) throw DataError("horizon must be at least 1");
  const AbsorbingForm form(pmc);
  std::vector<double> xi(form.transientCount(), 0.0);
  xi[*form.positionOf(state)] = 1.0;
  return finish(state, horizon, form.firstPassage(std::move(xi), horizon));
}

WaitingTimeDistribution waitingTimeDistribution(const PatternMarkovChain& pmc, std::span<const double> xiInit,
                                                std::size_t horizon) {
  if (xiInit.size() != pmc.size()) throw DataError("initial distribution has the wrong length");
  if (horizon < 1) throw DataError("horizon must be at least 1");
  const AbsorbingForm form(pmc);
  std::vector<double> xi(form.transientCount(), 0.0);
  for (std::size_t i = 0; i < pmc.size(); ++i)
    if (auto pos = form.positionOf(i)) xi[*pos] = xiInit[i];
  return finish(pmc.size(), horizon, form.firstPassage(std::move(xi), horizon));
}

// ---------------------------------------------------------------------------
// Forecast intervals

Forecast forecastInterval(std::span<const double> probs, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw DataError("theta must lie in (0, 1]");
  double total = 0.0;
  for (double p : probs) total += p;
  if (total < theta - kMassTolerance) throw HorizonTooShort({});

  // Two pointers: for every end, the latest start keeping mass >= theta gives the
  // shortest window ending there. Masses are non-negative, so starts only advance.
  std::size_t start = 0;
  double mass = 0.0;
  std::size_t bestStart = 0, bestEnd = probs.size();
  double bestMass = -1.0;
  for (std::size_t end = 0; end < probs.size(); ++end) {
    mass += probs[end];
    while (start < end && mass - probs[start] >= theta - kMassTolerance) {
      mass -= probs[start];
      ++start;
    }
    if (mass < theta - kMassTolerance) continue;
    const std::size_t len = end - start;
    const std::size_t bestLen = bestEnd - bestStart;
    if (bestMass < 0.0 || len < bestLen || (len == bestLen && mass > bestMass)) {
      bestStart = start;
      bestEnd = end;
      bestMass = mass;
    }
  }
  Forecast f;
  f.start = static_cast<int>(bestStart + 1);
  f.end = static_cast<int>(bestEnd + 1);
  f.probability = 0.0;
  for (std::size_t i = bestStart; i <= bestEnd; ++i) f.probability += probs[i];
  return f;
}

Forecast forecastInterval(const WaitingTimeDistribution& dist, double theta) {
  try {
    Forecast f = forecastInterval(dist.probs, theta);
    f.state = dist.state;
    return f;
  } catch (const HorizonTooShort&) {
    throw HorizonTooShort({dist.state});
  }
}

std::size_t defaultHorizon(const PatternMarkovChain& pmc, std::size_t state, double theta) {
  const AbsorbingForm form(pmc);
  const std::size_t h = form.horizonFor(state, std::max(theta, 0.999), kMaxHorizon);
  return h == 0 ? kMaxHorizon : h;
}

std::size_t ForecastTable::size() const {
  return static_cast<std::size_t>(
      std::count_if(byState.begin(), byState.end(), [](const auto& f) { return f.has_value(); }));
}

ForecastTable buildForecastTable(const PatternMarkovChain& pmc, double theta, std::size_t horizon,
                                 bool allowPartial) {
  if (!(theta > 0.0 && theta <= 1.0)) throw DataError("theta must lie in (0, 1]");
  const AbsorbingForm form(pmc);
  ForecastTable table;
  table.theta = theta;
  table.byState.resize(pmc.size());

  // Only states reachable from the initial state through positive transitions.
  std::vector<bool> reachable(pmc.size(), false);
  std::vector<std::size_t> stack;
  if (pmc.size() > 0) {
    reachable[pmc.initial()] = true;
    stack.push_back(pmc.initial());
  }
  while (!stack.empty()) {
    const std::size_t i = stack.back();
    stack.pop_back();
    const auto row = pmc.row(i);
    for (std::size_t j = 0; j < row.size(); ++j)
      if (row[j] > 0.0 && !reachable[j]) {
        reachable[j] = true;
        stack.push_back(j);
      }
  }

  std::vector<std::size_t> failures;
  for (std::size_t q = 0; q < pmc.size(); ++q) {
    if (pmc.isFinal(q) || !reachable[q]) continue;
    std::size_t h = horizon;
    if (h == 0) {
      h = form.horizonFor(q, std::max(theta, 0.999), kMaxHorizon);
      if (h == 0) h = kMaxHorizon;
    }
    std::vector<double> xi(form.transientCount(), 0.0);
    xi[*form.positionOf(q)] = 1.0;
    const auto probs = form.firstPassage(std::move(xi), h);
    try {
      Forecast f = forecastInterval(probs, theta);
      f.state = q;
      table.byState[q] = f;
    } catch (const HorizonTooShort&) {
      failures.push_back(q);
    }
  }
  if (!failures.empty() && !allowPartial) throw HorizonTooShort(failures);
  table.failures = std::move(failures);
  return table;
}

// ---------------------------------------------------------------------------
// Serialization

std::string exportPmc(const PatternMarkovChain& pmc) {
  using nlohmann::json;
  const std::size_t l = pmc.size();
  json j;
  j["states"] = l;
  j["initial"] = pmc.initial();
  json index = json::array();
  for (std::size_t i = 0; i < l; ++i) index.push_back({{"row", i}, {"state", pmc.stateOf(i)}});
  j["state_index"] = index;
  std::vector<std::size_t> finals;
  for (std::size_t i = 0; i < l; ++i)
    if (pmc.isFinal(i)) finals.push_back(i);
  j["finals"] = finals;
  json matrix = json::array(), counts = json::array();
  for (std::size_t i = 0; i < l; ++i) {
    json mr = json::array(), cr = json::array();
    for (std::size_t k = 0; k < l; ++k) {
      mr.push_back(pmc.at(i, k));
      cr.push_back(pmc.count(i, k));
    }
    matrix.push_back(std::move(mr));
    counts.push_back(std::move(cr));
  }
  j["matrix"] = std::move(matrix);
  j["counts"] = std::move(counts);
  j["unvisited"] = pmc.unvisited;
  return j.dump(1);
}

PatternMarkovChain importPmc(const std::string& text) {
  using nlohmann::json;
  try {
    const json j = json::parse(text);
    const auto l = j.at("states").get<std::size_t>();
    std::vector<bool> finals(l, false);
    for (auto f : j.at("finals").get<std::vector<std::size_t>>()) {
      if (f >= l) throw DataError("final row out of range");
      finals[f] = true;
    }
    for (const auto& entry : j.at("state_index"))
      if (entry.at("row").get<std::size_t>() != entry.at("state").get<std::size_t>())
        throw DataError("only identity state indices are supported");
    std::vector<double> matrix;
    std::vector<std::uint64_t> counts;
    const auto& m = j.at("matrix");
    const auto& c = j.at("counts");
    if (m.size() != l || c.size() != l) throw DataError("matrix row count mismatch");
    for (std::size_t i = 0; i < l; ++i) {
      if (m[i].size() != l || c[i].size() != l) throw DataError("matrix column count mismatch");
      for (std::size_t k = 0; k < l; ++k) {
        matrix.push_back(m[i][k].get<double>());
        counts.push_back(c[i][k].get<std::uint64_t>());
      }
    }
    PatternMarkovChain pmc(std::move(matrix), std::move(counts), std::move(finals),
                           j.at("initial").get<StateId>());
    if (j.contains("unvisited")) pmc.unvisited = j["unvisited"].get<std::vector<std::size_t>>();
    return pmc;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed chain JSON: ") + e.what());
  }
}

}  // namespace cef
