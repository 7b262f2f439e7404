#include <benchmark/benchmark.h>

#include <memory>
#include <random>

#include "cef/engine.hpp"
#include "cef/pattern.hpp"
#include "cef/pmc.hpp"
#include "cef/sfa.hpp"
#include "cef/synthetic.hpp"

using namespace cef;

namespace {

const char* kAbbb = "x · y · y · y WHERE Equals(x, type, a) AND NOT Equals(y, type, a)";

struct Fixture {
  std::shared_ptr<const SymbolicDfa> dfa;
  PatternMarkovChain pmc;
  std::shared_ptr<const ForecastTable> table;
  std::vector<Event> stream;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    Fixture x;
    const auto d = compilePattern(parsePattern(kAbbb, genericRegistry()), 2).disambiguated;
    x.dfa = std::make_shared<const SymbolicDfa>(d.dfa);
    x.pmc = analyticChain(d, MintermSource({0.3, 0.7}));
    x.table = std::make_shared<const ForecastTable>(buildForecastTable(x.pmc, 0.5));
    AttributeEmitter emitter(x.dfa->alphabetPtr(), [](std::mt19937_64& rng) {
      Event e;
      e.set("type", std::string(uniform01(rng) < 0.5 ? "a" : "b"));
      return e;
    });
    x.stream = generateSyntheticStream(MintermSource({0.3, 0.7}), emitter, 200'000, partitionKeys(200), 1);
    return x;
  }();
  return f;
}

void ingest(benchmark::State& state, bool forecasting) {
  const auto& f = fixture();
  EngineOptions o;
  o.record = false;
  Engine engine(f.dfa, forecasting ? f.table : nullptr, o);
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(engine.ingest(f.stream[i]));
    if (++i == f.stream.size()) i = 0;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}

void BM_IngestRecognition(benchmark::State& state) { ingest(state, false); }
void BM_IngestForecasting(benchmark::State& state) { ingest(state, true); }

void BM_Classify(benchmark::State& state) {
  const auto& f = fixture();
  const auto& ms = f.dfa->alphabet();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ms.classify(f.stream[i]));
    if (++i == f.stream.size()) i = 0;
  }
}

void BM_WaitingTime(benchmark::State& state) {
  const auto& f = fixture();
  const auto horizon = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(waitingTimeDistribution(f.pmc, f.pmc.initial(), horizon));
}

}  // namespace

BENCHMARK(BM_IngestRecognition);
BENCHMARK(BM_IngestForecasting);
BENCHMARK(BM_Classify);
BENCHMARK(BM_WaitingTime)->Arg(50)->Arg(200)->Arg(1000);

BENCHMARK_MAIN();
