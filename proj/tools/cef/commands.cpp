#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cef/algebra.hpp"
#include "cef/engine.hpp"
#include "cef/geo.hpp"
#include "cef/pattern.hpp"
#include "cef/pmc.hpp"
#include "cef/sfa.hpp"
#include "cef/stream_io.hpp"
#include "cef/synthetic.hpp"
#include "json.hpp"

namespace cef::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Config {
  std::string pattern;
  std::optional<int> order;
  std::optional<double> theta;
  std::optional<int> horizon;
  std::string train;
  std::string test;
  std::string regions;
  std::string vessels;
  std::optional<std::string> extras;
  std::uint64_t seed = 1;
  std::uint64_t sourceSeed = 1;
  std::size_t workers = 1;
  std::string mode = "recfor";
  std::string out = ".";
  std::string sat = "assume";
  std::string pmc;
  std::string detections;
  std::string forecasts;
  std::optional<std::string> thetas;
  std::optional<std::string> orders;
  std::size_t events = 100'000;
  std::size_t partitions = 10;
  bool laplace = false;
  bool noReset = false;
  bool suppressRepeats = false;
  bool strict = false;
};

struct Loaded {
  geo::GeoContext ctx;
  PatternSpec spec;
  int order = 0;
  double theta = 0.5;
  std::size_t horizon = 0;
  SatOracle oracle;
};

void writeFile(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  f << text;
}

fs::path outDir(const Config& cfg) {
  fs::path dir(cfg.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory " + cfg.out + ": " + ec.message());
  return dir;
}

std::string readText(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void requireFlag(const std::string& value, const char* flag, const char* command) {
  if (value.empty()) throw CLI::RequiredError(std::string(command) + " needs " + flag);
}

Loaded load(const Config& cfg) {
  Loaded l;
  if (!cfg.regions.empty()) geo::loadRegions(cfg.regions, l.ctx);
  if (!cfg.vessels.empty()) geo::loadFishingVessels(cfg.vessels, l.ctx);
  const auto registry = geo::builtinRegistry(l.ctx);
  l.spec = loadPattern(cfg.pattern, registry);
  if (cfg.extras) {
    l.spec.extras = (*cfg.extras == "none" || cfg.extras->empty()) ? std::vector<PredicateAtom>{}
                                                                    : parseAtomList(*cfg.extras, registry);
    std::set<std::string> keys;
    for (const auto& a : l.spec.patternAtoms()) keys.insert(a.key());
    for (const auto& a : l.spec.extras)
      if (!keys.insert(a.key()).second) throw DataError("extra feature " + a.toString() + " is already in use");
  }
  l.order = cfg.order.value_or(l.spec.order);
  l.theta = cfg.theta.value_or(l.spec.theta);
  if (!(l.theta > 0.0 && l.theta <= 1.0)) throw DataError("theta must lie in (0, 1]");
  if (l.order < 0) throw DataError("order must be non-negative");
  l.horizon = static_cast<std::size_t>(std::max(0, cfg.horizon.value_or(l.spec.horizon.value_or(0))));
  l.oracle.strategy = cfg.sat == "interval" ? SatStrategy::IntervalPruning : SatStrategy::AssumeAllSatisfiable;
  return l;
}

LearnOptions learnOptions(const Config& cfg) {
  LearnOptions o;
  o.laplace = cfg.laplace;
  o.resetOnDetection = !cfg.noReset;
  return o;
}

EngineOptions engineOptions(const Config& cfg) {
  EngineOptions o;
  o.resetOnDetection = !cfg.noReset;
  o.suppressRepeats = cfg.suppressRepeats;
  o.strict = cfg.strict;
  return o;
}

PatternMarkovChain obtainChain(const Config& cfg, const SymbolicDfa& dfa, std::ostream& log) {
  PatternMarkovChain pmc;
  if (!cfg.pmc.empty()) {
    pmc = importPmc(readText(cfg.pmc));
    if (pmc.size() != dfa.stateCount())
      throw DataError("chain in " + cfg.pmc + " has " + std::to_string(pmc.size()) + " states, automaton has " +
                      std::to_string(dfa.stateCount()));
  } else {
    requireFlag(cfg.train, "--train or --pmc", "forecasting");
    const auto training = readEvents(cfg.train);
    pmc = learnMatrix(dfa, training, learnOptions(cfg));
  }
  if (!pmc.unvisited.empty()) {
    log << "warning: " << pmc.unvisited.size() << " state(s) never visited in training:";
    const std::size_t shown = std::min<std::size_t>(pmc.unvisited.size(), 12);
    for (std::size_t i = 0; i < shown; ++i) log << ' ' << pmc.unvisited[i];
    if (shown < pmc.unvisited.size()) log << " ...";
    log << '\n';
  }
  return pmc;
}

std::vector<double> parseDoubles(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw DataError("malformed number '" + item + "' in list");
    }
  }
  return v;
}

json throughputJson(const ThroughputReport& r) {
  return {{"mode", toString(r.mode)},           {"events_processed", r.eventsProcessed},
          {"wall_seconds", r.wallSeconds},      {"events_per_second", r.eventsPerSecond},
          {"valid", r.valid},                   {"detections", r.detections},
          {"forecasts", r.forecasts}};
}

// AIS-like kinematics plus a categorical `type` in {a, b}.
AttributeSampler streamSampler(const geo::GeoContext& ctx) {
  return [ais = aisSampler(ctx)](std::mt19937_64& rng) {
    Event e = ais(rng);
    e.set("type", std::string(uniform01(rng) < 0.5 ? "a" : "b"));
    return e;
  };
}

// Random order-m source whose rows only put mass on minterms the emitter can realise.
MintermSource invertibleSource(int order, const AttributeEmitter& emitter, std::uint64_t seed) {
  const std::size_t k = emitter.minterms().size();
  std::vector<bool> usable(k);
  bool any = false;
  for (std::size_t t = 0; t < k; ++t) any |= (usable[t] = emitter.invertible(t));
  if (!any) throw UninvertibleMinterm("(every minterm)");
  const auto base = MintermSource::random(order, k, seed);
  std::vector<Word> contexts{{}};
  for (int d = 0; d < order; ++d) {
    std::vector<Word> longer;
    for (const auto& c : contexts)
      for (std::uint32_t t = 0; t < k; ++t) {
        Word w = c;
        w.push_back(t);
        longer.push_back(std::move(w));
      }
    contexts = std::move(longer);
  }
  auto restrict = [&](std::span<const double> row) {
    std::vector<double> r(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t t = 0; t < k; ++t) sum += usable[t] ? r[t] : (r[t] = 0.0);
    for (auto& x : r) x = sum > 0.0 ? x / sum : 0.0;
    if (sum <= 0.0)
      for (std::size_t t = 0; t < k; ++t) r[t] = usable[t] ? 1.0 : 0.0;
    double s2 = 0.0;
    for (auto x : r) s2 += x;
    for (auto& x : r) x /= s2;
    return r;
  };
  std::vector<double> table;
  for (const auto& c : contexts) {
    auto r = restrict(base.row(c));
    table.insert(table.end(), r.begin(), r.end());
  }
  return {order, k, std::move(table), restrict(base.row(Word{}))};
}

std::vector<Event> syntheticStream(const Loaded& l, const Config& cfg) {
  SatOracle pruning{SatStrategy::IntervalPruning};
  auto minterms = std::make_shared<const MintermSet>(l.spec.alphabetAtoms(), pruning);
  AttributeEmitter emitter(minterms, streamSampler(l.ctx), 16, 400'000, cfg.sourceSeed);
  const auto source = invertibleSource(l.order, emitter, cfg.sourceSeed);
  return generateSyntheticStream(source, emitter, cfg.events, partitionKeys(cfg.partitions), cfg.seed);
}

// --- subcommands -----------------------------------------------------------

int commandCompile(const Config& cfg, std::ostream& out, std::ostream&) {
  const Loaded l = load(cfg);
  const auto c = compilePattern(l.spec, l.order, l.oracle);
  const auto dir = outDir(cfg);
  writeFile(dir / "automaton.json", exportAutomaton(c.disambiguated));
  json stats = {{"order", l.order},
                {"minterms", c.deterministic.symbolCount()},
                {"states_deterministic", c.deterministic.stateCount()},
                {"states_disambiguated", c.disambiguated.dfa.stateCount()}};
  writeFile(dir / "compile.json", stats.dump(2) + "\n");
  out << "pattern:    " << toString(l.spec.ast) << '\n'
      << "minterms:   " << c.deterministic.symbolCount() << '\n'
      << "states:     " << c.deterministic.stateCount() << " deterministic, " << c.disambiguated.dfa.stateCount()
      << " at order " << l.order << '\n';
  return kOk;
}

int commandLearn(const Config& cfg, std::ostream& out, std::ostream& log) {
  requireFlag(cfg.train, "--train", "learn");
  const Loaded l = load(cfg);
  const auto c = compilePattern(l.spec, l.order, l.oracle);
  const auto pmc = obtainChain(cfg, c.disambiguated.dfa, log);
  const auto table = buildForecastTable(pmc, l.theta, l.horizon, true);
  const auto dir = outDir(cfg);
  writeFile(dir / "automaton.json", exportAutomaton(c.disambiguated));
  writeFile(dir / "pmc.json", exportPmc(pmc));
  std::ostringstream csv;
  csv << "state,start,end,probability\n";
  for (std::size_t q = 0; q < table.byState.size(); ++q)
    if (const auto& f = table.byState[q])
      csv << q << ',' << f->start << ',' << f->end << ',' << formatDouble(f->probability) << '\n';
  writeFile(dir / "forecast_table.csv", csv.str());
  for (auto q : table.failures)
    log << "warning: state " << q << " does not reach mass " << l.theta << " within the horizon\n";
  out << "states: " << pmc.size() << ", forecasts: " << table.size() << ", unvisited: " << pmc.unvisited.size()
      << '\n';
  return kOk;
}

int commandRun(const Config& cfg, std::ostream& out, std::ostream& log) {
  requireFlag(cfg.test, "--test", "run");
  const Loaded l = load(cfg);
  auto c = compilePattern(l.spec, l.order, l.oracle);
  auto dfa = std::make_shared<const SymbolicDfa>(c.disambiguated.dfa);
  std::shared_ptr<const ForecastTable> table;
  if (cfg.mode == "recfor") {
    const auto pmc = obtainChain(cfg, *dfa, log);
    table = std::make_shared<const ForecastTable>(buildForecastTable(pmc, l.theta, l.horizon));
  }
  const auto events = readEvents(cfg.test);
  const auto result = replay(events, dfa, table, engineOptions(cfg), cfg.workers);
  const auto dir = outDir(cfg);
  {
    std::ofstream f(dir / "detections.csv", std::ios::binary);
    writeDetectionsCsv(f, result.detections);
  }
  if (result.malformed > 0) log << "warning: skipped " << result.malformed << " malformed event(s)\n";
  out << "events: " << events.size() << ", detections: " << result.detections.size();
  if (table) {
    const auto report = evaluateForecasts(result.forecasts, result.detections);
    std::ofstream f(dir / "forecasts.csv", std::ios::binary);
    writeForecastsCsv(f, result.forecasts, &report.outcomes);
    writeFile(dir / "report.json", reportJson(report) + "\n");
    out << ", forecasts: " << result.forecasts.size() << ", precision: " << report.precision
        << ", spread: " << report.spreadMean;
  }
  out << '\n';
  return kOk;
}

int commandEvaluate(const Config& cfg, std::ostream& out, std::ostream&) {
  const fs::path dir(cfg.out);
  const std::string detPath = cfg.detections.empty() ? (dir / "detections.csv").string() : cfg.detections;
  const std::string fcPath = cfg.forecasts.empty() ? (dir / "forecasts.csv").string() : cfg.forecasts;
  std::ifstream det(detPath), fc(fcPath);
  if (!det) throw DataError("cannot open " + detPath);
  if (!fc) throw DataError("cannot open " + fcPath);
  const auto report = evaluateForecasts(readForecastsCsv(fc), readDetectionsCsv(det));
  writeFile(outDir(cfg) / "report.json", reportJson(report) + "\n");
  out << "forecasts: " << report.forecastsScored << ", correct: " << report.correct
      << ", precision: " << report.precision << ", spread: " << report.spreadMean << '\n';
  return kOk;
}

int commandSweep(const Config& cfg, std::ostream& out, std::ostream& log) {
  requireFlag(cfg.train, "--train", "sweep");
  requireFlag(cfg.test, "--test", "sweep");
  const Loaded base = load(cfg);
  const auto thetas = cfg.thetas ? parseDoubles(*cfg.thetas) : std::vector<double>{base.theta};
  std::vector<int> orders;
  if (cfg.orders) {
    for (double d : parseDoubles(*cfg.orders)) {
      if (d < 0 || d != std::floor(d)) throw DataError("orders must be non-negative integers");
      orders.push_back(static_cast<int>(d));
    }
  } else {
    orders.push_back(base.order);
  }
  for (double t : thetas)
    if (!(t > 0.0 && t <= 1.0)) throw DataError("theta must lie in (0, 1]");

  std::vector<std::pair<std::string, std::vector<PredicateAtom>>> variants{{"none", {}}};
  if (!base.spec.extras.empty()) variants.emplace_back("all", base.spec.extras);

  std::ostringstream csv;
  csv << "theta,order,extras,precision,spread_mean,forecasts,correct,detections,unforecast_states\n";
  if (!thetas.empty() && !orders.empty()) {
    const auto training = readEvents(cfg.train);
    const auto testing = readEvents(cfg.test);
    for (const auto& [name, extras] : variants) {
      PatternSpec spec = base.spec;
      spec.extras = extras;
      for (int m : orders) {
        const auto c = compilePattern(spec, m, base.oracle);
        auto dfa = std::make_shared<const SymbolicDfa>(c.disambiguated.dfa);
        const auto pmc = learnMatrix(*dfa, training, learnOptions(cfg));
        for (double theta : thetas) {
          auto table =
              std::make_shared<const ForecastTable>(buildForecastTable(pmc, theta, base.horizon, true));
          const auto r = replay(testing, dfa, table, engineOptions(cfg), cfg.workers);
          const auto rep = evaluateForecasts(r.forecasts, r.detections);
          csv << formatDouble(theta) << ',' << m << ',' << name << ',' << formatDouble(rep.precision) << ','
              << formatDouble(rep.spreadMean) << ',' << rep.forecastsScored << ',' << rep.correct << ','
              << rep.detections << ',' << table->failures.size() << '\n';
          log << "theta=" << theta << " order=" << m << " extras=" << name << " precision=" << rep.precision
              << " spread=" << rep.spreadMean << '\n';
        }
      }
    }
  }
  writeFile(outDir(cfg) / "sweep.csv", csv.str());
  out << "rows: " << thetas.size() * orders.size() * variants.size() << '\n';
  return kOk;
}

int commandBench(const Config& cfg, std::ostream& out, std::ostream& log) {
  const Loaded l = load(cfg);
  const auto c = compilePattern(l.spec, l.order, l.oracle);
  auto dfa = std::make_shared<const SymbolicDfa>(c.disambiguated.dfa);
  const auto stream = cfg.test.empty() ? syntheticStream(l, cfg) : readEvents(cfg.test);
  PatternMarkovChain pmc;
  if (!cfg.train.empty() || !cfg.pmc.empty()) {
    pmc = obtainChain(cfg, *dfa, log);
  } else {
    pmc = learnMatrix(*dfa, stream, learnOptions(cfg));
  }
  auto table = std::make_shared<const ForecastTable>(buildForecastTable(pmc, l.theta, l.horizon, true));

  const auto rec = benchmarkThroughput(stream, dfa, table, Mode::Recognition);
  const auto recfor = benchmarkThroughput(stream, dfa, table, Mode::RecognitionAndForecasting);
  const double slowdown =
      rec.valid && recfor.valid && recfor.eventsPerSecond > 0 ? rec.eventsPerSecond / recfor.eventsPerSecond : 0.0;
  json j = {{"events", stream.size()},
            {"reports", {throughputJson(rec), throughputJson(recfor)}},
            {"slowdown", slowdown}};
  writeFile(outDir(cfg) / "bench.json", j.dump(2) + "\n");
  out << "rec:     " << rec.eventsPerSecond << " events/s\n"
      << "rec+for: " << recfor.eventsPerSecond << " events/s\n"
      << "slowdown: " << slowdown << '\n';
  return kOk;
}

int commandGenerate(const Config& cfg, std::ostream& out, std::ostream&) {
  const Loaded l = load(cfg);
  const auto events = syntheticStream(l, cfg);
  writeEvents((outDir(cfg) / "stream.csv").string(), events);
  out << "events: " << events.size() << ", partitions: " << cfg.partitions << '\n';
  return kOk;
}

}  // namespace

int runCli(int argc, const char* const* argv, std::ostream& out, std::ostream& log) {
  CLI::App app{"Complex event recognition and forecasting over symbolic automata"};
  app.require_subcommand(1);
  Config cfg;

  auto common = [&](CLI::App* sub, bool needsPattern) {
    auto* p = sub->add_option("--pattern", cfg.pattern, "Pattern file")->check(CLI::ExistingFile);
    if (needsPattern) p->required();
    sub->add_option("--order", cfg.order, "Markov order m")->check(CLI::NonNegativeNumber);
    sub->add_option("--theta", cfg.theta, "Forecasting confidence threshold in (0, 1]")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_option("--horizon", cfg.horizon, "Waiting-time horizon (0 picks one per state)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--regions", cfg.regions, "Regions JSON file")->check(CLI::ExistingFile);
    sub->add_option("--vessels", cfg.vessels, "Fishing vessel ids, one per line")->check(CLI::ExistingFile);
    sub->add_option("--extras", cfg.extras, "Extra feature atoms, e.g. \"[SpeedBetween(x,0,10)]\", or none");
    sub->add_option("--sat", cfg.sat, "Minterm satisfiability: assume | interval")
        ->check(CLI::IsMember({"assume", "interval"}));
    sub->add_option("--seed", cfg.seed, "Random seed");
    sub->add_option("--workers", cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out", cfg.out, "Output directory");
    sub->add_flag("--laplace", cfg.laplace, "Add-one smoothing of the learned matrix");
    sub->add_flag("--no-reset", cfg.noReset, "Keep running after a detection instead of restarting");
    sub->add_flag("--suppress-repeats", cfg.suppressRepeats, "Emit forecasts only on state changes");
    sub->add_flag("--strict", cfg.strict, "Abort on malformed events");
  };

  auto* compile = app.add_subcommand("compile", "Compile a pattern and dump its automaton");
  common(compile, true);

  auto* learn = app.add_subcommand("learn", "Learn the Pattern Markov Chain from a training stream");
  common(learn, true);
  learn->add_option("--train", cfg.train, "Training stream")->required()->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "Recognise (and forecast) over a test stream");
  common(run, true);
  run->add_option("--train", cfg.train, "Training stream")->check(CLI::ExistingFile);
  run->add_option("--pmc", cfg.pmc, "Previously learned pmc.json")->check(CLI::ExistingFile);
  run->add_option("--test", cfg.test, "Test stream")->required()->check(CLI::ExistingFile);
  run->add_option("--mode", cfg.mode, "rec | recfor")->check(CLI::IsMember({"rec", "recfor"}));

  auto* evaluate = app.add_subcommand("evaluate", "Score a forecast log against a detection log");
  evaluate->add_option("--detections", cfg.detections, "detections.csv (default: <out>/detections.csv)");
  evaluate->add_option("--forecasts", cfg.forecasts, "forecasts.csv (default: <out>/forecasts.csv)");
  evaluate->add_option("--out", cfg.out, "Output directory");

  auto* sweep = app.add_subcommand("sweep", "Precision and spread over a grid of thresholds and orders");
  common(sweep, true);
  sweep->add_option("--train", cfg.train, "Training stream")->required()->check(CLI::ExistingFile);
  sweep->add_option("--test", cfg.test, "Test stream")->required()->check(CLI::ExistingFile);
  sweep->add_option("--thetas", cfg.thetas, "Comma-separated thresholds");
  sweep->add_option("--orders", cfg.orders, "Comma-separated orders");

  auto* bench = app.add_subcommand("bench", "Throughput with forecasting off and on");
  common(bench, true);
  bench->add_option("--train", cfg.train, "Training stream")->check(CLI::ExistingFile);
  bench->add_option("--pmc", cfg.pmc, "Previously learned pmc.json")->check(CLI::ExistingFile);
  bench->add_option("--test", cfg.test, "Stream to replay (default: synthetic)")->check(CLI::ExistingFile);
  bench->add_option("--events", cfg.events, "Synthetic stream length");
  bench->add_option("--source-seed", cfg.sourceSeed, "Seed of the synthetic Markov source");
  bench->add_option("--partitions", cfg.partitions, "Synthetic partition count")->check(CLI::PositiveNumber);

  auto* generate = app.add_subcommand("generate", "Write a synthetic stream for a pattern's alphabet");
  common(generate, true);
  generate->add_option("--events", cfg.events, "Stream length");
  generate->add_option("--source-seed", cfg.sourceSeed, "Seed of the Markov source (shared by train and test streams)");
  generate->add_option("--partitions", cfg.partitions, "Partition count")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    log << "usage error: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      log << sub->help();
    } else {
      log << app.help();
    }
    return kUsage;
  }

  try {
    if (*compile) return commandCompile(cfg, out, log);
    if (*learn) return commandLearn(cfg, out, log);
    if (*run) return commandRun(cfg, out, log);
    if (*evaluate) return commandEvaluate(cfg, out, log);
    if (*sweep) return commandSweep(cfg, out, log);
    if (*bench) return commandBench(cfg, out, log);
    if (*generate) return commandGenerate(cfg, out, log);
  } catch (const CLI::ParseError& e) {
    log << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    log << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const InvariantViolation& e) {
    log << "internal error: " << e.what() << '\n';
    return kInternalError;
  } catch (const std::exception& e) {
    log << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
  return kUsage;
}

}  // namespace cef::cli
