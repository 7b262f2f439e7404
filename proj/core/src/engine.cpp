#include "cef/engine.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <map>
#include <thread>

namespace cef {

Engine::Engine(std::shared_ptr<const SymbolicDfa> dfa, std::shared_ptr<const ForecastTable> table,
               EngineOptions options)
    : dfa_(std::move(dfa)), table_(std::move(table)), options_(options) {
  if (!dfa_) throw InvariantViolation("engine needs an automaton");
}

const Engine::Run* Engine::run(std::string_view partition) const {
  auto it = runs_.find(partition);
  return it == runs_.end() ? nullptr : &it->second;
}

IngestResult Engine::ingest(const Event& event) {
  IngestResult result;
  auto it = runs_.find(std::string_view(event.partition));
  if (it == runs_.end()) it = runs_.emplace(event.partition, Run{dfa_->initial(), 0}).first;
  Run& run = it->second;

  StateId next;
  bool detected;
  try {
    std::tie(next, detected) = dfa_->step(run.state, event);
  } catch (const DataError&) {
    if (options_.strict) throw;
    ++malformed_;
    result.skipped = true;
    return result;
  }

  ++run.eventsSeen;
  const StateId previous = run.state;
  if (detected) {
    result.detected = true;
    ++detectionCount_;
    if (options_.record) detections_.push_back({event.partition, run.eventsSeen, event.timestamp});
    run.state = options_.resetOnDetection ? dfa_->initial() : next;
    return result;
  }
  run.state = next;

  if (table_ && !(options_.suppressRepeats && next == previous)) {
    if (const Forecast* f = table_->find(next)) {
      result.forecast = EmittedForecast{event.partition, run.eventsSeen, f->start, f->end, f->probability};
      ++forecastCount_;
      if (options_.record) forecasts_.push_back(*result.forecast);
    }
  }
  return result;
}

ReplayResult replay(std::span<const Event> stream, std::shared_ptr<const SymbolicDfa> dfa,
                    std::shared_ptr<const ForecastTable> table, const EngineOptions& options,
                    std::size_t workers) {
  workers = std::max<std::size_t>(1, workers);
  EngineOptions opts = options;
  opts.record = false;

  struct Shard {
    std::vector<std::pair<std::size_t, Detection>> detections;
    std::vector<std::pair<std::size_t, EmittedForecast>> forecasts;
    std::uint64_t malformed = 0;
  };
  std::vector<Shard> shards(workers);

  auto work = [&](std::size_t w) {
    Engine engine(dfa, table, opts);
    Shard& shard = shards[w];
    const std::hash<std::string_view> hash;
    for (std::size_t i = 0; i < stream.size(); ++i) {
      const Event& e = stream[i];
      if (workers > 1 && hash(e.partition) % workers != w) continue;
      IngestResult r = engine.ingest(e);
      if (r.detected) shard.detections.emplace_back(i, Detection{e.partition, engine.run(e.partition)->eventsSeen, e.timestamp});
      if (r.forecast) shard.forecasts.emplace_back(i, std::move(*r.forecast));
    }
    shard.malformed = engine.malformed();
  };

  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (std::size_t w = 0; w < workers; ++w)
      threads.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<std::pair<std::size_t, Detection>> dets;
  std::vector<std::pair<std::size_t, EmittedForecast>> fcs;
  ReplayResult out;
  for (auto& s : shards) {
    std::move(s.detections.begin(), s.detections.end(), std::back_inserter(dets));
    std::move(s.forecasts.begin(), s.forecasts.end(), std::back_inserter(fcs));
    out.malformed += s.malformed;
  }
  auto byPosition = [](const auto& a, const auto& b) { return a.first < b.first; };
  std::sort(dets.begin(), dets.end(), byPosition);
  std::sort(fcs.begin(), fcs.end(), byPosition);
  for (auto& [i, d] : dets) out.detections.push_back(std::move(d));
  for (auto& [i, f] : fcs) out.forecasts.push_back(std::move(f));
  return out;
}

EvaluationReport evaluateForecasts(std::span<const EmittedForecast> forecasts,
                                   std::span<const Detection> detections) {
  std::map<std::string_view, std::vector<std::uint64_t>> byPartition;
  for (const auto& d : detections) byPartition[d.partition].push_back(d.index);
  for (auto& [p, v] : byPartition) std::sort(v.begin(), v.end());

  EvaluationReport r;
  r.detections = detections.size();
  r.outcomes.reserve(forecasts.size());
  r.spreadPerForecast.reserve(forecasts.size());
  double spreadSum = 0.0;
  for (const auto& f : forecasts) {
    bool correct = false;
    if (auto it = byPartition.find(f.partition); it != byPartition.end()) {
      const auto& idx = it->second;
      auto pos = std::lower_bound(idx.begin(), idx.end(), f.index);
      if (pos != idx.end() && *pos == f.index)
        throw MismatchedLogs("partition " + f.partition + " has a forecast and a detection at index " +
                             std::to_string(f.index));
      if (pos != idx.end()) {
        const std::uint64_t d = *pos;
        correct = d >= f.index + static_cast<std::uint64_t>(f.start) &&
                  d <= f.index + static_cast<std::uint64_t>(f.end);
      }
    }
    r.outcomes.push_back(correct);
    r.correct += correct ? 1 : 0;
    const int spread = f.end - f.start;
    r.spreadPerForecast.push_back(spread);
    spreadSum += spread;
  }
  r.forecastsScored = forecasts.size();
  if (r.forecastsScored > 0) {
    r.precision = static_cast<double>(r.correct) / static_cast<double>(r.forecastsScored);
    r.spreadMean = spreadSum / static_cast<double>(r.forecastsScored);
  }
  return r;
}

ThroughputReport benchmarkThroughput(std::span<const Event> stream, std::shared_ptr<const SymbolicDfa> dfa,
                                     std::shared_ptr<const ForecastTable> table, Mode mode) {
  ThroughputReport report;
  report.mode = mode;
  if (mode == Mode::RecognitionAndForecasting && !table)
    throw DataError("forecasting throughput needs a forecast table");

  EngineOptions opts;
  opts.record = false;
  const auto activeTable = mode == Mode::RecognitionAndForecasting ? table : nullptr;

  const std::size_t warmup = stream.size() / 20;
  {
    Engine warm(dfa, activeTable, opts);
    for (std::size_t i = 0; i < warmup; ++i) warm.ingest(stream[i]);
  }

  Engine engine(dfa, activeTable, opts);
  const auto timed = stream.subspan(warmup);
  const auto t0 = std::chrono::steady_clock::now();
  for (const Event& e : timed) engine.ingest(e);
  const auto t1 = std::chrono::steady_clock::now();

  report.eventsProcessed = timed.size();
  report.wallSeconds = std::chrono::duration<double>(t1 - t0).count();
  report.detections = engine.detectionCount();
  report.forecasts = engine.forecastCount();
  report.valid = report.eventsProcessed > 0 && report.wallSeconds > 0.0;
  report.eventsPerSecond = report.valid ? static_cast<double>(report.eventsProcessed) / report.wallSeconds : 0.0;
  return report;
}

std::string toString(Mode mode) { return mode == Mode::Recognition ? "rec" : "rec+for"; }

}  // namespace cef
