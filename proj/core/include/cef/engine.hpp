#pragma once

// Streaming runtime. One automaton run per partition key (partition
// contiguity); detections and, when a forecast table is attached, the cached
// forecast of every state the run moves into.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cef/algebra.hpp"
#include "cef/pmc.hpp"
#include "cef/sfa.hpp"

namespace cef {

struct Detection {
  std::string partition;
  std::uint64_t index = 0;  // 1-based position within the partition
  std::int64_t timestamp = 0;

  bool operator==(const Detection&) const = default;
};

struct EmittedForecast {
  std::string partition;
  std::uint64_t index = 0;
  int start = 1;  // events ahead
  int end = 1;
  double probability = 0.0;

  bool operator==(const EmittedForecast&) const = default;
};

struct IngestResult {
  bool detected = false;
  bool skipped = false;
  std::optional<EmittedForecast> forecast;
};

struct EngineOptions {
  bool resetOnDetection = true;
  /// Emit only when the state differs from the previous one.
  bool suppressRepeats = false;
  /// Abort on malformed events instead of counting and skipping them.
  bool strict = false;
  /// Keep detection/forecast logs in memory.
  bool record = true;
};

class Engine {
 public:
  struct Run {
    StateId state = 0;
    std::uint64_t eventsSeen = 0;
  };

  /// Forecasting mode when `table` is non-null.
  Engine(std::shared_ptr<const SymbolicDfa> dfa, std::shared_ptr<const ForecastTable> table = nullptr,
         EngineOptions options = {});

  IngestResult ingest(const Event& event);

  bool forecasting() const noexcept { return table_ != nullptr; }
  const std::vector<Detection>& detections() const noexcept { return detections_; }
  const std::vector<EmittedForecast>& forecasts() const noexcept { return forecasts_; }
  std::uint64_t malformed() const noexcept { return malformed_; }
  std::uint64_t detectionCount() const noexcept { return detectionCount_; }
  std::uint64_t forecastCount() const noexcept { return forecastCount_; }
  std::size_t partitions() const noexcept { return runs_.size(); }
  const Run* run(std::string_view partition) const;

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
  };

  std::shared_ptr<const SymbolicDfa> dfa_;
  std::shared_ptr<const ForecastTable> table_;
  EngineOptions options_;
  std::unordered_map<std::string, Run, Hash, std::equal_to<>> runs_;
  std::vector<Detection> detections_;
  std::vector<EmittedForecast> forecasts_;
  std::uint64_t malformed_ = 0;
  std::uint64_t detectionCount_ = 0;
  std::uint64_t forecastCount_ = 0;
};

struct ReplayResult {
  std::vector<Detection> detections;
  std::vector<EmittedForecast> forecasts;
  std::uint64_t malformed = 0;
};

/// Replays a stream, sharding partitions over `workers` threads. Logs are
/// merged back into stream order, so the result does not depend on `workers`.
ReplayResult replay(std::span<const Event> stream, std::shared_ptr<const SymbolicDfa> dfa,
                    std::shared_ptr<const ForecastTable> table, const EngineOptions& options = {},
                    std::size_t workers = 1);

struct EvaluationReport {
  double precision = 0.0;
  double spreadMean = 0.0;
  std::vector<int> spreadPerForecast;  // end - start
  std::uint64_t detections = 0;
  std::uint64_t forecastsScored = 0;
  std::uint64_t correct = 0;
  /// Per-forecast outcome, aligned with the forecast log.
  std::vector<bool> outcomes;
};

/// A forecast emitted at partition index i with [s, e] is correct iff the
/// partition's next detection d satisfies i + s <= d <= i + e; with no later
/// detection it is incorrect. Throws MismatchedLogs if a forecast and a
/// detection claim the same partition index.
EvaluationReport evaluateForecasts(std::span<const EmittedForecast> forecasts,
                                   std::span<const Detection> detections);

enum class Mode { Recognition, RecognitionAndForecasting };

struct ThroughputReport {
  Mode mode = Mode::Recognition;
  std::uint64_t eventsProcessed = 0;
  double wallSeconds = 0.0;
  double eventsPerSecond = 0.0;
  /// False when nothing was timed (empty stream); eventsPerSecond is then 0.
  bool valid = false;
  std::uint64_t detections = 0;
  std::uint64_t forecasts = 0;
};

/// Times the ingest loop after a warm-up pass over the first 5% of events.
ThroughputReport benchmarkThroughput(std::span<const Event> stream, std::shared_ptr<const SymbolicDfa> dfa,
                                     std::shared_ptr<const ForecastTable> table, Mode mode);

std::string toString(Mode mode);

}  // namespace cef
