#pragma once

// Stream and log files.
//
//   events:      CSV with header `timestamp,partitionKey,lon,lat,speed,heading[,extra...]`
//                (any column order; extra columns become attributes), or
//                newline-delimited JSON objects with the same keys.
//   detections:  CSV `partition,index,timestamp`
//   forecasts:   CSV `partition,index,start,end,probability,correct`

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cef/algebra.hpp"
#include "cef/engine.hpp"

namespace cef {

std::vector<Event> readEventsCsv(std::istream& in);
std::vector<Event> readEventsNdjson(std::istream& in);
/// Chooses NDJSON for `.json`, `.jsonl` and `.ndjson` files, CSV otherwise.
std::vector<Event> readEvents(const std::string& path);

void writeEventsCsv(std::ostream& out, std::span<const Event> events);
void writeEvents(const std::string& path, std::span<const Event> events);

void writeDetectionsCsv(std::ostream& out, std::span<const Detection> detections);
/// `outcomes`, when given, fills the `correct` column (1/0); otherwise it is left empty.
void writeForecastsCsv(std::ostream& out, std::span<const EmittedForecast> forecasts,
                       const std::vector<bool>* outcomes = nullptr);
std::vector<Detection> readDetectionsCsv(std::istream& in);
std::vector<EmittedForecast> readForecastsCsv(std::istream& in);

std::string reportJson(const EvaluationReport& report);

/// Shortest decimal that reads back to the same double.
std::string formatDouble(double v);

}  // namespace cef
