#include "cef/stream_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace cef {

std::string formatDouble(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc{} ? std::string(buf, end) : std::to_string(v);
}

namespace {

std::vector<std::string> splitCsv(const std::string& line, std::size_t lineNo) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw ParseError(lineNo, line.size(), "unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

std::optional<double> parseDouble(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || first == last) return std::nullopt;
  return v;
}

template <class Int>
Int parseInt(const std::string& s, std::size_t lineNo, const char* what) {
  Int v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ParseError(lineNo, 1, std::string("malformed ") + what + " '" + s + "'");
  return v;
}

Value parseValue(const std::string& s) {
  if (auto d = parseDouble(s)) return *d;
  if (s == "true") return true;
  if (s == "false") return false;
  return s;
}

std::string csvEscape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string formatValue(const Value& v) {
  if (const auto* d = std::get_if<double>(&v)) return formatDouble(*d);
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return csvEscape(std::get<std::string>(v));
}

}  // namespace

std::vector<Event> readEventsCsv(std::istream& in) {
  std::string line;
  std::size_t lineNo = 0;
  std::vector<std::string> header;
  while (header.empty() && std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    header = splitCsv(line, lineNo);
  }
  std::ptrdiff_t tsCol = -1, keyCol = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == "timestamp") tsCol = static_cast<std::ptrdiff_t>(i);
    if (header[i] == "partitionKey") keyCol = static_cast<std::ptrdiff_t>(i);
  }
  if (tsCol < 0 || keyCol < 0) throw ParseError(lineNo, 1, "CSV header needs timestamp and partitionKey columns");

  std::vector<Event> events;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = splitCsv(line, lineNo);
    if (fields.size() != header.size())
      throw ParseError(lineNo, 1, "expected " + std::to_string(header.size()) + " fields, found " +
                                      std::to_string(fields.size()));
    Event e;
    e.timestamp = parseInt<std::int64_t>(fields[static_cast<std::size_t>(tsCol)], lineNo, "timestamp");
    e.partition = fields[static_cast<std::size_t>(keyCol)];
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (static_cast<std::ptrdiff_t>(i) == tsCol || static_cast<std::ptrdiff_t>(i) == keyCol) continue;
      if (fields[i].empty()) continue;  // absent attribute
      e.set(header[i], parseValue(fields[i]));
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<Event> readEventsNdjson(std::istream& in) {
  std::vector<Event> events;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(lineNo, 1, ex.what());
    }
    if (!j.is_object() || !j.contains("timestamp") || !j.contains("partitionKey"))
      throw ParseError(lineNo, 1, "event object needs timestamp and partitionKey");
    Event e;
    try {
      e.timestamp = j["timestamp"].get<std::int64_t>();
      const auto& key = j["partitionKey"];
      e.partition = key.is_string() ? key.get<std::string>() : key.dump();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(lineNo, 1, ex.what());
    }
    for (const auto& [k, v] : j.items()) {
      if (k == "timestamp" || k == "partitionKey" || v.is_null()) continue;
      if (v.is_number()) {
        e.set(k, v.get<double>());
      } else if (v.is_boolean()) {
        e.set(k, v.get<bool>());
      } else if (v.is_string()) {
        e.set(k, v.get<std::string>());
      } else {
        throw ParseError(lineNo, 1, "attribute '" + k + "' must be a number, string or boolean");
      }
    }
    events.push_back(std::move(e));
  }
  return events;
}

std::vector<Event> readEvents(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open stream file " + path);
  auto endsWith = [&](std::string_view suffix) { return std::string_view(path).ends_with(suffix); };
  if (endsWith(".json") || endsWith(".jsonl") || endsWith(".ndjson")) return readEventsNdjson(in);
  return readEventsCsv(in);
}

void writeEventsCsv(std::ostream& out, std::span<const Event> events) {
  std::vector<std::string> columns = {"lon", "lat", "speed", "heading"};
  for (const auto& e : events)
    for (const auto& [name, v] : e.attributes())
      if (std::find(columns.begin(), columns.end(), name) == columns.end()) columns.push_back(name);
  out << "timestamp,partitionKey";
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  for (const auto& e : events) {
    out << e.timestamp << ',' << csvEscape(e.partition);
    for (const auto& c : columns) {
      out << ',';
      if (const Value* v = e.find(c)) out << formatValue(*v);
    }
    out << '\n';
  }
}

void writeEvents(const std::string& path, std::span<const Event> events) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  writeEventsCsv(out, events);
}

void writeDetectionsCsv(std::ostream& out, std::span<const Detection> detections) {
  out << "partition,index,timestamp\n";
  for (const auto& d : detections) out << csvEscape(d.partition) << ',' << d.index << ',' << d.timestamp << '\n';
}

void writeForecastsCsv(std::ostream& out, std::span<const EmittedForecast> forecasts,
                       const std::vector<bool>* outcomes) {
  out << "partition,index,start,end,probability,correct\n";
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    const auto& f = forecasts[i];
    out << csvEscape(f.partition) << ',' << f.index << ',' << f.start << ',' << f.end << ','
        << formatDouble(f.probability) << ',';
    if (outcomes) out << ((*outcomes)[i] ? '1' : '0');
    out << '\n';
  }
}

std::vector<Detection> readDetectionsCsv(std::istream& in) {
  std::vector<Detection> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (lineNo == 1 || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = splitCsv(line, lineNo);
    if (f.size() != 3) throw ParseError(lineNo, 1, "detection rows have 3 fields");
    out.push_back({f[0], parseInt<std::uint64_t>(f[1], lineNo, "index"),
                   parseInt<std::int64_t>(f[2], lineNo, "timestamp")});
  }
  return out;
}

std::vector<EmittedForecast> readForecastsCsv(std::istream& in) {
  std::vector<EmittedForecast> out;
  std::string line;
  std::size_t lineNo = 0;
  while (std::getline(in, line)) {
    ++lineNo;
    if (lineNo == 1 || line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto f = splitCsv(line, lineNo);
    if (f.size() != 6) throw ParseError(lineNo, 1, "forecast rows have 6 fields");
    auto p = parseDouble(f[4]);
    if (!p) throw ParseError(lineNo, 1, "malformed probability '" + f[4] + "'");
    out.push_back({f[0], parseInt<std::uint64_t>(f[1], lineNo, "index"), parseInt<int>(f[2], lineNo, "start"),
                   parseInt<int>(f[3], lineNo, "end"), *p});
  }
  return out;
}

std::string reportJson(const EvaluationReport& r) {
  nlohmann::json j;
  j["precision"] = r.precision;
  j["spread_mean"] = r.spreadMean;
  j["detections"] = r.detections;
  j["forecasts_scored"] = r.forecastsScored;
  j["forecasts_correct"] = r.correct;
  return j.dump(2);
}

}  // namespace cef
