#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mflow/error.hpp"
#include "mflow/series.hpp"
#include "mflow/time.hpp"

namespace mflow {

/// Fixed-precision number formatting so that reruns produce identical bytes.
inline std::string fmt_num(double v, int decimals = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  // "-0.0000" -> "0.0000"
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw DataError("cannot write " + path);
  }

  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    bool first = true;
    for (auto c : cols) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
    return *this;
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(double v) { return fmt_num(v); }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }

  std::ofstream out_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Flow data CSV: timestamp,station,flow,missing
// Rows are time-major; within a timestamp, stations appear in set order.

inline void write_flows_csv(const std::string& path, const SeriesSet& data) {
  data.check_aligned();
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "timestamp,station,flow,missing\n";
  std::vector<std::string> names;
  for (const auto& s : data.series) names.push_back(s.station.render());
  for (std::size_t t = 0; t < data.length(); ++t) {
    auto ts = format_timestamp(data.time_at(t));
    for (std::size_t k = 0; k < data.series.size(); ++k) {
      const auto& s = data.series[k];
      out << ts << ',' << names[k] << ',' << fmt_num(s.values[t]) << ',' << (s.missing[t] ? 1 : 0)
          << '\n';
    }
  }
}

inline SeriesSet read_flows_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(path + ": empty file");
  auto head = split_csv_line(line);
  if (head.size() != 4 || head[0] != "timestamp" || head[1] != "station" || head[2] != "flow" ||
      head[3] != "missing")
    throw SchemaError(path + ": expected header timestamp,station,flow,missing");

  struct Column {
    StationId id;
    Minutes first = 0;
    std::vector<double> values;
    std::vector<bool> missing;
  };
  std::vector<Column> cols;
  std::map<std::string, std::size_t> by_name;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto f = split_csv_line(line);
    if (f.size() != 4) throw SchemaError(path + ":" + std::to_string(lineno) + ": expected 4 fields");
    Minutes t = parse_timestamp(f[0]);
    auto it = by_name.find(f[1]);
    if (it == by_name.end()) {
      it = by_name.emplace(f[1], cols.size()).first;
      cols.push_back({StationId::parse(f[1]), t, {}, {}});
    }
    auto& c = cols[it->second];
    Minutes expect = c.first + Minutes(c.values.size()) * kIntervalMinutes;
    if (t != expect)
      throw AlignmentError(path + ":" + std::to_string(lineno) + ": station " + f[1] +
                           " is not contiguous at " + f[0]);
    char* end = nullptr;
    double v = std::strtod(f[2].c_str(), &end);
    if (end == f[2].c_str() || *end != '\0' || !(v >= 0))
      throw SchemaError(path + ":" + std::to_string(lineno) + ": bad flow '" + f[2] + "'");
    if (f[3] != "0" && f[3] != "1")
      throw SchemaError(path + ":" + std::to_string(lineno) + ": missing must be 0 or 1");
    bool miss = f[3] == "1";
    c.values.push_back(miss ? 0.0 : v);
    c.missing.push_back(miss);
  }
  SeriesSet set;
  for (auto& c : cols) {
    FlowSeries s(c.id, c.first, std::move(c.values));
    s.missing = std::move(c.missing);
    set.series.push_back(std::move(s));
  }
  set.check_aligned();
  return set;
}

/// Merges per-direction sets (same time span) into one.
inline SeriesSet concat_stations(std::vector<SeriesSet> parts) {
  SeriesSet out;
  for (auto& p : parts)
    for (auto& s : p.series) out.series.push_back(std::move(s));
  out.check_aligned();
  return out;
}

}  // namespace mflow
