#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "mflow/error.hpp"

namespace mflow {

/// Length of one time interval (TI) in minutes.
inline constexpr int kIntervalMinutes = 3;
/// TIs per calendar day.
inline constexpr int kIntervalsPerDay = 24 * 60 / kIntervalMinutes;  // 480

/// Minutes since 1970-01-01T00:00 (UTC, no leap seconds).
using Minutes = std::int64_t;

using Date = std::chrono::sys_days;

inline Date make_date(int y, unsigned m, unsigned d) {
  return Date{std::chrono::year{y} / std::chrono::month{m} / std::chrono::day{d}};
}

inline Minutes to_minutes(Date d) {
  return static_cast<Minutes>(d.time_since_epoch().count()) * 24 * 60;
}

inline Date date_of(Minutes t) {
  auto days = t >= 0 ? t / (24 * 60) : -((-t + 24 * 60 - 1) / (24 * 60));
  return Date{std::chrono::days{days}};
}

/// Day of week with Monday = 0 ... Sunday = 6.
inline int day_of_week(Date d) {
  return static_cast<int>(std::chrono::weekday{d}.iso_encoding()) - 1;
}

inline int day_of_week(Minutes t) { return day_of_week(date_of(t)); }

/// TI index within the day, 0..479.
inline int interval_of_day(Minutes t) {
  auto m = t - to_minutes(date_of(t));
  return static_cast<int>(m / kIntervalMinutes);
}

inline bool on_interval_grid(Minutes t) { return t % kIntervalMinutes == 0; }

inline int year_of(Date d) { return int(std::chrono::year_month_day{d}.year()); }
inline unsigned month_of(Date d) { return unsigned(std::chrono::year_month_day{d}.month()); }

inline std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

/// "YYYY-MM-DDTHH:MM"
inline std::string format_timestamp(Minutes t) {
  auto d = date_of(t);
  auto m = t - to_minutes(d);
  char buf[8];
  std::snprintf(buf, sizeof buf, "T%02d:%02d", int(m / 60), int(m % 60));
  return format_date(d) + buf;
}

inline Date parse_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  std::string tmp(s.substr(0, 10));
  if (s.size() < 10 || std::sscanf(tmp.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3)
    throw SchemaError("bad date '" + std::string(s) + "', expected YYYY-MM-DD");
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m},
                                  std::chrono::day{d}};
  if (!ymd.ok()) throw SchemaError("invalid calendar date '" + std::string(s) + "'");
  return Date{ymd};
}

inline Minutes parse_timestamp(std::string_view s) {
  auto d = parse_date(s);
  if (s.size() == 10) return to_minutes(d);
  int hh = 0, mm = 0;
  std::string tail(s.substr(10));
  if (std::sscanf(tail.c_str(), "T%2d:%2d", &hh, &mm) != 2 && std::sscanf(tail.c_str(), " %2d:%2d", &hh, &mm) != 2)
    throw SchemaError("bad timestamp '" + std::string(s) + "'");
  if (hh < 0 || hh > 23 || mm < 0 || mm > 59) throw SchemaError("bad time of day in '" + std::string(s) + "'");
  return to_minutes(d) + hh * 60 + mm;
}

/// Inclusive range of whole calendar days.
struct DateRange {
  Date first;
  Date last;

  bool contains(Date d) const { return d >= first && d <= last; }
  bool contains(Minutes t) const { return contains(date_of(t)); }
  int days() const { return int((last - first).count()) + 1; }
  Minutes begin_minutes() const { return to_minutes(first); }
  Minutes end_minutes() const { return to_minutes(last) + 24 * 60; }
  bool overlaps(const DateRange& o) const { return first <= o.last && o.first <= last; }
};

/// "YYYY-MM-DD:YYYY-MM-DD"
inline DateRange parse_date_range(std::string_view s) {
  auto pos = s.find(':');
  if (pos == std::string_view::npos) throw SchemaError("bad date range '" + std::string(s) + "'");
  DateRange r{parse_date(s.substr(0, pos)), parse_date(s.substr(pos + 1))};
  if (r.last < r.first) throw ConfigError("date range ends before it starts: " + std::string(s));
  return r;
}

}  // namespace mflow
