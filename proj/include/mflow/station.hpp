#pragma once

#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "mflow/error.hpp"

namespace mflow {

/// A = south-bound mainline, B = north-bound mainline, E = entry ramp, X = exit ramp.
enum class StationKind { MainlineA, MainlineB, Entry, Exit };

inline char kind_letter(StationKind k) {
  switch (k) {
    case StationKind::MainlineA: return 'A';
    case StationKind::MainlineB: return 'B';
    case StationKind::Entry: return 'E';
    case StationKind::Exit: return 'X';
  }
  return '?';
}

inline bool is_mainline(StationKind k) {
  return k == StationKind::MainlineA || k == StationKind::MainlineB;
}

struct StationId {
  int index = 1;
  StationKind kind = StationKind::MainlineA;

  /// Zero-padded to at least two digits: "03A", "12E", "104B".
  std::string render() const {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%02d%c", index, kind_letter(kind));
    return buf;
  }

  static StationId parse(std::string_view s) {
    if (s.size() < 2) throw SchemaError("bad station id '" + std::string(s) + "'");
    int idx = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      char c = s[i];
      if (c < '0' || c > '9') throw SchemaError("bad station id '" + std::string(s) + "'");
      idx = idx * 10 + (c - '0');
      if (idx > 1'000'000) throw SchemaError("station index too large in '" + std::string(s) + "'");
    }
    if (idx < 1) throw SchemaError("station index must be positive in '" + std::string(s) + "'");
    StationKind kind;
    switch (s.back()) {
      case 'A': kind = StationKind::MainlineA; break;
      case 'B': kind = StationKind::MainlineB; break;
      case 'E': kind = StationKind::Entry; break;
      case 'X': kind = StationKind::Exit; break;
      default: throw SchemaError("bad station kind in '" + std::string(s) + "'");
    }
    return {idx, kind};
  }

  bool mainline() const { return is_mainline(kind); }

  friend auto operator<=>(const StationId&, const StationId&) = default;
};

}  // namespace mflow
