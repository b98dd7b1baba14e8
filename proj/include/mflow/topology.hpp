#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/error.hpp"
#include "mflow/series.hpp"
#include "mflow/station.hpp"

namespace mflow {

enum class AttachmentKind { None, Entry, Exit };

/// What sits between two consecutive mainline stations.
struct Attachment {
  AttachmentKind kind = AttachmentKind::None;
  StationId ramp{};

  static Attachment none() { return {}; }
  static Attachment entry(StationId id) { return {AttachmentKind::Entry, id}; }
  static Attachment exit(StationId id) { return {AttachmentKind::Exit, id}; }

  friend bool operator==(const Attachment&, const Attachment&) = default;
};

/// A mainline link: upstream station -> downstream station, with an optional ramp.
struct Link {
  StationId upstream;
  StationId downstream;
  Attachment attachment;
};

struct Direction {
  StationKind kind = StationKind::MainlineA;
  std::vector<StationId> mainline;  // in travel order
  std::vector<Attachment> links;    // links[i] sits between mainline[i] and mainline[i+1]
};

/// Ordered mainline stations per direction with their entry/exit attachments.
/// Directions never share stations; ramps attach to exactly one link.
class Topology {
 public:
  Topology() = default;

  explicit Topology(std::vector<Direction> dirs) : directions_(std::move(dirs)) { validate(); }

  const std::vector<Direction>& directions() const { return directions_; }

  /// N: every station, mainline and ramps, across both directions.
  std::size_t station_count() const { return stations_.size(); }

  /// Canonical order: per direction, each mainline station followed by the ramp on its
  /// downstream link. This is also the row order of feature matrices.
  const std::vector<StationId>& stations() const { return stations_; }

  std::size_t index_of(const StationId& id) const {
    for (std::size_t i = 0; i < stations_.size(); ++i)
      if (stations_[i] == id) return i;
    throw DataError("station " + id.render() + " not in topology");
  }

  bool contains(const StationId& id) const {
    for (const auto& s : stations_)
      if (s == id) return true;
    return false;
  }

  std::vector<Link> links() const {
    std::vector<Link> out;
    for (const auto& d : directions_)
      for (std::size_t i = 0; i + 1 < d.mainline.size(); ++i)
        out.push_back({d.mainline[i], d.mainline[i + 1], d.links[i]});
    return out;
  }

  std::vector<StationId> mainline_stations() const {
    std::vector<StationId> out;
    for (const auto& d : directions_) out.insert(out.end(), d.mainline.begin(), d.mainline.end());
    return out;
  }

  /// Topological neighbours used by missing-data detection: adjacent mainline stations for
  /// a mainline station, the two mainline ends of its link for a ramp.
  std::vector<StationId> neighbours(const StationId& id) const {
    std::vector<StationId> out;
    for (const auto& d : directions_) {
      for (std::size_t i = 0; i < d.mainline.size(); ++i) {
        if (d.mainline[i] == id) {
          if (i > 0) out.push_back(d.mainline[i - 1]);
          if (i + 1 < d.mainline.size()) out.push_back(d.mainline[i + 1]);
          return out;
        }
      }
      for (std::size_t i = 0; i < d.links.size(); ++i) {
        if (d.links[i].kind != AttachmentKind::None && d.links[i].ramp == id) {
          out.push_back(d.mainline[i]);
          out.push_back(d.mainline[i + 1]);
          return out;
        }
      }
    }
    throw DataError("station " + id.render() + " not in topology");
  }

  static Topology from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  static Topology load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open topology file " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaError("topology " + path + ": " + e.what());
    }
    return from_json(j);
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << to_json().dump(2) << "\n";
  }

  /// Chain of stations with no ramps; handy in tests.
  static Topology simple(StationKind kind, int count) {
    Direction d;
    d.kind = kind;
    for (int i = 1; i <= count; ++i) d.mainline.push_back({i, kind});
    d.links.assign(count > 0 ? count - 1 : 0, Attachment::none());
    return Topology({d});
  }

 private:
  void validate() {
    stations_.clear();
    std::set<StationId> seen;
    auto add = [&](const StationId& s) {
      if (!seen.insert(s).second) throw SchemaError("station " + s.render() + " appears twice");
      stations_.push_back(s);
    };
    std::set<StationKind> dir_kinds;
    for (const auto& d : directions_) {
      if (!is_mainline(d.kind)) throw SchemaError("direction kind must be A or B");
      if (!dir_kinds.insert(d.kind).second) throw SchemaError("direction listed twice");
      if (d.mainline.empty()) throw SchemaError("direction with no stations");
      if (d.links.size() + 1 != d.mainline.size())
        throw SchemaError("direction needs exactly one link between consecutive stations");
      for (std::size_t i = 0; i < d.mainline.size(); ++i) {
        const auto& s = d.mainline[i];
        if (s.kind != d.kind)
          throw SchemaError("station " + s.render() + " does not belong to direction " +
                            std::string(1, kind_letter(d.kind)));
        if (i > 0 && !(d.mainline[i - 1].index < s.index))
          throw SchemaError("mainline order must be strictly increasing at " + s.render());
      }
      for (std::size_t i = 0; i < d.mainline.size(); ++i) {
        add(d.mainline[i]);
        if (i < d.links.size()) {
          const auto& a = d.links[i];
          if (a.kind == AttachmentKind::Entry && a.ramp.kind != StationKind::Entry)
            throw SchemaError("entry attachment must be an E station, got " + a.ramp.render());
          if (a.kind == AttachmentKind::Exit && a.ramp.kind != StationKind::Exit)
            throw SchemaError("exit attachment must be an X station, got " + a.ramp.render());
          if (a.kind != AttachmentKind::None) add(a.ramp);
        }
      }
    }
  }

  std::vector<Direction> directions_;
  std::vector<StationId> stations_;
};

// JSON schema: an array of directions, each an ordered array of
//   {"station": "03A", "attachment": null | {"exit": "03X"} | {"entry": "05E"}}
// The attachment of record i describes the link from station i to station i+1;
// the last record of a direction must have a null attachment.
inline Topology Topology::from_json(const nlohmann::json& j) {
  const nlohmann::json& arr = j.is_object() && j.contains("directions") ? j.at("directions") : j;
  if (!arr.is_array()) throw SchemaError("topology must be an array of directions");
  std::vector<Direction> dirs;
  for (const auto& jd : arr) {
    if (!jd.is_array() || jd.empty()) throw SchemaError("each direction must be a non-empty array");
    Direction d;
    for (std::size_t i = 0; i < jd.size(); ++i) {
      const auto& rec = jd[i];
      if (!rec.is_object() || !rec.contains("station") || !rec["station"].is_string())
        throw SchemaError("topology record needs a string 'station'");
      auto id = StationId::parse(rec["station"].get<std::string>());
      if (i == 0) d.kind = id.kind;
      d.mainline.push_back(id);
      Attachment att;
      if (rec.contains("attachment") && !rec["attachment"].is_null()) {
        const auto& ja = rec["attachment"];
        if (!ja.is_object() || ja.size() != 1) throw SchemaError("attachment must be {\"entry\"|\"exit\": id}");
        if (ja.contains("entry"))
          att = Attachment::entry(StationId::parse(ja["entry"].get<std::string>()));
        else if (ja.contains("exit"))
          att = Attachment::exit(StationId::parse(ja["exit"].get<std::string>()));
        else
          throw SchemaError("attachment must be {\"entry\"|\"exit\": id}");
      }
      if (i + 1 < jd.size())
        d.links.push_back(att);
      else if (att.kind != AttachmentKind::None)
        throw SchemaError("last station of a direction cannot carry an attachment");
    }
    dirs.push_back(std::move(d));
  }
  return Topology(std::move(dirs));
}

inline nlohmann::json Topology::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& d : directions_) {
    nlohmann::json jd = nlohmann::json::array();
    for (std::size_t i = 0; i < d.mainline.size(); ++i) {
      nlohmann::json rec;
      rec["station"] = d.mainline[i].render();
      rec["attachment"] = nullptr;
      if (i < d.links.size()) {
        const auto& a = d.links[i];
        if (a.kind == AttachmentKind::Entry) rec["attachment"] = {{"entry", a.ramp.render()}};
        if (a.kind == AttachmentKind::Exit) rec["attachment"] = {{"exit", a.ramp.render()}};
      }
      jd.push_back(rec);
    }
    arr.push_back(jd);
  }
  return {{"directions", arr}};
}

// ---------------------------------------------------------------------------
// Flow conservation checks

/// Residuals of one conservation equation over time. A link passes iff every
/// non-skipped |residual| <= epsilon. Cells where any participating value is
/// masked as missing are skipped.
struct ConservationReport {
  std::string label;
  double epsilon = 0.0;
  std::vector<double> residual;
  std::vector<bool> skipped;

  bool cell_passes(std::size_t t) const { return skipped[t] || std::abs(residual[t]) <= epsilon; }

  bool passed() const {
    for (std::size_t t = 0; t < residual.size(); ++t)
      if (!cell_passes(t)) return false;
    return true;
  }

  std::size_t checked_cells() const {
    std::size_t n = 0;
    for (bool s : skipped) n += !s;
    return n;
  }

  std::size_t passing_cells() const {
    std::size_t n = 0;
    for (std::size_t t = 0; t < residual.size(); ++t) n += !skipped[t] && cell_passes(t);
    return n;
  }

  std::optional<std::size_t> first_failure() const {
    for (std::size_t t = 0; t < residual.size(); ++t)
      if (!cell_passes(t)) return t;
    return std::nullopt;
  }
};

namespace detail {

inline ConservationReport conservation(const FlowSeries& lhs, const FlowSeries& a,
                                       const FlowSeries* b, double eps, std::string label) {
  if (eps < 0 || !std::isfinite(eps)) throw ConfigError("epsilon must be a non-negative number");
  require_aligned(lhs, a);
  if (b) require_aligned(lhs, *b);
  ConservationReport r;
  r.label = std::move(label);
  r.epsilon = eps;
  r.residual.resize(lhs.size());
  r.skipped.resize(lhs.size());
  for (std::size_t t = 0; t < lhs.size(); ++t) {
    double rhs = a.values[t] + (b ? b->values[t] : 0.0);
    r.residual[t] = lhs.values[t] - rhs;
    r.skipped[t] = lhs.missing[t] || a.missing[t] || (b && b->missing[t]);
  }
  return r;
}

}  // namespace detail

/// No ramp between the stations: residual = downstream - upstream.
inline ConservationReport validate_passing(const FlowSeries& upstream, const FlowSeries& downstream,
                                           double eps) {
  return detail::conservation(downstream, upstream, nullptr, eps,
                              upstream.station.render() + "->" + downstream.station.render());
}

/// Exit ramp on the link: residual = upstream - (downstream_main + exit).
inline ConservationReport validate_exit(const FlowSeries& upstream, const FlowSeries& downstream_main,
                                        const FlowSeries& downstream_exit, double eps) {
  return detail::conservation(upstream, downstream_main, &downstream_exit, eps,
                              upstream.station.render() + "->" + downstream_main.station.render() +
                                  "+" + downstream_exit.station.render());
}

/// Entry ramp on the link: residual = downstream - (upstream_main + entry).
inline ConservationReport validate_entry(const FlowSeries& downstream, const FlowSeries& upstream_main,
                                         const FlowSeries& upstream_entry, double eps) {
  return detail::conservation(downstream, upstream_main, &upstream_entry, eps,
                              upstream_main.station.render() + "+" + upstream_entry.station.render() +
                                  "->" + downstream.station.render());
}

/// Runs the matching check on every link of the topology.
inline std::vector<ConservationReport> validate_topology(const Topology& topo, const SeriesSet& data,
                                                         double eps) {
  std::vector<ConservationReport> out;
  for (const auto& link : topo.links()) {
    const auto& up = data.at(link.upstream);
    const auto& down = data.at(link.downstream);
    switch (link.attachment.kind) {
      case AttachmentKind::None: out.push_back(validate_passing(up, down, eps)); break;
      case AttachmentKind::Exit:
        out.push_back(validate_exit(up, down, data.at(link.attachment.ramp), eps));
        break;
      case AttachmentKind::Entry:
        out.push_back(validate_entry(down, up, data.at(link.attachment.ramp), eps));
        break;
    }
  }
  return out;
}

}  // namespace mflow
