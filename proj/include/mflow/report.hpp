#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "mflow/evaluation.hpp"
#include "mflow/io.hpp"
#include "mflow/profiling.hpp"
#include "mflow/topology.hpp"

namespace mflow {

// CSV exports. Only values that are a deterministic function of (config, seed) go in
// here: no wall-clock timings, so reruns give byte-identical files.

inline std::string fmt_opt(double v) { return std::isfinite(v) ? fmt_num(v) : std::string("nan"); }

/// model,dataset,R,P,rmse,mae,smape,points
inline void write_metrics_csv(const std::string& path, const std::vector<MetricReport>& rows) {
  CsvWriter w(path);
  w.header({"model", "dataset", "R", "P", "rmse", "mae", "smape", "points"});
  for (const auto& m : rows) w.row(m.model, m.dataset, m.R, m.P, m.rmse, m.mae, m.smape, m.points);
}

inline std::vector<MetricReport> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("model,dataset,R,P,rmse", 0) != 0) throw SchemaError(path + ": not a metrics table");
  std::vector<MetricReport> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto c = split_csv_line(line);
    if (c.size() != 8) throw SchemaError(path + ": bad metrics row");
    MetricReport m;
    m.model = c[0];
    m.dataset = c[1];
    m.R = std::stoul(c[2]);
    m.P = std::stoul(c[3]);
    m.rmse = std::stod(c[4]);
    m.mae = std::stod(c[5]);
    m.smape = std::stod(c[6]);
    m.points = std::stoul(c[7]);
    out.push_back(m);
  }
  return out;
}

/// station,model,dataset,R,P,rmse
inline void write_station_metrics_csv(const std::string& path, const SeriesSet& data, const MetricReport& m) {
  CsvWriter w(path);
  w.header({"station", "model", "dataset", "R", "P", "rmse"});
  for (std::size_t j = 0; j < m.station_rmse.size(); ++j)
    w.row(data.series[j].station.render(), m.model, m.dataset, m.R, m.P, m.station_rmse[j]);
}

/// model,P,R,repeats,diverged,mean_val_rmse,std_val_rmse,mean_test_rmse,std_test_rmse
inline void write_sweep_csv(const std::string& path, const SweepResult& s) {
  CsvWriter w(path);
  w.header({"model", "P", "R", "repeats", "diverged", "mean_val_rmse", "std_val_rmse", "mean_test_rmse",
            "std_test_rmse"});
  for (const auto& c : s.cells)
    w.row(s.arch, c.P, c.R, c.validation_rmse.size(), c.diverged, fmt_opt(c.mean_validation),
          fmt_opt(c.std_validation), fmt_opt(c.mean_test), fmt_opt(c.std_test));
}

/// model,P,bestR,mean_val_rmse,mean_test_rmse
inline void write_best_r_csv(const std::string& path, const SweepResult& s) {
  CsvWriter w(path);
  w.header({"model", "P", "bestR", "mean_val_rmse", "mean_test_rmse"});
  for (auto P : s.Ps) {
    auto it = s.best_r.find(P);
    if (it == s.best_r.end()) {
      w.row(s.arch, P, "none", "nan", "nan");
      continue;
    }
    const auto& c = s.cell(it->second, P);
    w.row(s.arch, P, it->second, c.mean_validation, c.mean_test);
  }
}

/// timestamp,station,observed,predicted,residual
inline void write_residuals_csv(const std::string& path, const ResidualSeries& r) {
  CsvWriter w(path);
  w.header({"timestamp", "station", "observed", "predicted", "residual"});
  for (std::size_t i = 0; i < r.times.size(); ++i)
    w.row(format_timestamp(r.times[i]), r.station.render(), fmt_opt(r.observed[i]), fmt_opt(r.predicted[i]),
          fmt_opt(r.residual[i]));
}

/// station,TI,ratio
inline void write_congestion_csv(const std::string& path, const CongestionMap& m) {
  CsvWriter w(path);
  w.header({"station", "TI", "ratio"});
  for (std::size_t s = 0; s < m.stations.size(); ++s)
    for (int i = 0; i < kIntervalsPerDay; ++i) w.row(m.stations[s].render(), i, m.ratio[s][i]);
}

/// station,day,TI,mean,p20,p80,count
inline void write_profiles_csv(const std::string& path, const std::vector<DailyProfile>& ps) {
  CsvWriter w(path);
  w.header({"station", "day", "TI", "mean", "p20", "p80", "count"});
  for (const auto& p : ps)
    for (int d = 0; d < 7; ++d)
      for (int i = 0; i < kIntervalsPerDay; ++i) {
        const auto& c = p.cell(d, i);
        w.row(p.station.render(), d, i, fmt_opt(c.mean), fmt_opt(c.p20), fmt_opt(c.p80), c.count);
      }
}

/// station,start,end,length,reason  (end exclusive)
inline void write_missing_runs_csv(const std::string& path, const SeriesSet& data,
                                   const std::vector<MissingRun>& runs) {
  CsvWriter w(path);
  w.header({"station", "start", "end", "length", "reason"});
  for (const auto& r : runs)
    w.row(r.station.render(), format_timestamp(data.time_at(r.start)), format_timestamp(data.time_at(r.end())),
          r.length, r.reason);
}

/// year,month,missing_intervals
inline void write_monthly_counts_csv(const std::string& path, const std::vector<MonthlyCount>& rows) {
  CsvWriter w(path);
  w.header({"year", "month", "missing_intervals"});
  for (const auto& r : rows) w.row(r.year, r.month, r.missing_intervals);
}

/// link,epsilon,checked,passing,pass_rate,max_abs_residual
inline void write_conservation_csv(const std::string& path, const std::vector<ConservationReport>& reps) {
  CsvWriter w(path);
  w.header({"link", "epsilon", "checked", "passing", "pass_rate", "max_abs_residual"});
  for (const auto& r : reps) {
    double worst = 0;
    for (std::size_t t = 0; t < r.residual.size(); ++t)
      if (!r.skipped[t]) worst = std::max(worst, std::abs(r.residual[t]));
    std::size_t n = r.checked_cells();
    double rate = n ? static_cast<double>(r.passing_cells()) / static_cast<double>(n) : 1.0;
    w.row(r.label, r.epsilon, n, r.passing_cells(), rate, worst);
  }
}

// ---------------------------------------------------------------------------
// Minimal SVG plots

struct SvgLine {
  std::string label;
  std::string colour;
  std::vector<double> y;  // NaN gaps are skipped
};

inline void write_line_svg(const std::string& path, const std::string& title, const std::vector<SvgLine>& lines,
                           const std::string& x_label = "", const std::string& y_label = "") {
  const double W = 900, H = 420, L = 60, Rm = 20, T = 40, B = 50;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n = 0;
  for (const auto& l : lines) {
    n = std::max(n, l.y.size());
    for (double v : l.y)
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
  }
  if (!std::isfinite(lo)) lo = 0, hi = 1;
  if (hi <= lo) hi = lo + 1;
  auto px = [&](std::size_t i) { return L + (W - L - Rm) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.0); };
  auto py = [&](double v) { return T + (H - T - B) * (1 - (v - lo) / (hi - lo)); };

  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - Rm << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  out << "<text x=\"" << L - 6 << "\" y=\"" << T + 4 << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt_num(hi, 2) << "</text>\n";
  out << "<text x=\"" << L - 6 << "\" y=\"" << H - B << "\" text-anchor=\"end\" font-size=\"11\">"
      << fmt_num(lo, 2) << "</text>\n";
  if (!x_label.empty())
    out << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
        << x_label << "</text>\n";
  if (!y_label.empty())
    out << "<text x=\"14\" y=\"" << H / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << H / 2
        << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto& l = lines[k];
    out << "<path fill=\"none\" stroke=\"" << l.colour << "\" stroke-width=\"1.2\" d=\"";
    bool pen = false;
    for (std::size_t i = 0; i < l.y.size(); ++i) {
      if (!std::isfinite(l.y[i])) {
        pen = false;
        continue;
      }
      out << (pen ? "L" : "M") << fmt_num(px(i), 1) << " " << fmt_num(py(l.y[i]), 1) << " ";
      pen = true;
    }
    out << "\"/>\n";
    out << "<text x=\"" << L + 10 << "\" y=\"" << T + 16 + 14 * k << "\" font-size=\"12\" fill=\"" << l.colour
        << "\">" << l.label << "</text>\n";
  }
  out << "</svg>\n";
}

/// Heat map of a rows x cols matrix with values in [0,1] (white -> red).
inline void write_heat_svg(const std::string& path, const std::string& title,
                           const std::vector<std::string>& row_labels,
                           const std::vector<std::vector<double>>& m) {
  const double cell_w = 2, cell_h = 14, L = 60, T = 40;
  std::size_t cols = 0;
  for (const auto& r : m) cols = std::max(cols, r.size());
  const double W = L + cell_w * static_cast<double>(cols) + 20, H = T + cell_h * static_cast<double>(m.size()) + 30;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << title << "</text>\n";
  for (std::size_t r = 0; r < m.size(); ++r) {
    double y = T + cell_h * static_cast<double>(r);
    out << "<text x=\"" << L - 4 << "\" y=\"" << y + cell_h - 3 << "\" text-anchor=\"end\" font-size=\"10\">"
        << (r < row_labels.size() ? row_labels[r] : "") << "</text>\n";
    for (std::size_t c = 0; c < m[r].size(); ++c) {
      double v = std::clamp(std::isfinite(m[r][c]) ? m[r][c] : 0.0, 0.0, 1.0);
      int g = static_cast<int>(std::lround(255 * (1 - v)));
      out << "<rect x=\"" << fmt_num(L + cell_w * static_cast<double>(c), 1) << "\" y=\"" << y << "\" width=\""
          << cell_w << "\" height=\"" << cell_h << "\" fill=\"rgb(255," << g << "," << g << ")\"/>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace mflow
