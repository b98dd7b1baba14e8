// mflow: generate -> validate-topology -> profile -> impute -> train -> evaluate -> sweep -> report
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mflow/config.hpp"
#include "mflow/evaluation.hpp"
#include "mflow/io.hpp"
#include "mflow/profiling.hpp"
#include "mflow/report.hpp"
#include "mflow/synthgen.hpp"
#include "mflow/topology.hpp"
#include "mflow/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mflow;

namespace {

constexpr const char* kVersion = "1.0.0";

struct Flags {
  std::string config, out, data, model;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> arch;
  std::optional<std::size_t> R;
  std::vector<std::size_t> P;
  std::size_t workers = 1;
  std::vector<std::string> exclude;
  std::optional<double> eps, min_pass_rate;
  bool split_directions = false;
  std::string strategy = "monthly-dow";
  std::string dataset = "test";
  std::optional<std::string> day;
  std::size_t station = 0;
  std::optional<std::size_t> repeats, max_epochs;
};

RunConfig effective_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  if (f.seed) {
    c.generator.cfg.seed = *f.seed;
    c.model.seed = *f.seed;
    c.train.seed = *f.seed;
  }
  if (f.arch) c.model.arch = parse_arch(*f.arch);
  if (f.R) c.model.R = *f.R;
  if (f.P.size() == 1) c.model.P = f.P.front();
  if (f.eps) c.epsilon = *f.eps;
  if (f.min_pass_rate) c.min_pass_rate = *f.min_pass_rate;
  if (f.repeats) c.sweep.repeats = *f.repeats;
  if (f.max_epochs) c.train.max_epochs = *f.max_epochs;
  return c;
}

std::vector<DateRange> exclusions(const Flags& f) {
  std::vector<DateRange> out;
  for (const auto& s : f.exclude) out.push_back(parse_date_range(s));
  return out;
}

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw ConfigError("--out is required");
  fs::create_directories(out);
  return out;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream o(p);
  if (!o) throw DataError("cannot write " + p.string());
  o << j.dump(2) << "\n";
}

void write_manifest(const fs::path& dir, const std::string& command, const RunConfig& cfg,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs) {
  json c = cfg.to_json();
  json m{{"tool", "mflow"},
         {"version", kVersion},
         {"command", command},
         {"config", c},
         {"config_hash", hex(fnv1a(c.dump()))},
         {"seeds", {{"generator", cfg.generator.cfg.seed}, {"model", cfg.model.seed}, {"train", cfg.train.seed}}},
         {"inputs", inputs},
         {"outputs", outputs},
         {"created", now_iso()}};
  write_json(dir / "manifest.json", m);
}

// A data location is either a flows CSV or a directory holding flows.csv (or
// flows_A.csv + flows_B.csv) and, usually, topology.json.
struct Dataset {
  SeriesSet data;
  std::optional<Topology> topology;
  std::vector<std::string> files;
};

Dataset load_dataset(const std::string& where) {
  if (where.empty()) throw ConfigError("--data is required");
  fs::path p(where);
  Dataset d;
  fs::path dir = fs::is_directory(p) ? p : p.parent_path();
  if (fs::is_regular_file(p)) {
    d.data = read_flows_csv(p.string());
    d.files.push_back(p.string());
  } else if (fs::is_regular_file(p / "flows.csv")) {
    d.data = read_flows_csv((p / "flows.csv").string());
    d.files.push_back((p / "flows.csv").string());
  } else if (fs::is_regular_file(p / "flows_A.csv")) {
    std::vector<SeriesSet> parts;
    for (const char* name : {"flows_A.csv", "flows_B.csv"})
      if (fs::is_regular_file(p / name)) {
        parts.push_back(read_flows_csv((p / name).string()));
        d.files.push_back((p / name).string());
      }
    d.data = concat_stations(std::move(parts));
  } else {
    throw DataError("no flow data at " + where);
  }
  if (fs::is_regular_file(dir / "topology.json")) {
    d.topology = Topology::load((dir / "topology.json").string());
    d.files.push_back((dir / "topology.json").string());
    // canonical station order, so models see the same layout whatever the file order
    SeriesSet ordered;
    for (const auto& s : d.topology->stations()) ordered.series.push_back(d.data.at(s));
    if (ordered.series.size() != d.data.series.size())
      throw SchemaError("flow data has stations that are not in the topology");
    d.data = std::move(ordered);
  }
  return d;
}

// ---------------------------------------------------------------------------

int cmd_generate(const Flags& f) {
  auto cfg = effective_config(f);
  auto out = prepare_out(f.out);
  auto& g = cfg.generator;
  g.cfg.topology = g.topology_file ? Topology::load(*g.topology_file) : make_corridor(g.mainline, g.ramp_every);
  auto gen = generate(g.cfg);
  std::vector<std::string> outputs;
  if (f.split_directions) {
    for (auto kind : {StationKind::MainlineA, StationKind::MainlineB}) {
      SeriesSet part;
      for (const auto& d : g.cfg.topology.directions())
        if (d.kind == kind)
          for (const auto& s : g.cfg.topology.stations())
            if (std::find(d.mainline.begin(), d.mainline.end(), s) != d.mainline.end() ||
                std::any_of(d.links.begin(), d.links.end(),
                            [&](const Attachment& a) { return a.kind != AttachmentKind::None && a.ramp == s; }))
              part.series.push_back(gen.observed.at(s));
      if (part.series.empty()) continue;
      std::string name = std::string("flows_") + kind_letter(kind) + ".csv";
      write_flows_csv((out / name).string(), part);
      outputs.push_back(name);
    }
  } else {
    write_flows_csv((out / "flows.csv").string(), gen.observed);
    outputs.push_back("flows.csv");
  }
  write_flows_csv((out / "truth.csv").string(), gen.truth);
  g.cfg.topology.save((out / "topology.json").string());
  outputs.insert(outputs.end(), {"truth.csv", "topology.json"});
  write_manifest(out, "generate", cfg, {}, outputs);
  std::cout << "generated " << gen.observed.stations() << " stations x " << gen.observed.length() << " TIs -> "
            << out.string() << "\n";
  return 0;
}

int cmd_validate(const Flags& f) {
  auto cfg = effective_config(f);
  auto ds = load_dataset(f.data);
  if (!ds.topology) throw DataError("validate-topology needs topology.json next to the data");
  const double eps = cfg.effective_epsilon();
  auto reps = validate_topology(*ds.topology, ds.data, eps);
  std::size_t checked = 0, passing = 0, links_ok = 0;
  for (const auto& r : reps) {
    checked += r.checked_cells();
    passing += r.passing_cells();
    links_ok += r.passed();
  }
  double rate = checked ? static_cast<double>(passing) / static_cast<double>(checked) : 1.0;
  if (!f.out.empty()) {
    auto out = prepare_out(f.out);
    write_conservation_csv((out / "conservation.csv").string(), reps);
    write_manifest(out, "validate-topology", cfg, ds.files, {"conservation.csv"});
  }
  std::cout << "links " << reps.size() << ", fully passing " << links_ok << ", cells " << passing << "/" << checked
            << " (" << fmt_num(100 * rate, 2) << "%) at epsilon " << fmt_num(eps) << "\n";
  if (rate < cfg.min_pass_rate)
    throw Error("conservation", "cell pass rate " + fmt_num(rate) + " below " + fmt_num(cfg.min_pass_rate));
  return 0;
}

std::vector<DateRange> profile_period(const RunConfig& cfg, const SeriesSet& data) {
  try {
    return cfg.split.resolve(data).train;
  } catch (const ConfigError&) {
    Date a = date_of(data.start()), b = date_of(data.time_at(data.length()) - 1);
    return {DateRange{a, b}};
  }
}

int cmd_profile(const Flags& f) {
  auto cfg = effective_config(f);
  auto ds = load_dataset(f.data);
  auto out = prepare_out(f.out);
  auto profiles = build_profiles(ds.data, profile_period(cfg, ds.data), exclusions(f));
  write_profiles_csv((out / "profiles.csv").string(), profiles);
  std::vector<std::string> outputs{"profiles.csv"};

  std::vector<MissingRun> runs;
  if (ds.topology) runs = detect_missing(ds.data, *ds.topology);
  for (const auto& s : ds.data.series)
    for (auto& r : runs_from_mask(s)) runs.push_back(r);
  runs = merge_runs(runs);
  write_missing_runs_csv((out / "missing_runs.csv").string(), ds.data, runs);
  write_monthly_counts_csv((out / "monthly_missing.csv").string(), monthly_missing_counts(ds.data, runs));
  outputs.insert(outputs.end(), {"missing_runs.csv", "monthly_missing.csv"});

  auto cmap = congestion_map(profiles, cfg.generator.cfg.capacity, 0);
  write_congestion_csv((out / "congestion.csv").string(), cmap);
  std::vector<std::string> labels;
  for (const auto& s : cmap.stations) labels.push_back(s.render());
  write_heat_svg((out / "congestion.svg").string(), "Flow/capacity, Monday", labels, cmap.ratio);
  outputs.insert(outputs.end(), {"congestion.csv", "congestion.svg"});

  const auto& p0 = profiles.at(std::min(f.station, profiles.size() - 1));
  SvgLine mean{"mean", "black", {}}, lo{"p20", "steelblue", {}}, hi{"p80", "firebrick", {}};
  for (int i = 0; i < kIntervalsPerDay; ++i) {
    mean.y.push_back(p0.cell(0, i).mean);
    lo.y.push_back(p0.cell(0, i).p20);
    hi.y.push_back(p0.cell(0, i).p80);
  }
  write_line_svg((out / "profile.svg").string(), "Monday profile " + p0.station.render(), {mean, lo, hi}, "TI",
                 "veh/TI");
  outputs.push_back("profile.svg");
  write_manifest(out, "profile", cfg, ds.files, outputs);
  std::cout << "profiles for " << profiles.size() << " stations, " << runs.size() << " missing runs\n";
  return 0;
}

int cmd_impute(const Flags& f) {
  auto cfg = effective_config(f);
  auto ds = load_dataset(f.data);
  auto out = prepare_out(f.out);
  std::vector<MissingRun> runs;
  if (ds.topology) runs = detect_missing(ds.data, *ds.topology);
  for (const auto& s : ds.data.series)
    for (auto& r : runs_from_mask(s)) runs.push_back(r);
  runs = merge_runs(runs);
  ImputeOptions opt;
  opt.strategy = parse_impute_strategy(f.strategy);
  SeriesSet fixed;
  CsvWriter rep((out / "imputation.csv").string());
  rep.header({"station", "flagged", "imputed", "unimputable"});
  std::size_t left = 0;
  for (const auto& s : ds.data.series) {
    auto r = impute(s, runs, opt);
    std::size_t flagged = 0;
    for (const auto& m : runs)
      if (m.station == s.station) flagged += m.length;
    rep.row(s.station.render(), flagged, flagged - r.unimputable.size(), r.unimputable.size());
    left += r.unimputable.size();
    fixed.series.push_back(std::move(r.series));
  }
  write_flows_csv((out / "flows.csv").string(), fixed);
  write_missing_runs_csv((out / "missing_runs.csv").string(), ds.data, runs);
  std::vector<std::string> outputs{"flows.csv", "imputation.csv", "missing_runs.csv"};
  if (ds.topology) {
    ds.topology->save((out / "topology.json").string());
    outputs.push_back("topology.json");
  }
  write_manifest(out, "impute", cfg, ds.files, outputs);
  std::cout << "imputed " << runs.size() << " runs with " << f.strategy << ", " << left << " TIs left masked\n";
  return 0;
}

int cmd_train(const Flags& f) {
  auto cfg = effective_config(f);
  auto ds = load_dataset(f.data);
  auto out = prepare_out(f.out);
  auto split = cfg.split.resolve(ds.data);
  auto& m = cfg.model;
  m.stations = ds.data.stations();
  std::vector<std::string> outputs{"model.json"};

  if (m.arch == Arch::Dpp) {
    DppForecaster dpp(build_profiles(ds.data, split.train, exclusions(f)));
    save_forecaster(dpp, (out / "model.json").string());
    std::cout << "dpp profiles built from " << split.train.size() << " training range(s)\n";
  } else if (m.arch == Arch::Arima) {
    ArimaForecaster ar(m.stations);
    save_forecaster(ar, (out / "model.json").string());
    std::cout << "arima(2,1,0), refitted per window on the last 100 values\n";
  } else {
    m.validate();
    auto w = make_split_windows(ds.data, m.R, m.P, split);
    for (const auto* ws : {&w.train, &w.validation})
      for (const auto& msg : ws->warnings) std::cerr << "warning: " << msg << "\n";
    TrainConfig tc = cfg.train;
    tc.checkpoint_dir = (out / "checkpoints").string();
    auto res = train(m, w.train.samples, w.validation.samples, tc);
    if (res.report.stop == StopReason::Diverged)
      throw DivergenceError("training diverged at epoch " + std::to_string(res.report.epochs()));
    save_forecaster(*res.model, (out / "model.json").string());
    write_json(out / "train_report.json", res.report.to_json());
    CsvWriter c((out / "training_curve.csv").string());
    c.header({"epoch", "train_loss", "validation_rmse"});
    for (std::size_t e = 0; e < res.report.epochs(); ++e)
      c.row(e + 1, res.report.train_loss[e], res.report.validation_rmse[e]);
    outputs.insert(outputs.end(), {"train_report.json", "training_curve.csv"});
    std::cout << to_string(m.arch) << " R=" << m.R << " P=" << m.P << ": " << res.report.epochs()
              << " epochs, best " << res.report.best_epoch << " (validation RMSE "
              << fmt_num(res.report.best_validation_rmse()) << "), " << to_string(res.report.stop) << "\n";
  }
  write_manifest(out, "train", cfg, ds.files, outputs);
  return 0;
}

int cmd_evaluate(const Flags& f) {
  auto cfg = effective_config(f);
  auto ds = load_dataset(f.data);
  auto out = prepare_out(f.out);
  fs::path mp = f.model.empty() ? fs::path() : fs::path(f.model);
  if (mp.empty()) throw ConfigError("--model is required");
  if (fs::is_directory(mp)) mp /= "model.json";
  auto model = load_forecaster(mp.string());
  auto split = cfg.split.resolve(ds.data);
  DateRange range = f.dataset == "validation" ? split.validation : split.test;
  if (f.dataset != "test" && f.dataset != "validation") throw ConfigError("--dataset must be test or validation");

  std::vector<std::size_t> Ps = f.P;
  if (auto* nf = dynamic_cast<NeuralForecaster*>(model.get())) {
    if (Ps.empty()) Ps = {nf->config().P};
  } else if (Ps.empty()) {
    Ps = {cfg.model.P};
  }
  std::vector<MetricReport> rows;
  std::vector<std::string> outputs{"metrics.csv"};
  Date day = f.day ? parse_date(*f.day) : range.first;
  for (auto P : Ps) {
    auto m = evaluate(*model, ds.data, range, P, f.dataset);
    rows.push_back(m);
    std::string sfx = "_P" + std::to_string(P);
    write_station_metrics_csv((out / ("station_metrics" + sfx + ".csv")).string(), ds.data, m);
    auto r = residual_series(*model, ds.data, std::min(f.station, ds.data.stations() - 1), day, P);
    write_residuals_csv((out / ("residuals" + sfx + ".csv")).string(), r);
    write_line_svg((out / ("residuals" + sfx + ".svg")).string(),
                   m.model + " " + r.station.render() + " " + format_date(day) + " P=" + std::to_string(P),
                   {{"observed", "black", r.observed}, {"predicted", "firebrick", r.predicted}}, "TI", "veh/TI");
    outputs.insert(outputs.end(), {"station_metrics" + sfx + ".csv", "residuals" + sfx + ".csv",
                                   "residuals" + sfx + ".svg"});
    std::cout << m.model << " P=" << P << " " << f.dataset << ": RMSE " << fmt_num(m.rmse) << " MAE "
              << fmt_num(m.mae) << " SMAPE " << fmt_num(m.smape) << " (" << m.points << " points, peak max rel err "
              << fmt_opt(r.peak_max_relative_error) << ")\n";
  }
  write_metrics_csv((out / "metrics.csv").string(), rows);
  auto inputs = ds.files;
  inputs.push_back(mp.string());
  write_manifest(out, "evaluate", cfg, inputs, outputs);
  return 0;
}

int cmd_sweep(const Flags& f) {
  auto cfg = effective_config(f);
  auto ds = load_dataset(f.data);
  auto out = prepare_out(f.out);
  auto split = cfg.split.resolve(ds.data);
  ModelConfig base = cfg.model;
  base.stations = ds.data.stations();
  SweepOptions opt;
  opt.Rs = f.R ? std::vector<std::size_t>{*f.R} : cfg.sweep.Rs;
  opt.Ps = f.P.empty() ? cfg.sweep.Ps : f.P;
  opt.repeats = cfg.sweep.repeats;
  opt.workers = f.workers;
  opt.on_task = [](std::size_t R, std::size_t P, std::size_t k, double v) {
    std::cerr << "  R=" << R << " P=" << P << " repeat " << k << ": validation RMSE " << fmt_opt(v) << "\n";
  };
  std::optional<std::vector<DailyProfile>> prof;
  if (base.arch == Arch::Dpp) prof = build_profiles(ds.data, split.train, exclusions(f));
  auto res = sweep(ds.data, split, base, cfg.train, opt, prof ? &*prof : nullptr);
  write_sweep_csv((out / "sweep.csv").string(), res);
  write_best_r_csv((out / "best_r.csv").string(), res);
  std::vector<SvgLine> lines;
  const char* colours[] = {"black", "firebrick", "steelblue", "darkgreen", "darkorange"};
  for (std::size_t k = 0; k < res.Ps.size(); ++k) {
    SvgLine l{"P=" + std::to_string(res.Ps[k]), colours[k % 5], {}};
    for (auto R : res.Rs) l.y.push_back(res.cell(R, res.Ps[k]).mean_validation);
    lines.push_back(l);
  }
  write_line_svg((out / "sweep.svg").string(), res.arch + " validation RMSE over R", lines, "R index", "RMSE");
  write_manifest(out, "sweep", cfg, ds.files, {"sweep.csv", "best_r.csv", "sweep.svg"});
  for (const auto& [P, R] : res.best_r) std::cout << res.arch << " P=" << P << ": best R=" << R << "\n";
  std::size_t div = 0;
  for (const auto& c : res.cells) div += c.diverged;
  if (div) std::cout << div << " diverged run(s) excluded\n";
  return 0;
}

int cmd_report(const Flags& f) {
  if (f.data.empty()) throw ConfigError("--data (results directory) is required");
  if (!fs::is_directory(f.data)) throw DataError("no results: " + f.data + " is not a directory");
  std::vector<fs::path> metric_files, best_files;
  for (const auto& e : fs::recursive_directory_iterator(f.data)) {
    if (!e.is_regular_file()) continue;
    if (!f.out.empty() && fs::weakly_canonical(e.path().parent_path()) == fs::weakly_canonical(f.out)) continue;
    if (e.path().filename() == "metrics.csv") metric_files.push_back(e.path());
    if (e.path().filename() == "best_r.csv") best_files.push_back(e.path());
  }
  if (metric_files.empty() && best_files.empty()) throw DataError("no results under " + f.data);
  std::sort(metric_files.begin(), metric_files.end());
  std::sort(best_files.begin(), best_files.end());
  auto out = prepare_out(f.out);
  std::vector<MetricReport> rows;
  for (const auto& p : metric_files)
    for (auto& m : read_metrics_csv(p.string())) rows.push_back(m);
  std::stable_sort(rows.begin(), rows.end(), [](const MetricReport& a, const MetricReport& b) {
    return std::tie(a.dataset, a.P, a.model) < std::tie(b.dataset, b.P, b.model);
  });
  std::vector<std::string> outputs;
  if (!rows.empty()) {
    write_metrics_csv((out / "comparison.csv").string(), rows);
    outputs.push_back("comparison.csv");
  }
  if (!best_files.empty()) {
    std::ofstream o(out / "best_r.csv");
    o << "model,P,bestR,mean_val_rmse,mean_test_rmse\n";
    for (const auto& p : best_files) {
      std::ifstream in(p);
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line))
        if (!line.empty()) o << line << "\n";
    }
    outputs.push_back("best_r.csv");
  }
  RunConfig cfg = f.config.empty() ? RunConfig{} : RunConfig::load(f.config);
  write_manifest(out, "report", cfg, {f.data}, outputs);
  for (const auto& m : rows)
    std::cout << m.model << " " << m.dataset << " R=" << m.R << " P=" << m.P << " RMSE " << fmt_num(m.rmse) << "\n";
  return 0;
}

void error_record(const std::string& code, const std::string& message) {
  json e{{"error", {{"code", code}, {"message", message}}}};
  std::cerr << e.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Freeway flow forecasting toolkit"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Flags f;

  auto common = [&](CLI::App* s, bool data) {
    s->add_option("--config", f.config, "JSON run config")->check(CLI::ExistingFile);
    s->add_option("--out", f.out, "output directory");
    s->add_option("--seed", f.seed, "overrides every seed in the config");
    if (data) s->add_option("--data", f.data, "flows CSV or a directory with flows.csv and topology.json");
  };

  auto* gen = app.add_subcommand("generate", "synthetic corridor data");
  common(gen, false);
  gen->add_flag("--split-directions", f.split_directions, "one CSV per direction");

  auto* val = app.add_subcommand("validate-topology", "conservation checks on every link");
  common(val, true);
  val->add_option("--eps", f.eps, "tolerance, veh/TI (default 3 x generator noise sigma)");
  val->add_option("--min-pass-rate", f.min_pass_rate, "fraction of cells that must pass (default 0.99)");

  auto* prof = app.add_subcommand("profile", "daily profiles, missing runs, congestion map");
  common(prof, true);
  prof->add_option("--exclude-range", f.exclude, "YYYY-MM-DD:YYYY-MM-DD left out of profiles");
  prof->add_option("--station", f.station, "station index for the profile plot");

  auto* imp = app.add_subcommand("impute", "detect missing runs and fill them");
  common(imp, true);
  imp->add_option("--strategy", f.strategy, "monthly-dow | adjacent-day | neighbour-ti")
      ->check(CLI::IsMember({"monthly-dow", "adjacent-day", "neighbour-ti"}));

  auto archs = CLI::IsMember({"bpnn", "sep-bpnn", "cnn", "lstm", "cnn-lstm", "dpp", "arima"});
  auto* tr = app.add_subcommand("train", "train one model");
  common(tr, true);
  tr->add_option("--arch", f.arch)->check(archs);
  tr->add_option("--R", f.R, "past horizon");
  tr->add_option("--P", f.P, "future horizon")->expected(1);
  tr->add_option("--exclude-range", f.exclude, "left out of DPP profiles");
  tr->add_option("--max-epochs", f.max_epochs);

  auto* ev = app.add_subcommand("evaluate", "score a trained model");
  common(ev, true);
  ev->add_option("--model", f.model, "model.json or its directory")->required();
  ev->add_option("--P", f.P, "future horizon(s)");
  ev->add_option("--dataset", f.dataset, "test | validation");
  ev->add_option("--day", f.day, "day for the residual plot (default: first day of the range)");
  ev->add_option("--station", f.station, "station index for the residual plot");

  auto* sw = app.add_subcommand("sweep", "R x P grid with repeats");
  common(sw, true);
  sw->add_option("--arch", f.arch)->check(archs);
  sw->add_option("--R", f.R, "single R instead of the config grid");
  sw->add_option("--P", f.P, "P values instead of the config grid");
  sw->add_option("--workers", f.workers, "parallel training tasks")->check(CLI::PositiveNumber);
  sw->add_option("--repeats", f.repeats);
  sw->add_option("--max-epochs", f.max_epochs);
  sw->add_option("--exclude-range", f.exclude);

  auto* rep = app.add_subcommand("report", "collect metrics and sweep tables");
  rep->add_option("--data", f.data, "results directory")->required();
  rep->add_option("--out", f.out, "report directory");
  rep->add_option("--config", f.config)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_record("usage", e.what());
    return 2;
  }

  try {
    if (*gen) return cmd_generate(f);
    if (*val) return cmd_validate(f);
    if (*prof) return cmd_profile(f);
    if (*imp) return cmd_impute(f);
    if (*tr) return cmd_train(f);
    if (*ev) return cmd_evaluate(f);
    if (*sw) return cmd_sweep(f);
    if (*rep) {
      if (f.out.empty()) f.out = (fs::path(f.data) / "report").string();
      return cmd_report(f);
    }
  } catch (const Error& e) {
    error_record(e.code(), e.what());
    return e.code() == "conservation" ? 1 : 2;
  } catch (const std::exception& e) {
    error_record("internal", e.what());
    return 3;
  }
  return 0;
}
