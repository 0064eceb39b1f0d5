// spdcal: command-line front end. Every subcommand writes one structured
// key-value report (see include/spdcal/report.hpp) to stdout or --report.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include "spdcal/allan.hpp"
#include "spdcal/beamscan.hpp"
#include "spdcal/calibration.hpp"
#include "spdcal/campaign.hpp"
#include "spdcal/consensus.hpp"
#include "spdcal/debudget.hpp"
#include "spdcal/kernels.hpp"
#include "spdcal/montecarlo.hpp"
#include "spdcal/ratecurve.hpp"
#include "spdcal/report.hpp"
#include "spdcal/timetag.hpp"

namespace fs = std::filesystem;
using namespace spdcal;

namespace {

struct Common {
  std::string isa = "auto";
  std::string report_path;
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
}

void emit(const Common& c, Report& r) {
  r.set("option.kernel_isa", std::string(kernels::isa_name(kernels::active_isa())));
  if (c.report_path.empty()) {
    std::cout << r.to_text();
  } else {
    write_text(c.report_path, r.to_text());
  }
}

void covariance_options(Report& r) {
  r.set("option.covariance_policy", "u(C,PM_mon)=0 u(X,Y)=0 u(W,Y)=0");
  r.set("option.osa_scale", "mean bright-minus-dark reading of the same meter; trap: R_cal");
}

// --- afterpulse -------------------------------------------------------------

struct AfterpulseArgs {
  std::vector<std::string> tags;
  double bin_ps = 156.25;
  double window_ns = 1000.0;
  double baseline_start_ns = 500.0;
  double threshold = timetag::kDefaultThresholdFraction;
  std::string histogram_dir;
};

void run_afterpulse(const Common& c, const AfterpulseArgs& a) {
  Report r("afterpulse");
  r.set("option.bin_width_s", a.bin_ps * 1e-12);
  r.set("option.window_s", a.window_ns * 1e-9);
  r.set("option.baseline_start_s", a.baseline_start_ns * 1e-9);
  r.set("option.threshold_fraction", a.threshold);
  std::vector<timetag::AfterpulsePoint> points;
  for (std::size_t k = 0; k < a.tags.size(); ++k) {
    const std::string id = "stream" + std::to_string(k + 1);
    r.input(id, a.tags[k]);
    const auto s = timetag::TimeTagStream::load(a.tags[k]);
    const auto h = timetag::interarrival_sum_histogram(s, a.bin_ps * 1e-12, a.window_ns * 1e-9);
    r.warnings(h.warnings);
    const auto dt = timetag::estimate_dead_time(h, a.threshold, a.baseline_start_ns * 1e-9);
    r.set("result." + id + ".events", static_cast<double>(s.size()));
    r.set("result." + id + ".rate_cps", s.mean_rate());
    double dead = 0.0;
    if (dt.detected()) {
      r.set("result." + id + ".dead_time_s", *dt.dead_time);
      dead = dt.dead_time->value();
    } else {
      r.set("result." + id + ".dead_time_s", "none");
    }
    const auto ap = timetag::afterpulse_probability(h, a.baseline_start_ns * 1e-9, dead);
    r.set("result." + id + ".afterpulse_probability", ap.probability);
    r.set("result." + id + ".baseline_counts_per_bin", ap.baseline);
    points.push_back({s.mean_rate(), ap.probability});
    if (!a.histogram_dir.empty()) {
      fs::create_directories(a.histogram_dir);
      std::string csv = "delay_s,counts\n";
      for (std::size_t b = 0; b < h.counts.size(); ++b)
        csv += format_double(h.bin_start(b)) + "," + std::to_string(h.counts[b]) + "\n";
      write_text(fs::path(a.histogram_dir) / (id + "_histogram.csv"), csv);
    }
  }
  if (points.size() >= 3) {
    const auto m = timetag::fit_afterpulse_model(points);
    r.set("result.model.ap0", m.ap0);
    r.set("result.model.ap_per_cps", m.ap);
    r.set("result.model.cov", m.cov_ap0_ap);
    r.set("result.model.chi2", m.chi2);
    r.set("result.model.dof", static_cast<double>(m.dof));
  } else {
    r.warnings({"fewer than 3 streams: no afterpulse model fitted"});
  }
  emit(c, r);
}

// --- allan ------------------------------------------------------------------

struct AllanArgs {
  std::string power;
  std::string ratio_with;
  std::string estimator = "overlapping";
  std::vector<double> taus;
  std::string plot;
};

void run_allan(const Common& c, const AllanArgs& a) {
  Report r("allan");
  const auto est = a.estimator == "overlapping" ? allan::Estimator::overlapping
                   : a.estimator == "non-overlapping"
                       ? allan::Estimator::non_overlapping
                       : throw InvalidArgument("estimator must be overlapping or non-overlapping");
  r.set("option.estimator", a.estimator);
  r.input("power", a.power);
  const auto rows = allan::load_power_csv(a.power);
  auto series = allan::bright_series(rows);
  std::optional<allan::SampledSeries> ratio;
  if (!a.ratio_with.empty()) {
    r.input("ratio_with", a.ratio_with);
    const auto other = allan::bright_series(allan::load_power_csv(a.ratio_with));
    ratio = allan::ratio_series(series, other);
  }
  const auto taus = a.taus.empty() ? allan::octave_taus(series, est) : a.taus;
  const auto pts = allan::relative_allan(series, taus, est);
  std::string csv = "tau_s,relative_allan_pct";
  if (ratio) csv += ",ratio_relative_allan_pct";
  csv += "\n";
  std::vector<allan::RelativePoint> rpts;
  if (ratio) rpts = allan::relative_allan(*ratio, taus, est);
  r.set("result.samples", static_cast<double>(series.size()));
  r.set("result.sample_interval_s", series.sample_interval);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const std::string key = "result.tau_" + format_double(pts[i].tau);
    r.set(key + ".relative_pct", pts[i].percent);
    if (ratio) r.set(key + ".ratio_relative_pct", rpts[i].percent);
    csv += format_double(pts[i].tau) + "," + format_double(pts[i].percent);
    if (ratio) csv += "," + format_double(rpts[i].percent);
    csv += "\n";
  }
  if (!a.plot.empty()) write_text(a.plot, csv);
  emit(c, r);
}

// --- de ---------------------------------------------------------------------

struct DeArgs {
  std::string scenario;
  std::vector<double> at;
  bool weighted = false;
  double baseline_start_ns = 500.0;
  std::string plot_dir;
};

void run_de(const Common& c, const DeArgs& a) {
  Report r("de");
  for (const auto& f : campaign::campaign_files(a.scenario)) r.input(f.filename().string(), f);
  const auto data = campaign::load_campaign(a.scenario);
  campaign::AnalysisOptions o;
  o.weighted_fit = a.weighted;
  o.baseline_start_s = a.baseline_start_ns * 1e-9;
  o.targets = a.at;
  const auto an = campaign::analyze_campaign(data, o);

  r.set("calibration.version", data.cal.version);
  r.set("option.mode", campaign::mode_name(data.mode));
  r.set("option.fit_weighting", a.weighted ? "weighted (1/u^2)" : "unweighted");
  r.set("option.mean_uncertainty_rule", "arithmetic mean of per-point k=1 u");
  r.set("option.baseline_start_s", o.baseline_start_s);
  r.set("option.outlier_threshold", o.outlier_threshold);
  covariance_options(r);

  r.set("result.afterpulse.ap0", an.afterpulse.model.ap0);
  r.set("result.afterpulse.ap_per_cps", an.afterpulse.model.ap);
  r.set("result.fit.intercept", an.fit.intercept);
  r.set("result.fit.slope_per_cps", an.fit.slope);
  r.set("result.fit.points", static_cast<double>(an.fit.n_points));
  for (const auto& e : an.estimates) {
    const std::string key = "result.de_at_" + format_double(e.target_rate);
    r.set(key, e.de.value);
    r.set(key + ".relative_expanded_k2_pct", expand(e.de.value, 2.0).relative_percent());
    r.set(key + ".mean_point_u", e.mean_point_u);
    r.set(key + ".prediction_u", e.prediction_u);
  }
  std::string flagged;
  for (std::size_t i : an.outliers) flagged += (flagged.empty() ? "" : " ") + data.measurements[i].id;
  r.set("result.outliers", flagged.empty() ? "none" : flagged);

  // Budget of the measurement closest to the first target rate.
  if (!an.estimates.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < an.points.size(); ++i)
      if (std::fabs(an.points[i].rate - an.estimates[0].target_rate) <
          std::fabs(an.points[best].rate - an.estimates[0].target_rate))
        best = i;
    r.set("result.budget_measurement", data.measurements[best].id);
    r.set("result.budget_measurement.de", an.budgets[best].de.value);
    r.budget(an.budgets[best]);
  }
  r.warnings(an.warnings);

  if (!a.plot_dir.empty()) {
    fs::create_directories(a.plot_dir);
    write_text(fs::path(a.plot_dir) / "de_points.csv", ratecurve::points_plot_csv(an.points));
    const auto means = ratecurve::aggregate_by_setting(an.points);
    write_text(fs::path(a.plot_dir) / "de_setting_means.csv", ratecurve::means_plot_csv(means));
  }
  emit(c, r);
}

// --- budget -----------------------------------------------------------------

struct BudgetArgs {
  std::string calibration;
  std::string mode = "fiber";
  std::size_t mc_draws = 0;
  std::uint64_t seed = 1;
};

void run_budget(const Common& c, const BudgetArgs& a) {
  Report r("budget");
  r.input("calibration", a.calibration);
  const auto cal = CalibrationConstants::load(a.calibration);
  const auto mode = campaign::parse_mode(a.mode);
  r.set("calibration.version", cal.version);
  r.set("option.mode", campaign::mode_name(mode));
  r.set("option.observations", "reference: 1e5 counts/s, 25 x 1 s gates, 25 meter readings at 0.035 % scatter");
  covariance_options(r);
  debudget::Budget b;
  std::optional<montecarlo::MeasurementModel> model;
  if (mode == campaign::Mode::fiber) {
    const auto in = campaign::reference_fiber_inputs(cal);
    b = debudget::fiber_budget(in);
    if (a.mc_draws) model = montecarlo::fiber_chain_model(in);
  } else {
    const auto in = campaign::reference_freespace_inputs(cal);
    b = debudget::freespace_budget(in);
    if (a.mc_draws) model = montecarlo::freespace_chain_model(in);
  }
  r.set("result.de", b.de.value);
  r.set("result.relative_u_pct", 100.0 * b.de.relative());
  r.set("result.relative_expanded_k2_pct", expand(b.de.value, 2.0).relative_percent());
  if (model) {
    const auto mc = montecarlo::monte_carlo_uncertainty(*model, a.mc_draws, a.seed);
    r.set("option.mc_draws", static_cast<double>(a.mc_draws));
    r.set("option.mc_seed", static_cast<double>(a.seed));
    r.set("result.mc.de", mc.value);
    r.set("result.mc.relative_u_pct", 100.0 * mc.value.u() / mc.value.value());
  }
  r.budget(b);
  r.warnings(b.warnings);
  emit(c, r);
}

// --- consensus --------------------------------------------------------------

struct ConsensusArgs {
  std::string runs;
  double level = 0.95;
};

void run_consensus(const Common& c, const ConsensusArgs& a) {
  Report r("consensus");
  r.input("runs", a.runs);
  const auto runs = consensus::load_runs_csv(a.runs);
  r.set("option.procedure", "equal-weight linear opinion pool (Gaussian mixture)");
  r.set("option.level", a.level);
  const auto ci = consensus::coverage_interval(runs, a.level);
  r.set("result.runs", static_cast<double>(runs.size()));
  r.set("result.mean", consensus::pool_mean(runs));
  r.set("result.interval.lo", ci.lo);
  r.set("result.interval.hi", ci.hi);
  r.set("result.relative_expanded_pct", consensus::relative_expanded(runs, ci));
  for (const auto& run : runs)
    r.set("result.run." + run.label + ".relative_expanded_k2_pct", expand(run.de, 2.0).relative_percent());
  emit(c, r);
}

// --- beamscan ---------------------------------------------------------------

struct BeamscanArgs {
  std::string grid;
  std::vector<double> diameters_um;
  std::string center = "centroid";
  double slope_window_um = 0.0;
  double repeatability_um = 5.0;
  bool shot_corrected = false;
};

void run_beamscan(const Common& c, const BeamscanArgs& a) {
  Report r("beamscan");
  r.input("grid", a.grid);
  const auto g = beamscan::ScanGrid::load(a.grid);
  beamscan::Point center;
  if (a.center == "centroid") {
    center = beamscan::intensity_centroid(g);
  } else if (a.center == "half-max") {
    center = beamscan::half_max_centroid(g);
  } else {
    const auto parts = split(a.center, ',');
    const auto x = parts.size() == 2 ? parse_double(parts[0]) : std::nullopt;
    const auto y = parts.size() == 2 ? parse_double(parts[1]) : std::nullopt;
    if (!x || !y) throw InvalidArgument("--center must be centroid, half-max or x_um,y_um");
    center = {*x * 1e-6, *y * 1e-6};
  }
  r.set("option.center", a.center);
  r.set("option.pixel_classification", "pixel-center distance");
  r.set("result.center_x_um", center.x * 1e6);
  r.set("result.center_y_um", center.y * 1e6);
  for (double d : a.diameters_um) {
    const std::string key = "result.d_" + format_double(d) + "um";
    r.set(key + ".fraction_outside", beamscan::fraction_outside_diameter(g, center, d * 1e-6));
    try {
      r.set(key + ".relative_std", beamscan::region_std(g, center, d * 1e-6));
      if (a.shot_corrected)
        r.set(key + ".relative_std_shot_corrected", beamscan::region_std_shot_corrected(g, center, d * 1e-6));
    } catch (const InvalidArgument& e) {
      r.set(key + ".relative_std", std::string("n/a (") + e.what() + ")");
    }
  }
  if (a.slope_window_um > 0.0) {
    const double s = beamscan::center_slope(g, center, a.slope_window_um * 1e-6);
    r.set("option.repeatability_um", a.repeatability_um);
    r.set("result.slope_pct_per_um", s);
    r.set("result.alignment_u_pct", beamscan::alignment_uncertainty(s, a.repeatability_um * 1e-6));
  }
  emit(c, r);
}

// --- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string scenario;
  std::uint64_t seed = 1;
  std::string out;
};

void run_simulate(const Common& c, const SimulateArgs& a) {
  Report r("simulate");
  r.input("scenario", a.scenario);
  const auto sc = campaign::Scenario::load(a.scenario);
  const auto data = campaign::simulate_campaign(sc, a.seed);
  const auto path = campaign::save_campaign(data, a.out);
  r.set("calibration.version", sc.cal.version);
  r.set("option.seed", std::to_string(a.seed));
  r.set("option.generator", "mt19937_64 via seed_seq{seed_lo, seed_hi, stream}");
  r.set("result.scenario", path.string());
  r.set("result.measurements", static_cast<double>(data.measurements.size()));
  for (double t : data.targets) r.set("result.truth.de_at_" + format_double(t), data.truth_at(t));
  emit(c, r);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Single-photon detector calibration toolkit"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--isa", common.isa, "Kernel set: auto, scalar or avx2")->check(CLI::IsMember({"auto", "scalar", "avx2"}));
  app.add_option("--report", common.report_path, "Write the report here instead of stdout");

  AfterpulseArgs ap;
  auto* s_ap = app.add_subcommand("afterpulse", "Dead time and afterpulse probability from time-tag files");
  s_ap->add_option("--tags", ap.tags, "Time-tag files")->required()->check(CLI::ExistingFile);
  s_ap->add_option("--bin-ps", ap.bin_ps, "Histogram bin width (ps)");
  s_ap->add_option("--window-ns", ap.window_ns, "Delay window (ns)");
  s_ap->add_option("--baseline-start-ns", ap.baseline_start_ns, "Start of the flat baseline (ns)");
  s_ap->add_option("--threshold", ap.threshold, "Dead-time threshold as a fraction of the baseline");
  s_ap->add_option("--histogram-dir", ap.histogram_dir, "Write per-stream histogram CSVs here");

  AllanArgs al;
  auto* s_al = app.add_subcommand("allan", "Relative Allan deviation of a power log");
  s_al->add_option("--power", al.power, "Power CSV (t_s, reading_W, range_id, dark)")->required()->check(CLI::ExistingFile);
  s_al->add_option("--ratio-with", al.ratio_with, "Second log; also analyze power / this")->check(CLI::ExistingFile);
  s_al->add_option("--estimator", al.estimator, "overlapping or non-overlapping");
  s_al->add_option("--tau", al.taus, "Averaging times (s); default octaves");
  s_al->add_option("--plot", al.plot, "Write tau, relative Allan CSV here");

  DeArgs de;
  auto* s_de = app.add_subcommand("de", "DE versus rate for a campaign scenario");
  s_de->add_option("--scenario", de.scenario, "Analysis scenario file")->required()->check(CLI::ExistingFile);
  s_de->add_option("--at", de.at, "Target count rates (cnt/s)");
  s_de->add_flag("--weighted", de.weighted, "Weighted (1/u^2) rate-curve fit");
  s_de->add_option("--baseline-start-ns", de.baseline_start_ns, "Afterpulse baseline start (ns)");
  s_de->add_option("--plot-dir", de.plot_dir, "Write DE point and setting-mean CSVs here");

  BudgetArgs bu;
  auto* s_bu = app.add_subcommand("budget", "Uncertainty budget for a calibration configuration");
  s_bu->add_option("--calibration", bu.calibration, "Calibration constants")->required()->check(CLI::ExistingFile);
  s_bu->add_option("--mode", bu.mode, "fiber or free-space");
  s_bu->add_option("--mc", bu.mc_draws, "Monte-Carlo draws for a cross-check (>= 10000)");
  s_bu->add_option("--seed", bu.seed, "Monte-Carlo seed");

  ConsensusArgs co;
  auto* s_co = app.add_subcommand("consensus", "Pool run results");
  s_co->add_option("--runs", co.runs, "Run results CSV")->required()->check(CLI::ExistingFile);
  s_co->add_option("--level", co.level, "Coverage probability");

  BeamscanArgs bs;
  auto* s_bs = app.add_subcommand("beamscan", "Beam and detector scan statistics");
  s_bs->add_option("--grid", bs.grid, "Scan CSV")->required()->check(CLI::ExistingFile);
  s_bs->add_option("--diameter-um", bs.diameters_um, "Circle diameters (um)");
  s_bs->add_option("--center", bs.center, "centroid, half-max or x_um,y_um");
  s_bs->add_option("--slope-window-um", bs.slope_window_um, "Square window for the center slope (um)");
  s_bs->add_option("--repeatability-um", bs.repeatability_um, "Positioning repeatability (um)");
  s_bs->add_flag("--shot-corrected", bs.shot_corrected, "Also report shot-noise-subtracted std");

  SimulateArgs si;
  auto* s_si = app.add_subcommand("simulate", "Simulate a campaign and write its analysis inputs");
  s_si->add_option("--scenario", si.scenario, "Generator scenario")->required()->check(CLI::ExistingFile);
  s_si->add_option("--seed", si.seed, "Seed");
  s_si->add_option("--out", si.out, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (common.isa == "scalar") kernels::force_isa(kernels::Isa::scalar);
    if (common.isa == "avx2") {
      if (!kernels::isa_available(kernels::Isa::avx2)) throw InvalidArgument("AVX2 kernels not available on this machine");
      kernels::force_isa(kernels::Isa::avx2);
    }
    if (*s_ap) run_afterpulse(common, ap);
    if (*s_al) run_allan(common, al);
    if (*s_de) run_de(common, de);
    if (*s_bu) run_budget(common, bu);
    if (*s_co) run_consensus(common, co);
    if (*s_bs) run_beamscan(common, bs);
    if (*s_si) run_simulate(common, si);
  } catch (const std::exception& e) {
    std::cerr << "spdcal: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
