#include "spdcal/campaign.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "spdcal/allan.hpp"
#include "spdcal/simulator.hpp"
#include "spdcal/stats.hpp"

namespace spdcal::campaign {

using debudget::OsaInput;
using debudget::PowerObservation;

Mode parse_mode(const std::string& text) {
  if (text == "fiber") return Mode::fiber;
  if (text == "free-space" || text == "free_space") return Mode::free_space;
  throw InvalidArgument("mode must be 'fiber' or 'free-space', got '" + text + "'");
}

std::string mode_name(Mode mode) { return mode == Mode::fiber ? "fiber" : "free-space"; }

namespace {

std::filesystem::path relative_to(const std::string& origin, const std::string& file) {
  std::filesystem::path p(file);
  if (p.is_absolute()) return p;
  return std::filesystem::path(origin).parent_path() / p;
}

std::size_t get_count(const KeyValueFile& kv, const std::string& key, std::size_t fallback) {
  const long long v = kv.get_int(key, static_cast<long long>(fallback));
  if (v < 0) kv.fail(key, "a non-negative integer");
  return static_cast<std::size_t>(v);
}

}  // namespace

Scenario Scenario::from_keyvalue(const KeyValueFile& kv) {
  Scenario s;
  s.mode = parse_mode(kv.get_string("mode"));
  s.cal = CalibrationConstants::load(relative_to(kv.origin(), kv.get_string("calibration")));
  s.de_true = kv.get_double("de_true", s.de_true);
  s.dead_time_s = kv.get_double("dead_time_s", s.dead_time_s);
  s.afterpulse_ap0 = kv.get_double("afterpulse_ap0", s.afterpulse_ap0);
  s.afterpulse_ap = kv.get_double("afterpulse_ap", s.afterpulse_ap);
  s.afterpulse_tau_s = kv.get_double("afterpulse_tau_s", s.afterpulse_tau_s);
  s.dark_rate = kv.get_double("dark_rate", s.dark_rate);
  s.settings_cps = kv.get_doubles("settings_cps");
  s.repeats = get_count(kv, "repeats", s.repeats);
  s.n_intervals = get_count(kv, "n_intervals", s.n_intervals);
  s.n_dark_intervals = get_count(kv, "n_dark_intervals", s.n_dark_intervals);
  s.gate_s = kv.get_double("gate_s", s.gate_s);
  s.monitor_readings = get_count(kv, "monitor_readings", s.monitor_readings);
  s.ratio_readings = get_count(kv, "ratio_readings", s.ratio_readings);
  s.meter_white_rel = kv.get_double("meter_white_rel", s.meter_white_rel);
  s.ratio_nominal = kv.get_double("ratio_nominal", s.ratio_nominal);
  s.ratio_monitor_power_w = kv.get_double("ratio_monitor_power_w", s.ratio_monitor_power_w);
  if (kv.contains("afterpulse_cal_rates")) s.afterpulse_cal_rates = kv.get_doubles("afterpulse_cal_rates");
  s.afterpulse_cal_events = get_count(kv, "afterpulse_cal_events", s.afterpulse_cal_events);
  s.noiseless = kv.get_bool("noiseless", false);
  s.bistable_dark_rate = kv.get_double("bistable_dark_rate", 0.0);
  s.bistable_probability = kv.get_double("bistable_probability", 0.0);
  if (kv.contains("targets")) s.targets = kv.get_doubles("targets");

  if (!(s.de_true > 0.0 && s.de_true <= 1.0)) kv.fail("de_true", "a value in (0, 1]");
  if (s.settings_cps.empty()) kv.fail("settings_cps", "at least one rate");
  if (s.repeats == 0 || s.n_intervals == 0 || s.n_dark_intervals == 0) kv.fail("repeats", "positive repeat and interval counts");
  if (s.monitor_readings < 2 || s.ratio_readings < 2) kv.fail("monitor_readings", "at least 2 readings per log");
  if (!s.noiseless && s.afterpulse_cal_rates.size() < 3) kv.fail("afterpulse_cal_rates", "at least 3 rates");
  if (s.bistable_probability < 0.0 || s.bistable_probability > 1.0) kv.fail("bistable_probability", "a probability");
  return s;
}

Scenario Scenario::load(const std::filesystem::path& path) { return from_keyvalue(KeyValueFile::load(path)); }

// ---------------------------------------------------------------------------

namespace {

double hc() { return kPlanck * kSpeedOfLight; }

std::uint64_t mix(std::uint64_t seed, std::uint64_t k) { return seed ^ (0x9E3779B97F4A7C15ull * (k + 1)); }

// One realization of everything the analysis treats as a Type-B input.
struct Realized {
  double k_mon_dut = 1.0, k_mon_ratio = 1.0, k_pm = 1.0, cal_abs = 1.0;
  double b_mon = 0.0, b_pm = 0.0, b_trap = 0.0;
  double r_cal = 1.0, gain = 1.0;
  double lambda_m = 0.0, eta = 1.0;
  double stab = 0.0;
  double de_offset = 0.0;
  double v_err_bright = 0.0, v_err_dark = 0.0;
};

class Generator {
public:
  Generator(std::uint64_t seed, bool noiseless) : noiseless_(noiseless) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), 7u};
    engine_.seed(seq);
  }
  double draw(const Uncertain& x) { return noiseless_ ? x.value() : x.value() + x.u() * normal_(engine_); }
  double noise(double sigma) { return noiseless_ || sigma == 0.0 ? 0.0 : sigma * normal_(engine_); }
  double counts_mean(double expected_total, std::size_t n) {
    if (noiseless_) return expected_total / static_cast<double>(n);
    std::poisson_distribution<long long> p(expected_total);
    return static_cast<double>(p(engine_)) / static_cast<double>(n);
  }
  bool chance(double p) { return !noiseless_ && p > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(engine_) < p; }

private:
  bool noiseless_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::vector<double> meter_log(Generator& g, std::size_t n, double value, double sigma) {
  std::vector<double> v(n);
  for (auto& x : v) x = value + g.noise(sigma);
  return v;
}

std::optional<OsaInput> osa_for(const CalibrationConstants& cal, const std::string& meter) {
  if (cal.delta_lambda_osa_nm == 0.0) return std::nullopt;
  return OsaInput{cal.b_lambda_for(meter), Uncertain::exact(cal.delta_lambda_osa_nm), std::nullopt};
}

std::optional<Uncertain> eta_for(const CalibrationConstants& cal) {
  if (!cal.n_eff) return std::nullopt;
  return fiber_end_transmittance(*cal.n_eff, cal.u_eta_f);
}

}  // namespace

CampaignData simulate_campaign(const Scenario& sc, std::uint64_t seed) {
  const CalibrationConstants& cal = sc.cal;
  Generator g(seed, sc.noiseless);
  const double dl = cal.delta_lambda_osa_nm;
  const double lambda_nom = cal.wavelength_nm * 1e-9;
  const auto eta_nom = sc.mode == Mode::fiber ? eta_for(cal) : std::nullopt;

  Realized r;
  r.lambda_m = g.draw(Uncertain(lambda_nom, cal.u_osa_m));
  r.eta = eta_nom ? g.draw(*eta_nom) : 1.0;
  r.stab = g.noise(cal.stab_rel * sc.ratio_nominal);
  r.k_mon_dut = g.draw(cal.cal_nl_for("pm_mon", "dut"));
  r.k_mon_ratio = g.draw(cal.cal_nl_for("pm_mon", "ratio"));
  if (dl != 0.0) r.b_mon = g.draw(cal.b_lambda_for("pm_mon"));
  if (sc.mode == Mode::fiber) {
    r.k_pm = g.draw(cal.cal_nl_for("pm", "ratio"));
    r.cal_abs = g.draw(cal.cal_abs());
    if (dl != 0.0) r.b_pm = g.draw(cal.b_lambda_for("pm"));
  } else {
    r.r_cal = g.draw(cal.trap_responsivity());
    r.gain = g.draw(cal.trap_gain());
    if (dl != 0.0) r.b_trap = g.draw(cal.b_lambda_for("sitrap"));
    r.de_offset = g.noise(cal.reflect_rel * sc.de_true) + g.noise(cal.collect_rel * sc.de_true) +
                  g.noise(cal.align_rel * sc.de_true);
  }

  CampaignData d;
  d.mode = sc.mode;
  d.cal = cal;
  d.targets = sc.targets;
  d.de_true = sc.de_true;
  d.dead_time_s = sc.dead_time_s;
  d.seed = seed;

  // Ratio measurement at high power.
  const double p_mon_ratio = sc.ratio_monitor_power_w;
  const double y_read = r.k_mon_ratio * p_mon_ratio / (1.0 + r.b_mon * dl);
  d.ratio_monitor_bright = meter_log(g, sc.ratio_readings, y_read, sc.meter_white_rel * y_read);
  d.ratio_monitor_dark = meter_log(g, 5, 1e-3 * y_read, sc.meter_white_rel * y_read);
  for (auto& v : d.ratio_monitor_bright) v += 1e-3 * y_read;
  const double p_out_ratio = p_mon_ratio * sc.ratio_nominal;
  if (sc.mode == Mode::fiber) {
    const double x_read = r.k_pm * r.cal_abs * p_out_ratio / (1.0 + r.b_pm * dl);
    d.ratio_output_bright = meter_log(g, sc.ratio_readings, x_read * 1.001, sc.meter_white_rel * x_read);
    d.ratio_output_dark = meter_log(g, 5, 1e-3 * x_read, sc.meter_white_rel * x_read);
  } else {
    const double v = r.r_cal * (1.0 + r.b_trap * dl) * r.gain * p_out_ratio;
    r.v_err_bright = g.noise(cal.voltmeter_cal_rel * v);
    r.v_err_dark = g.noise(cal.voltmeter_cal_rel * v);
    const double offset = 1e-3 * v;
    d.ratio_output_bright = meter_log(g, sc.ratio_readings, v + offset + r.v_err_bright, sc.meter_white_rel * v);
    d.ratio_output_dark = meter_log(g, 5, offset + r.v_err_dark, sc.meter_white_rel * v);
  }

  // DUT measurements.
  const double ap0 = sc.afterpulse_ap0, ap = sc.afterpulse_ap, tau = sc.dead_time_s;
  const double de_eff = sc.de_true + r.de_offset;
  const double eta_n = eta_nom ? eta_nom->value() : 1.0;
  for (std::size_t s = 0; s < sc.settings_cps.size(); ++s) {
    const double target = sc.settings_cps[s];
    const double a_nom = simulator::primary_rate_for(target, tau, ap0, ap) - sc.dark_rate;
    if (!(a_nom > 0.0)) throw InvalidArgument("setting rate below the dark rate");
    const double p_out_nom = a_nom / sc.de_true * hc() / (lambda_nom * eta_n);
    const double p_mon = p_out_nom / sc.ratio_nominal;
    const double phi = p_mon * (sc.ratio_nominal + r.stab) * r.eta * r.lambda_m / hc();
    const std::string setting_id = "S" + std::to_string(s + 1);
    for (std::size_t k = 0; k < sc.repeats; ++k) {
      Measurement m;
      m.id = setting_id + "." + std::to_string(k + 1);
      m.setting_id = setting_id;
      double dark_bright = sc.dark_rate;
      if (g.chance(sc.bistable_probability)) {
        dark_bright = sc.bistable_dark_rate;
        m.dark_anomaly = true;
      }
      const double c = simulator::registered_rate(de_eff * phi + dark_bright, tau, ap0, ap);
      const double c_dark = simulator::registered_rate(sc.dark_rate, tau, ap0, ap);
      const double c_bar = g.counts_mean(c * sc.gate_s * static_cast<double>(sc.n_intervals), sc.n_intervals);
      const double c_dark_bar =
          g.counts_mean(c_dark * sc.gate_s * static_cast<double>(sc.n_dark_intervals), sc.n_dark_intervals);
      m.counts = debudget::CountObservation::from_counts(c_bar, sc.n_intervals, c_dark_bar, sc.n_dark_intervals, sc.gate_s);
      const double read = r.k_mon_dut * p_mon / (1.0 + r.b_mon * dl);
      m.monitor_bright = meter_log(g, sc.monitor_readings, read * 1.001, sc.meter_white_rel * read);
      m.monitor_dark = meter_log(g, 5, 1e-3 * read, sc.meter_white_rel * read);
      d.measurements.push_back(std::move(m));
    }
  }

  if (sc.noiseless) {
    timetag::AfterpulseModel model;
    model.ap0 = Uncertain::exact(ap0);
    model.ap = Uncertain::exact(ap);
    model.rate_min = 0.0;
    model.rate_max = 2.0 * *std::max_element(sc.settings_cps.begin(), sc.settings_cps.end());
    d.afterpulse_model = model;
  } else {
    for (std::size_t k = 0; k < sc.afterpulse_cal_rates.size(); ++k) {
      const double c = sc.afterpulse_cal_rates[k];
      const double a = simulator::primary_rate_for(c, tau, ap0, ap) - sc.dark_rate;
      if (!(a > 0.0)) throw InvalidArgument("afterpulse calibration rate below the dark rate");
      simulator::SourceConfig src;
      src.rate = a / sc.de_true;
      simulator::DetectorConfig det;
      det.dead_time = tau;
      det.afterpulse_prob = ap0 + ap * c;
      det.afterpulse_tau = sc.afterpulse_tau_s;
      det.dark_rate = sc.dark_rate;
      det.de_true = sc.de_true;
      const double duration = static_cast<double>(sc.afterpulse_cal_events) / c;
      d.afterpulse_streams.push_back(simulator::simulate_detections(src, det, duration, mix(seed, k)));
    }
  }
  return d;
}

// ---------------------------------------------------------------------------

AfterpulseCalibration calibrate_afterpulse(std::span<const timetag::TimeTagStream> streams,
                                           const AnalysisOptions& o) {
  AfterpulseCalibration out;
  for (std::size_t k = 0; k < streams.size(); ++k) {
    const auto hist = timetag::interarrival_sum_histogram(streams[k], o.bin_width_s, o.window_s);
    for (const auto& w : hist.warnings) out.warnings.push_back("stream " + std::to_string(k) + ": " + w);
    const auto dt = timetag::estimate_dead_time(hist, o.threshold_fraction, o.baseline_start_s);
    out.dead_times.push_back(dt.dead_time);
    double dead = 0.0;
    if (dt.detected()) {
      dead = dt.dead_time->value();
    } else {
      out.warnings.push_back("stream " + std::to_string(k) + ": no dead time detected, integrating from zero delay");
    }
    const auto ap = timetag::afterpulse_probability(hist, o.baseline_start_s, dead);
    out.points.push_back({streams[k].mean_rate(), ap.probability});
  }
  out.model = timetag::fit_afterpulse_model(out.points);
  return out;
}

namespace {

debudget::FiberBudgetInputs fiber_inputs(const CampaignData& d, const Measurement& m,
                                         const timetag::AfterpulseModel& model) {
  const CalibrationConstants& cal = d.cal;
  debudget::FiberBudgetInputs in;
  in.counts = m.counts;
  in.afterpulse = model;
  in.monitor = PowerObservation{m.monitor_bright, m.monitor_dark, cal.cal_nl_for("pm_mon", "dut"), osa_for(cal, "pm_mon")};
  in.ratio.output = PowerObservation{d.ratio_output_bright, d.ratio_output_dark, cal.cal_nl_for("pm", "ratio"),
                                     osa_for(cal, "pm")};
  in.ratio.cal_abs = cal.cal_abs();
  in.ratio.monitor = PowerObservation{d.ratio_monitor_bright, d.ratio_monitor_dark, cal.cal_nl_for("pm_mon", "ratio"),
                                      osa_for(cal, "pm_mon")};
  const auto r0 = debudget::ratio_fiber(in.ratio);
  in.ratio.stab = debudget::stability_term(cal.stab_rel, r0.ratio.value());
  in.wavelength_m = Uncertain(cal.wavelength_nm * 1e-9, cal.u_osa_m);
  in.eta_f = eta_for(cal);
  return in;
}

debudget::FreeSpaceBudgetInputs freespace_inputs(const CampaignData& d, const Measurement& m,
                                                 const timetag::AfterpulseModel& model) {
  const CalibrationConstants& cal = d.cal;
  debudget::FreeSpaceBudgetInputs in;
  in.counts = m.counts;
  in.afterpulse = model;
  in.monitor = PowerObservation{m.monitor_bright, m.monitor_dark, cal.cal_nl_for("pm_mon", "dut"), osa_for(cal, "pm_mon")};
  in.trap.v_bright = d.ratio_output_bright;
  in.trap.v_dark = d.ratio_output_dark;
  in.trap.v_cal = Uncertain(0.0, cal.voltmeter_cal_rel * std::fabs(stats::mean(d.ratio_output_bright)));
  in.trap.responsivity_cal = cal.trap_responsivity();
  in.trap.responsivity_osa = osa_for(cal, "sitrap");
  in.trap.gain = cal.trap_gain();
  in.ratio_monitor = PowerObservation{d.ratio_monitor_bright, d.ratio_monitor_dark, cal.cal_nl_for("pm_mon", "ratio"),
                                      osa_for(cal, "pm_mon")};
  const auto r0 = debudget::ratio_freespace(in.trap, in.ratio_monitor, Uncertain::exact(0.0));
  in.stab = debudget::stability_term(cal.stab_rel, r0.ratio.value());
  in.wavelength_m = Uncertain(cal.wavelength_nm * 1e-9, cal.u_osa_m);
  in.variability = {cal.reflect_rel, cal.collect_rel, cal.align_rel};
  return in;
}

}  // namespace

debudget::Budget measurement_budget(const CampaignData& d, const Measurement& m, const timetag::AfterpulseModel& model) {
  if (d.mode == Mode::fiber) return debudget::fiber_budget(fiber_inputs(d, m, model));
  return debudget::freespace_budget(freespace_inputs(d, m, model));
}

CampaignAnalysis analyze_campaign(const CampaignData& d, const AnalysisOptions& o) {
  CampaignAnalysis out;
  if (d.measurements.size() < 3) throw InvalidArgument("campaign needs at least 3 measurements");
  if (d.afterpulse_model) {
    out.afterpulse.model = *d.afterpulse_model;
  } else {
    out.afterpulse = calibrate_afterpulse(d.afterpulse_streams, o);
    for (const auto& w : out.afterpulse.warnings) out.warnings.push_back("afterpulse: " + w);
  }
  for (const auto& m : d.measurements) {
    auto b = measurement_budget(d, m, out.afterpulse.model);
    for (const auto& w : b.warnings) out.warnings.push_back(m.id + ": " + w);
    out.points.push_back({m.setting_id, m.counts.rate(), b.de.value});
    out.budgets.push_back(std::move(b));
  }
  out.fit = ratecurve::fit_rate_curve(out.points, o.weighted_fit);
  out.outliers = ratecurve::flag_outliers(out.fit, out.points, o.outlier_threshold);
  const std::vector<double>& targets = o.targets.empty() ? d.targets : o.targets;
  for (double t : targets) {
    auto e = ratecurve::de_at_rate(out.fit, out.points, t);
    for (const auto& w : e.de.warnings) out.warnings.push_back(w);
    out.estimates.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw Error("cannot write " + p.string());
  f << text;
  if (!f) throw Error("failed writing " + p.string());
}

void append_log(std::vector<allan::PowerReading>& rows, const std::string& id, const std::vector<double>& bright,
                const std::vector<double>& dark) {
  double t = 0.0;
  for (double v : bright) rows.push_back({t++, v, id, false});
  for (double v : dark) rows.push_back({t++, v, id, true});
}

struct Log {
  std::vector<double> bright, dark;
};

std::map<std::string, Log> read_logs(const std::filesystem::path& p) {
  std::map<std::string, Log> logs;
  for (const auto& r : allan::load_power_csv(p)) {
    auto& l = logs[r.range_id];
    (r.dark ? l.dark : l.bright).push_back(r.reading_w);
  }
  return logs;
}

std::string uncertain_text(const Uncertain& x) { return format_double(x.value()) + " " + format_double(x.u()); }

std::string joined(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + format_double(x);
  return s;
}

}  // namespace

std::filesystem::path save_campaign(const CampaignData& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "calibration.cfg", d.cal.to_text());

  std::string counts = "measurement_id,setting_id,gate_s,n_intervals,c_bar,n_dark_intervals,c_dark\n";
  std::vector<allan::PowerReading> mon;
  for (const auto& m : d.measurements) {
    counts += m.id + "," + m.setting_id + "," + format_double(m.counts.gate_s) + "," + std::to_string(m.counts.n_intervals) +
              "," + format_double(m.counts.c_bar) + "," + std::to_string(m.counts.n_dark_intervals) + "," +
              format_double(m.counts.c_dark) + "\n";
    append_log(mon, m.id, m.monitor_bright, m.monitor_dark);
  }
  write_file(dir / "counts.csv", counts);
  write_file(dir / "monitor.csv", allan::power_csv_text(mon));
  std::vector<allan::PowerReading> out_rows, mon_rows;
  append_log(out_rows, "ratio", d.ratio_output_bright, d.ratio_output_dark);
  append_log(mon_rows, "ratio", d.ratio_monitor_bright, d.ratio_monitor_dark);
  write_file(dir / "ratio_output.csv", allan::power_csv_text(out_rows));
  write_file(dir / "ratio_monitor.csv", allan::power_csv_text(mon_rows));

  std::ostringstream sc;
  sc << "# analysis scenario written by spdcal simulate\n";
  sc << "mode = " << mode_name(d.mode) << "\n";
  sc << "calibration = calibration.cfg\n";
  sc << "counts = counts.csv\n";
  sc << "monitor = monitor.csv\n";
  sc << "ratio_output = ratio_output.csv\n";
  sc << "ratio_monitor = ratio_monitor.csv\n";
  if (d.afterpulse_model) {
    sc << "afterpulse.ap0 = " << uncertain_text(d.afterpulse_model->ap0) << "\n";
    sc << "afterpulse.ap = " << uncertain_text(d.afterpulse_model->ap) << "\n";
    sc << "afterpulse.cov = " << format_double(d.afterpulse_model->cov_ap0_ap) << "\n";
    sc << "afterpulse.rate_range = " << format_double(d.afterpulse_model->rate_min) << " "
       << format_double(d.afterpulse_model->rate_max) << "\n";
  } else {
    std::string names;
    for (std::size_t k = 0; k < d.afterpulse_streams.size(); ++k) {
      const std::string name = "tags_" + std::to_string(k + 1) + ".txt";
      d.afterpulse_streams[k].save(dir / name);
      names += (names.empty() ? "" : " ") + name;
    }
    sc << "afterpulse_streams = " << names << "\n";
  }
  sc << "targets = " << joined(d.targets) << "\n";
  sc << "seed = " << d.seed << "\n";
  sc << "truth.de_true = " << format_double(d.de_true) << "\n";
  sc << "truth.dead_time_s = " << format_double(d.dead_time_s) << "\n";
  const auto path = dir / "scenario.cfg";
  write_file(path, sc.str());
  return path;
}

CampaignData load_campaign(const std::filesystem::path& scenario_file) {
  const KeyValueFile kv = KeyValueFile::load(scenario_file);
  const std::string origin = kv.origin();
  CampaignData d;
  d.mode = parse_mode(kv.get_string("mode"));
  d.cal = CalibrationConstants::load(relative_to(origin, kv.get_string("calibration")));

  const auto counts_path = relative_to(origin, kv.get_string("counts"));
  const std::string text = read_text_file(counts_path, "counts CSV");
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 7)
      throw ParseError(counts_path.string(), line_no,
                       "7 columns 'measurement_id, setting_id, gate_s, n_intervals, c_bar, n_dark_intervals, c_dark'");
    if (cols[0] == "measurement_id") continue;
    const auto gate = parse_double(cols[2]);
    const auto n = parse_double(cols[3]);
    const auto c = parse_double(cols[4]);
    const auto nd = parse_double(cols[5]);
    const auto cd = parse_double(cols[6]);
    if (!gate || !(*gate > 0.0)) throw ParseError(counts_path.string(), line_no, "positive gate_s");
    if (!n || !nd || *n < 1.0 || *nd < 1.0 || *n != std::floor(*n) || *nd != std::floor(*nd))
      throw ParseError(counts_path.string(), line_no, "positive integer interval counts");
    if (!c || !cd || *c < 0.0 || *cd < 0.0) throw ParseError(counts_path.string(), line_no, "non-negative mean counts");
    Measurement m;
    m.id = cols[0];
    m.setting_id = cols[1];
    m.counts = debudget::CountObservation::from_counts(*c, static_cast<std::size_t>(*n), *cd,
                                                      static_cast<std::size_t>(*nd), *gate);
    d.measurements.push_back(std::move(m));
  }

  const auto mon_path = relative_to(origin, kv.get_string("monitor"));
  auto logs = read_logs(mon_path);
  for (auto& m : d.measurements) {
    auto it = logs.find(m.id);
    if (it == logs.end()) throw ParseError(mon_path.string(), 0, "monitor readings for measurement " + m.id);
    m.monitor_bright = it->second.bright;
    m.monitor_dark = it->second.dark;
  }
  auto ratio_log = [&](const std::string& key) {
    const auto p = relative_to(origin, kv.get_string(key));
    auto l = read_logs(p);
    auto it = l.find("ratio");
    if (it == l.end()) throw ParseError(p.string(), 0, "rows with range_id 'ratio'");
    return it->second;
  };
  const Log ro = ratio_log("ratio_output");
  const Log rm = ratio_log("ratio_monitor");
  d.ratio_output_bright = ro.bright;
  d.ratio_output_dark = ro.dark;
  d.ratio_monitor_bright = rm.bright;
  d.ratio_monitor_dark = rm.dark;

  if (kv.contains("afterpulse_streams")) {
    for (const auto& name : kv.get_strings("afterpulse_streams"))
      d.afterpulse_streams.push_back(timetag::TimeTagStream::load(relative_to(origin, name)));
  } else {
    timetag::AfterpulseModel model;
    model.ap0 = kv.get_uncertain("afterpulse.ap0");
    model.ap = kv.get_uncertain("afterpulse.ap");
    model.cov_ap0_ap = kv.get_double("afterpulse.cov", 0.0);
    const auto range = kv.get_doubles("afterpulse.rate_range");
    if (range.size() != 2 || range[0] > range[1]) kv.fail("afterpulse.rate_range", "two ascending rates");
    model.rate_min = range[0];
    model.rate_max = range[1];
    d.afterpulse_model = model;
  }
  d.targets = kv.contains("targets") ? kv.get_doubles("targets") : std::vector<double>{1.0, 1e5};
  d.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  d.de_true = kv.get_double("truth.de_true", 0.0);
  d.dead_time_s = kv.get_double("truth.dead_time_s", 0.0);
  return d;
}

std::vector<std::filesystem::path> campaign_files(const std::filesystem::path& scenario_file) {
  const KeyValueFile kv = KeyValueFile::load(scenario_file);
  std::vector<std::filesystem::path> files{scenario_file};
  for (const char* key : {"calibration", "counts", "monitor", "ratio_output", "ratio_monitor"})
    files.push_back(relative_to(kv.origin(), kv.get_string(key)));
  if (kv.contains("afterpulse_streams"))
    for (const auto& name : kv.get_strings("afterpulse_streams")) files.push_back(relative_to(kv.origin(), name));
  return files;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> steady_log(double value, std::size_t n, double rel) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = value * (1.0 + rel * (static_cast<double>(k % 5) - 2.0) / 2.0);
  return v;
}

CampaignData reference_data(const CalibrationConstants& cal, Mode mode) {
  CampaignData d;
  d.mode = mode;
  d.cal = cal;
  const double ratio = 1e-5;
  const double p_mon_ratio = 1e-5;
  const double lambda = cal.wavelength_nm * 1e-9;
  const double eta = (mode == Mode::fiber && cal.n_eff) ? fiber_end_transmittance(*cal.n_eff, 0.0).value() : 1.0;
  const double p_mon = 1e5 / 0.556 * hc() / (lambda * eta) / ratio;

  Measurement m;
  m.id = "ref";
  m.setting_id = "ref";
  m.counts = debudget::CountObservation::from_counts(1e5, 25, 100.0, 25, 1.0);
  m.monitor_bright = steady_log(p_mon, 25, 5e-4);
  m.monitor_dark = steady_log(1e-3 * p_mon, 5, 0.1);
  d.measurements.push_back(m);
  d.ratio_monitor_bright = steady_log(p_mon_ratio, 25, 5e-4);
  d.ratio_monitor_dark = steady_log(1e-3 * p_mon_ratio, 5, 0.1);
  if (mode == Mode::fiber) {
    d.ratio_output_bright = steady_log(p_mon_ratio * ratio, 25, 5e-4);
    d.ratio_output_dark = steady_log(1e-3 * p_mon_ratio * ratio, 5, 0.1);
  } else {
    const double v = cal.trap_responsivity().value() * cal.trap_gain().value() * p_mon_ratio * ratio;
    d.ratio_output_bright = steady_log(v, 25, 5e-4);
    d.ratio_output_dark = steady_log(1e-3 * v, 5, 0.1);
  }
  return d;
}

timetag::AfterpulseModel reference_afterpulse() {
  timetag::AfterpulseModel model;
  model.ap0 = Uncertain(0.002, 5e-5);
  model.ap = Uncertain(1e-9, 1e-10);
  model.rate_min = 1e3;
  model.rate_max = 1e6;
  return model;
}

}  // namespace

debudget::FiberBudgetInputs reference_fiber_inputs(const CalibrationConstants& cal) {
  const CampaignData d = reference_data(cal, Mode::fiber);
  return fiber_inputs(d, d.measurements.front(), reference_afterpulse());
}

debudget::FreeSpaceBudgetInputs reference_freespace_inputs(const CalibrationConstants& cal) {
  const CampaignData d = reference_data(cal, Mode::free_space);
  return freespace_inputs(d, d.measurements.front(), reference_afterpulse());
}

}  // namespace spdcal::campaign
