#include "spdcal/debudget.hpp"

#include <cmath>
#include <string>

#include "spdcal/keyvalue.hpp"
#include "spdcal/stats.hpp"

namespace spdcal::debudget {

using stats::mean;
using stats::sample_variance;

namespace {

double sq(double x) { return x * x; }

void require_positive(const Uncertain& x, const char* what) {
  if (!(x.value() > 0.0)) throw InvalidArgument(std::string(what) + " must be positive");
}

}  // namespace

CountObservation CountObservation::from_counts(double c_bar, std::size_t n, double c_dark, std::size_t n_dark,
                                               double gate_s) {
  if (n == 0 || n_dark == 0) throw InvalidArgument("interval counts must be positive");
  if (c_bar < 0.0 || c_dark < 0.0) throw InvalidArgument("counts must be non-negative");
  if (!(gate_s > 0.0)) throw InvalidArgument("gate time must be positive");
  CountObservation obs;
  obs.c_bar = c_bar;
  obs.c_dark = c_dark;
  obs.n_intervals = n;
  obs.n_dark_intervals = n_dark;
  obs.gate_s = gate_s;
  obs.u_c = std::sqrt(c_bar / static_cast<double>(n));
  obs.u_dark = std::sqrt(c_dark / static_cast<double>(n_dark));
  return obs;
}

Estimate corrected_counts(const CountObservation& obs, const timetag::AfterpulseModel& model) {
  if (!(obs.gate_s > 0.0)) throw InvalidArgument("gate time must be positive");
  if (obs.c_bar < 0.0 || obs.c_dark < 0.0) throw InvalidArgument("counts must be non-negative");
  Estimate out;
  const double c = obs.c_bar;
  const double ap0 = model.ap0.value();
  const double ap = model.ap.value() / obs.gate_s;
  const double u_ap = model.ap.u() / obs.gate_s;
  const double cov = model.cov_ap0_ap / obs.gate_s;

  const double value = (1.0 - ap0) * c - obs.c_dark - ap * c * c;
  if (!(value > 0.0)) throw InvalidArgument("corrected counts not positive: dark and afterpulse counts exceed bright");

  const double dc = 1.0 - ap0 - 2.0 * ap * c;
  double var = sq(dc * obs.u_c) + sq(obs.u_dark) + sq(c * model.ap0.u()) + sq(c * c * u_ap) +
               2.0 * c * c * c * cov;
  var = std::max(var, 0.0);
  out.value = Uncertain(value, std::sqrt(var));

  const bool fitted = model.rate_max > 0.0;
  if (fitted && !model.covers(obs.rate()))
    out.warnings.push_back("count rate " + format_double(obs.rate()) + " /s outside afterpulse fit range [" +
                           format_double(model.rate_min) + ", " + format_double(model.rate_max) + "]");
  return out;
}

AveragedDifference averaged_difference(const PowerObservation& obs) {
  if (obs.bright.size() < 2) throw InvalidArgument("need at least 2 bright readings");
  AveragedDifference out;
  const double mb = mean(obs.bright);
  double md = 0.0;
  if (obs.dark.empty()) {
    out.warnings.push_back("no dark readings: dark taken as 0");
  } else {
    md = mean(obs.dark);
  }
  const double n = static_cast<double>(obs.bright.size());
  const double s2 = sample_variance(obs.bright);
  out.readings = Uncertain(mb - md, std::sqrt(s2 / n));

  if (obs.osa) {
    Uncertain scale = out.readings;
    if (obs.osa->scale) {
      scale = *obs.osa->scale;
    } else {
      out.default_scale = true;
    }
    WavelengthCorrection corr{obs.osa->b_lambda, obs.osa->delta_lambda_osa, scale};
    out.osa = corr.as_uncertain();
  }
  out.total = Uncertain(out.readings.value() + out.osa.value(), std::hypot(out.readings.u(), out.osa.u()));
  return out;
}

Estimate monitor_power(const PowerObservation& obs) {
  require_positive(obs.cal_nl, "cal_nl");
  AveragedDifference d = averaged_difference(obs);
  Estimate out;
  out.warnings = std::move(d.warnings);
  if (d.default_scale) out.warnings.push_back("OSA correction scale taken as the mean bright-minus-dark reading");
  const double v = d.total.value() / obs.cal_nl.value();
  if (!(d.total.value() > 0.0)) throw InvalidArgument("monitor power not positive");
  const double rel = std::hypot(d.total.u() / d.total.value(), obs.cal_nl.relative());
  out.value = Uncertain(v, rel * v);
  return out;
}

Uncertain output_to_monitor_ratio(const Uncertain& x, const Uncertain& y, const Uncertain& stab, double cov_xy) {
  if (!(y.value() > 0.0)) throw InvalidArgument("monitor power Y must be positive");
  if (!(x.value() > 0.0)) throw InvalidArgument("output power must be positive");
  const double q = x.value() / y.value();
  const double r = q + stab.value();
  if (!(r > 0.0)) throw InvalidArgument("ratio not positive");
  const double y2 = sq(y.value());
  double var = sq(stab.u()) + sq(x.u()) / y2 + sq(x.value()) * sq(y.u()) / (y2 * y2) -
               2.0 * x.value() * cov_xy / (y2 * y.value());
  var = std::max(var, 0.0);
  return Uncertain(r, std::sqrt(var));
}

Uncertain stability_term(double relative_u, double nominal_ratio) {
  if (relative_u < 0.0) throw InvalidArgument("stability uncertainty must be non-negative");
  return Uncertain(0.0, relative_u * std::fabs(nominal_ratio));
}

RatioResult ratio_fiber(const RatioFiberInputs& in) {
  RatioResult out;
  require_positive(in.cal_abs, "cal_abs");
  require_positive(in.output.cal_nl, "cal_nl");
  AveragedDifference dx = averaged_difference(in.output);
  for (auto& w : dx.warnings) out.warnings.push_back("output meter: " + w);
  if (dx.default_scale) out.warnings.push_back("output meter: OSA correction scale taken as the mean bright-minus-dark reading");
  const double kx = in.output.cal_nl.value() * in.cal_abs.value();
  if (!(dx.total.value() > 0.0)) throw InvalidArgument("output power X not positive");
  const double xv = dx.total.value() / kx;
  const double xrel = std::sqrt(sq(dx.total.u() / dx.total.value()) + sq(in.output.cal_nl.relative()) +
                                sq(in.cal_abs.relative()));
  out.numerator = Uncertain(xv, xrel * xv);

  Estimate y = monitor_power(in.monitor);
  for (auto& w : y.warnings) out.warnings.push_back("monitor: " + w);
  out.y = y.value;
  out.ratio = output_to_monitor_ratio(out.numerator, out.y, in.stab, in.cov_xy);
  return out;
}

namespace {

Estimate photon_ratio_de(const Uncertain& c, const Uncertain& pm, const Uncertain& lambda, const Uncertain& eta,
                         const Uncertain& r, double cov_c_pm) {
  require_positive(c, "count rate");
  require_positive(pm, "monitor power");
  require_positive(lambda, "wavelength");
  require_positive(r, "ratio");
  if (!(eta.value() > 0.0 && eta.value() <= 1.0)) throw InvalidArgument("eta_f must be in (0, 1]");
  Estimate out;
  const double de = c.value() / pm.value() * kPlanck * kSpeedOfLight / (lambda.value() * eta.value()) / r.value();
  double rel2 = sq(c.relative()) + sq(pm.relative()) + sq(lambda.relative()) + sq(eta.u() / eta.value()) +
                sq(r.relative()) - 2.0 * cov_c_pm / (c.value() * pm.value());
  rel2 = std::max(rel2, 0.0);
  out.value = Uncertain(de, std::sqrt(rel2) * de);
  if (!(de > 0.0 && de < 1.5)) out.warnings.push_back("implausible DE " + format_double(de));
  return out;
}

}  // namespace

Estimate de_fiber(const FiberDeInputs& in) {
  return photon_ratio_de(in.count_rate, in.monitor_power, in.wavelength_m, in.eta_f.value_or(Uncertain::exact(1.0)),
                         in.ratio, in.cov_c_pm);
}

TrapPower trap_power(const TrapObservation& trap) {
  if (trap.v_bright.size() < 2) throw InvalidArgument("need at least 2 trap bright readings");
  require_positive(trap.responsivity_cal, "trap responsivity");
  require_positive(trap.gain, "trap gain");
  TrapPower out;
  const double nb = static_cast<double>(trap.v_bright.size());
  out.v_bright = Uncertain(mean(trap.v_bright) + trap.v_cal.value(),
                           std::sqrt(sample_variance(trap.v_bright) / nb + sq(trap.v_cal.u())));
  if (trap.v_dark.empty()) {
    out.warnings.push_back("no trap dark readings: dark taken as 0");
    out.v_dark = Uncertain::exact(0.0);
  } else {
    const double nd = static_cast<double>(trap.v_dark.size());
    const double s2 = trap.v_dark.size() > 1 ? sample_variance(trap.v_dark) : 0.0;
    out.v_dark = Uncertain(mean(trap.v_dark) + trap.v_cal.value(), std::sqrt(s2 / nd + sq(trap.v_cal.u())));
  }

  Uncertain osa;
  if (trap.responsivity_osa) {
    Uncertain scale = trap.responsivity_cal;
    if (trap.responsivity_osa->scale) {
      scale = *trap.responsivity_osa->scale;
    } else {
      out.default_scale = true;
      out.warnings.push_back("responsivity OSA correction scale taken as R_cal");
    }
    osa = WavelengthCorrection{trap.responsivity_osa->b_lambda, trap.responsivity_osa->delta_lambda_osa, scale}
              .as_uncertain();
  }
  out.responsivity = Uncertain(trap.responsivity_cal.value() + osa.value(), std::hypot(trap.responsivity_cal.u(), osa.u()));
  require_positive(out.responsivity, "corrected responsivity");

  const double dv = out.v_bright.value() - out.v_dark.value();
  if (!(dv > 0.0)) throw InvalidArgument("trap bright voltage does not exceed dark");
  const double w = dv / (out.responsivity.value() * trap.gain.value());
  const double rel = std::sqrt((sq(out.v_bright.u()) + sq(out.v_dark.u())) / sq(dv) + sq(out.responsivity.relative()) +
                               sq(trap.gain.relative()));
  out.w = Uncertain(w, rel * w);
  return out;
}

RatioResult ratio_freespace(const TrapObservation& trap, const PowerObservation& monitor, const Uncertain& stab,
                            double cov_wy) {
  RatioResult out;
  TrapPower w = trap_power(trap);
  for (auto& s : w.warnings) out.warnings.push_back("trap: " + s);
  out.numerator = w.w;
  Estimate y = monitor_power(monitor);
  for (auto& s : y.warnings) out.warnings.push_back("monitor: " + s);
  out.y = y.value;
  out.ratio = output_to_monitor_ratio(out.numerator, out.y, stab, cov_wy);
  return out;
}

Estimate de_free(const FreeSpaceDeInputs& in) {
  return photon_ratio_de(in.count_rate, in.monitor_power, in.wavelength_m, Uncertain::exact(1.0), in.ratio,
                         in.cov_c_pm);
}

Estimate de_freespace(const FreeSpaceDeInputs& in, const FreeSpaceVariability& v) {
  if (v.reflect_rel < 0.0 || v.collect_rel < 0.0 || v.align_rel < 0.0)
    throw InvalidArgument("variability uncertainties must be non-negative");
  Estimate out = de_free(in);
  const double de = out.value.value();
  const double u = std::sqrt(sq(out.value.u()) + sq(v.reflect_rel * de) + sq(v.collect_rel * de) + sq(v.align_rel * de));
  out.value = Uncertain(de, u);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

class LineCollector {
public:
  void add(std::string name, char type, double relative_u) {
    if (relative_u == 0.0) return;
    lines_.push_back({std::move(name), type, std::fabs(relative_u), sq(relative_u), 0.0});
  }
  void add_covariance(std::string name, double signed_variance) {
    if (signed_variance == 0.0) return;
    lines_.push_back({std::move(name), 'B', std::sqrt(std::fabs(signed_variance)), signed_variance, 0.0});
  }
  std::vector<BudgetLine> finish(double total_rel) {
    const double t2 = sq(total_rel);
    for (auto& l : lines_) l.variance_share = t2 > 0.0 ? l.variance / t2 : 0.0;
    return std::move(lines_);
  }

private:
  std::vector<BudgetLine> lines_;
};

struct CountParts {
  Estimate cdiff;
  double shot = 0.0;
  double dark = 0.0;
  double afterpulse = 0.0;
};

CountParts count_parts(const CountObservation& obs, const timetag::AfterpulseModel& m) {
  CountParts p;
  p.cdiff = corrected_counts(obs, m);
  const double c = obs.c_bar;
  const double cd = p.cdiff.value.value();
  const double ap = m.ap.value() / obs.gate_s;
  p.shot = (1.0 - m.ap0.value() - 2.0 * ap * c) * obs.u_c / cd;
  p.dark = obs.u_dark / cd;
  const double var_ap = sq(c * m.ap0.u()) + sq(c * c * m.ap.u() / obs.gate_s) + 2.0 * c * c * c * m.cov_ap0_ap / obs.gate_s;
  p.afterpulse = std::sqrt(std::max(var_ap, 0.0)) / cd;
  return p;
}

// Relative pieces of one power meter's calibrated reading.
struct PowerParts {
  Uncertain value;
  double scatter = 0.0;
  double osa = 0.0;
  double cal_nl = 0.0;
  Warnings warnings;
};

PowerParts power_parts(const PowerObservation& obs) {
  PowerParts p;
  Estimate e = monitor_power(obs);
  p.value = e.value;
  p.warnings = std::move(e.warnings);
  AveragedDifference d = averaged_difference(obs);
  p.scatter = d.readings.u() / d.total.value();
  p.osa = d.osa.u() / d.total.value();
  p.cal_nl = obs.cal_nl.relative();
  return p;
}

void append(Warnings& dst, const Warnings& src, const std::string& prefix) {
  for (const auto& w : src) dst.push_back(prefix + w);
}

}  // namespace

Budget fiber_budget(const FiberBudgetInputs& in) {
  Budget b;
  CountParts cp = count_parts(in.counts, in.afterpulse);
  append(b.warnings, cp.cdiff.warnings, "counts: ");
  b.corrected_counts = cp.cdiff.value;
  b.count_rate = Uncertain(cp.cdiff.value.value() / in.counts.gate_s, cp.cdiff.value.u() / in.counts.gate_s);

  PowerParts mon = power_parts(in.monitor);
  append(b.warnings, mon.warnings, "monitor: ");
  b.monitor_power = mon.value;

  RatioResult rr = ratio_fiber(in.ratio);
  append(b.warnings, rr.warnings, "ratio: ");
  b.ratio = rr.ratio;

  FiberDeInputs de_in;
  de_in.count_rate = b.count_rate;
  de_in.monitor_power = b.monitor_power;
  de_in.wavelength_m = in.wavelength_m;
  de_in.eta_f = in.eta_f;
  de_in.ratio = b.ratio;
  de_in.cov_c_pm = in.cov_c_pm / in.counts.gate_s;
  b.de = de_fiber(de_in);
  append(b.warnings, b.de.warnings, "");

  // The ratio's X and Y terms enter DE scaled by (X/Y) / R.
  const double q = (rr.numerator.value() / rr.y.value()) / rr.ratio.value();
  PowerParts xo = power_parts(in.ratio.output);
  PowerParts yo = power_parts(in.ratio.monitor);

  LineCollector lc;
  lc.add("cal_nl PM_mon", 'B', mon.cal_nl);
  lc.add("cal_nl PM_mon (ratio)", 'B', q * yo.cal_nl);
  lc.add("R_out/mon stability", 'B', in.ratio.stab.u() / rr.ratio.value());
  lc.add("cal_abs PM", 'B', q * in.ratio.cal_abs.relative());
  lc.add("cal_nl PM", 'B', q * xo.cal_nl);
  lc.add("OSA wavelength", 'B', in.wavelength_m.relative());
  if (in.eta_f) lc.add("fiber end transmittance", 'B', in.eta_f->u() / in.eta_f->value());
  lc.add("PM_mon OSA correction", 'B', mon.osa);
  lc.add("PM OSA correction", 'B', q * xo.osa);
  lc.add("PM_mon (ratio) OSA correction", 'B', q * yo.osa);
  lc.add("count shot noise", 'A', cp.shot);
  lc.add("dark counts", 'A', cp.dark);
  lc.add("afterpulse fit", 'A', cp.afterpulse);
  lc.add("PM_mon readings", 'A', mon.scatter);
  lc.add("PM readings", 'A', q * xo.scatter);
  lc.add("PM_mon (ratio) readings", 'A', q * yo.scatter);
  lc.add_covariance("cov(C, PM_mon)", -2.0 * de_in.cov_c_pm / (b.count_rate.value() * b.monitor_power.value()));
  lc.add_covariance("cov(X, Y)", -2.0 * sq(q) * in.ratio.cov_xy / (rr.numerator.value() * rr.y.value()));
  b.lines = lc.finish(b.de.relative());
  return b;
}

Budget freespace_budget(const FreeSpaceBudgetInputs& in) {
  Budget b;
  CountParts cp = count_parts(in.counts, in.afterpulse);
  append(b.warnings, cp.cdiff.warnings, "counts: ");
  b.corrected_counts = cp.cdiff.value;
  b.count_rate = Uncertain(cp.cdiff.value.value() / in.counts.gate_s, cp.cdiff.value.u() / in.counts.gate_s);

  PowerParts mon = power_parts(in.monitor);
  append(b.warnings, mon.warnings, "monitor: ");
  b.monitor_power = mon.value;

  RatioResult rr = ratio_freespace(in.trap, in.ratio_monitor, in.stab, in.cov_wy);
  append(b.warnings, rr.warnings, "ratio: ");
  b.ratio = rr.ratio;

  FreeSpaceDeInputs de_in;
  de_in.count_rate = b.count_rate;
  de_in.monitor_power = b.monitor_power;
  de_in.wavelength_m = in.wavelength_m;
  de_in.ratio = b.ratio;
  de_in.cov_c_pm = in.cov_c_pm / in.counts.gate_s;
  b.de = de_freespace(de_in, in.variability);
  append(b.warnings, b.de.warnings, "");

  const double q = (rr.numerator.value() / rr.y.value()) / rr.ratio.value();
  TrapPower tp = trap_power(in.trap);
  const double dv = tp.v_bright.value() - tp.v_dark.value();
  const double nb = static_cast<double>(in.trap.v_bright.size());
  double scatter2 = sample_variance(in.trap.v_bright) / nb;
  if (in.trap.v_dark.size() > 1)
    scatter2 += sample_variance(in.trap.v_dark) / static_cast<double>(in.trap.v_dark.size());
  const double n_cal = in.trap.v_dark.empty() ? 1.0 : 2.0;
  const double r_bar = tp.responsivity.value();
  const double r_osa_u = std::sqrt(std::max(sq(tp.responsivity.u()) - sq(in.trap.responsivity_cal.u()), 0.0));
  PowerParts yo = power_parts(in.ratio_monitor);

  LineCollector lc;
  lc.add("cal_nl PM_mon", 'B', mon.cal_nl);
  lc.add("cal_nl PM_mon (ratio)", 'B', q * yo.cal_nl);
  lc.add("R_out/mon stability", 'B', in.stab.u() / rr.ratio.value());
  lc.add("trap responsivity R_cal", 'B', q * in.trap.responsivity_cal.u() / r_bar);
  lc.add("trap gain", 'B', q * in.trap.gain.relative());
  lc.add("voltmeter calibration", 'B', q * std::sqrt(n_cal) * in.trap.v_cal.u() / dv);
  lc.add("OSA wavelength", 'B', in.wavelength_m.relative());
  lc.add("reflection variability", 'B', in.variability.reflect_rel);
  lc.add("collection variability", 'B', in.variability.collect_rel);
  lc.add("alignment variability", 'B', in.variability.align_rel);
  lc.add("PM_mon OSA correction", 'B', mon.osa);
  lc.add("trap responsivity OSA correction", 'B', q * r_osa_u / r_bar);
  lc.add("PM_mon (ratio) OSA correction", 'B', q * yo.osa);
  lc.add("count shot noise", 'A', cp.shot);
  lc.add("dark counts", 'A', cp.dark);
  lc.add("afterpulse fit", 'A', cp.afterpulse);
  lc.add("PM_mon readings", 'A', mon.scatter);
  lc.add("trap voltage readings", 'A', q * std::sqrt(scatter2) / dv);
  lc.add("PM_mon (ratio) readings", 'A', q * yo.scatter);
  lc.add_covariance("cov(C, PM_mon)", -2.0 * de_in.cov_c_pm / (b.count_rate.value() * b.monitor_power.value()));
  lc.add_covariance("cov(W, Y)", -2.0 * sq(q) * in.cov_wy / (rr.numerator.value() * rr.y.value()));
  b.lines = lc.finish(b.de.relative());
  return b;
}

}  // namespace spdcal::debudget
