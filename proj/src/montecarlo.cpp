#include "spdcal/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "spdcal/kernels.hpp"

namespace spdcal::montecarlo {

std::size_t InputSet::add(std::string name, Uncertain x) {
  if (std::find(names_.begin(), names_.end(), name) != names_.end())
    throw InvalidArgument("duplicate model input " + name);
  names_.push_back(std::move(name));
  inputs_.push_back(x);
  return inputs_.size() - 1;
}

void InputSet::set_covariance(std::size_t i, std::size_t j, double cov) {
  if (i >= size() || j >= size() || i == j) throw InvalidArgument("bad covariance indices");
  CorrelatedPair check(inputs_[i], inputs_[j], cov);  // validates the bound
  (void)check;
  for (auto& c : covs_) {
    if ((c.i == i && c.j == j) || (c.i == j && c.j == i)) {
      c.cov = cov;
      return;
    }
  }
  covs_.push_back({i, j, cov});
}

std::size_t InputSet::index(const std::string& name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw InvalidArgument("unknown model input " + name);
  return static_cast<std::size_t>(it - names_.begin());
}

std::vector<double> InputSet::covariance_matrix() const {
  const std::size_t k = size();
  std::vector<double> m(k * k, 0.0);
  for (std::size_t i = 0; i < k; ++i) m[i * k + i] = inputs_[i].u() * inputs_[i].u();
  for (const auto& c : covs_) {
    m[c.i * k + c.j] = c.cov;
    m[c.j * k + c.i] = c.cov;
  }
  return m;
}

double MeasurementModel::nominal() const {
  std::vector<double> x(inputs.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = inputs.input(i).value();
  return f(x);
}

namespace {

// Lower-triangular factor; columns with a non-positive pivot (degenerate
// directions) are zeroed.
std::vector<double> cholesky(const std::vector<double>& a, std::size_t k) {
  std::vector<double> l(k * k, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    double d = a[j * k + j];
    for (std::size_t p = 0; p < j; ++p) d -= l[j * k + p] * l[j * k + p];
    const double scale = a[j * k + j];
    if (d <= 1e-14 * scale || d <= 0.0) continue;
    const double ljj = std::sqrt(d);
    l[j * k + j] = ljj;
    for (std::size_t i = j + 1; i < k; ++i) {
      double s = a[i * k + j];
      for (std::size_t p = 0; p < j; ++p) s -= l[i * k + p] * l[j * k + p];
      l[i * k + j] = s / ljj;
    }
  }
  return l;
}

}  // namespace

McResult monte_carlo_uncertainty(const MeasurementModel& model, std::size_t n_draws, std::uint64_t seed) {
  if (n_draws < 10000) throw InvalidArgument("Monte-Carlo needs at least 10000 draws");
  if (!model.f) throw InvalidArgument("model has no function");
  const std::size_t k = model.inputs.size();
  const std::vector<double> l = cholesky(model.inputs.covariance_matrix(), k);
  const kernels::Table& kt = kernels::active();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  constexpr std::size_t chunk = 4096;
  std::vector<double> z(k * chunk), x(k * chunk), draw(k);
  std::vector<double> out;
  out.reserve(n_draws);
  std::size_t nonfinite = 0;

  for (std::size_t done = 0; done < n_draws; done += chunk) {
    const std::size_t m = std::min(chunk, n_draws - done);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t t = 0; t < m; ++t) z[j * chunk + t] = normal(rng);
    for (std::size_t i = 0; i < k; ++i) {
      double* xi = &x[i * chunk];
      std::fill(xi, xi + m, model.inputs.input(i).value());
      for (std::size_t j = 0; j <= i; ++j) {
        const double lij = l[i * k + j];
        if (lij != 0.0) kt.axpy(lij, &z[j * chunk], xi, m);
      }
    }
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t i = 0; i < k; ++i) draw[i] = x[i * chunk + t];
      const double y = model.f(draw);
      if (std::isfinite(y)) {
        out.push_back(y);
      } else {
        ++nonfinite;
      }
    }
  }
  if (static_cast<double>(nonfinite) > 1e-3 * static_cast<double>(n_draws))
    throw Error("Monte-Carlo: " + std::to_string(nonfinite) + " non-finite model evaluations");

  const double n = static_cast<double>(out.size());
  const double mu = kt.sum(out.data(), out.size()) / n;
  const double var = kt.sum_sq_dev(out.data(), out.size(), mu) / (n - 1.0);
  McResult r;
  r.value = Uncertain(mu, std::sqrt(std::max(var, 0.0)));
  r.n_draws = n_draws;
  r.n_nonfinite = nonfinite;
  return r;
}

// ---------------------------------------------------------------------------

namespace {

using Term = std::function<double(std::span<const double>)>;
using debudget::PowerObservation;

Term counts_term(InputSet& in, const std::string& p, const debudget::CountObservation& obs,
                 const timetag::AfterpulseModel& ap, std::size_t* c_index = nullptr) {
  const std::size_t ic = in.add(p + "c_bar", Uncertain(obs.c_bar, obs.u_c));
  const std::size_t id = in.add(p + "c_dark", Uncertain(obs.c_dark, obs.u_dark));
  const std::size_t i0 = in.add(p + "ap0", ap.ap0);
  const std::size_t i1 = in.add(p + "ap", ap.ap);
  if (ap.cov_ap0_ap != 0.0) in.set_covariance(i0, i1, ap.cov_ap0_ap);
  if (c_index) *c_index = ic;
  const double gate = obs.gate_s;
  return [=](std::span<const double> x) {
    const double c = x[ic];
    return (1.0 - x[i0]) * c - x[id] - x[i1] / gate * c * c;
  };
}

// (readings + scale * b * dlambda) without the nonlinearity factor.
Term power_sum_term(InputSet& in, const std::string& p, const PowerObservation& obs, std::size_t* readings_index) {
  const debudget::AveragedDifference d = debudget::averaged_difference(obs);
  const std::size_t ir = in.add(p + "readings", d.readings);
  if (readings_index) *readings_index = ir;
  if (!obs.osa) return [=](std::span<const double> x) { return x[ir]; };
  const std::size_t ib = in.add(p + "b_lambda", obs.osa->b_lambda);
  const std::size_t is = in.add(p + "scale", obs.osa->scale.value_or(d.readings));
  const double dl = obs.osa->delta_lambda_osa.value();
  return [=](std::span<const double> x) { return x[ir] + x[is] * x[ib] * dl; };
}

Term power_term(InputSet& in, const std::string& p, const PowerObservation& obs, std::size_t* readings_index = nullptr) {
  Term sum = power_sum_term(in, p, obs, readings_index);
  const std::size_t ic = in.add(p + "cal_nl", obs.cal_nl);
  return [=](std::span<const double> x) { return sum(x) / x[ic]; };
}

Term ratio_fiber_term(InputSet& in, const debudget::RatioFiberInputs& r) {
  std::size_t rx = 0, ry = 0;
  Term xsum = power_sum_term(in, "pm.", r.output, &rx);
  const std::size_t inl = in.add("pm.cal_nl", r.output.cal_nl);
  const std::size_t iabs = in.add("pm.cal_abs", r.cal_abs);
  Term y = power_term(in, "pm_mon_ratio.", r.monitor, &ry);
  const std::size_t ist = in.add("stab", r.stab);
  if (r.cov_xy != 0.0) {
    const double kx = r.output.cal_nl.value() * r.cal_abs.value();
    in.set_covariance(rx, ry, r.cov_xy * kx * r.monitor.cal_nl.value());
  }
  return [=](std::span<const double> x) { return xsum(x) / (x[inl] * x[iabs]) / y(x) + x[ist]; };
}

Term trap_term(InputSet& in, const debudget::TrapObservation& t) {
  const debudget::TrapPower tp = debudget::trap_power(t);
  Uncertain vb(tp.v_bright.value() - t.v_cal.value(), std::sqrt(std::max(tp.v_bright.u() * tp.v_bright.u() - t.v_cal.u() * t.v_cal.u(), 0.0)));
  const std::size_t ivb = in.add("trap.v_bright", vb);
  const std::size_t icb = in.add("trap.v_cal_bright", t.v_cal);
  std::size_t ivd = 0, icd = 0;
  const bool has_dark = !t.v_dark.empty();
  if (has_dark) {
    Uncertain vd(tp.v_dark.value() - t.v_cal.value(),
                 std::sqrt(std::max(tp.v_dark.u() * tp.v_dark.u() - t.v_cal.u() * t.v_cal.u(), 0.0)));
    ivd = in.add("trap.v_dark", vd);
    icd = in.add("trap.v_cal_dark", t.v_cal);
  }
  const std::size_t irc = in.add("trap.r_cal", t.responsivity_cal);
  const std::size_t ig = in.add("trap.gain", t.gain);
  std::size_t ib = 0, is = 0;
  double dl = 0.0;
  const bool has_osa = t.responsivity_osa.has_value();
  if (has_osa) {
    ib = in.add("trap.b_lambda", t.responsivity_osa->b_lambda);
    is = in.add("trap.scale", t.responsivity_osa->scale.value_or(t.responsivity_cal));
    dl = t.responsivity_osa->delta_lambda_osa.value();
  }
  return [=](std::span<const double> x) {
    const double v = x[ivb] + x[icb] - (has_dark ? x[ivd] + x[icd] : 0.0);
    const double r = x[irc] + (has_osa ? x[is] * x[ib] * dl : 0.0);
    return v / (r * x[ig]);
  };
}

double hc() { return kPlanck * kSpeedOfLight; }

}  // namespace

MeasurementModel corrected_counts_model(const debudget::CountObservation& obs, const timetag::AfterpulseModel& ap) {
  MeasurementModel m;
  m.name = "corrected_counts";
  m.f = counts_term(m.inputs, "", obs, ap);
  return m;
}

MeasurementModel monitor_power_model(const PowerObservation& obs) {
  MeasurementModel m;
  m.name = "monitor_power";
  m.f = power_term(m.inputs, "", obs);
  return m;
}

MeasurementModel ratio_fiber_model(const debudget::RatioFiberInputs& in) {
  MeasurementModel m;
  m.name = "ratio_fiber";
  m.f = ratio_fiber_term(m.inputs, in);
  return m;
}

MeasurementModel ratio_freespace_model(const debudget::TrapObservation& trap, const PowerObservation& monitor,
                                       const Uncertain& stab, double cov_wy) {
  MeasurementModel m;
  m.name = "ratio_freespace";
  Term w = trap_term(m.inputs, trap);
  std::size_t ry = 0;
  Term y = power_term(m.inputs, "pm_mon_ratio.", monitor, &ry);
  const std::size_t ist = m.inputs.add("stab", stab);
  if (cov_wy != 0.0) {
    // Express cov(W, Y) through the trap bright reading and the monitor readings.
    const debudget::TrapPower tp = debudget::trap_power(trap);
    const double dw_dv = tp.w.value() / (tp.v_bright.value() - tp.v_dark.value());
    m.inputs.set_covariance(m.inputs.index("trap.v_bright"), ry, cov_wy / dw_dv * monitor.cal_nl.value());
  }
  m.f = [=](std::span<const double> x) { return w(x) / y(x) + x[ist]; };
  return m;
}

MeasurementModel de_fiber_model(const debudget::FiberDeInputs& in) {
  MeasurementModel m;
  m.name = "de_fiber";
  const std::size_t ic = m.inputs.add("count_rate", in.count_rate);
  const std::size_t ip = m.inputs.add("monitor_power", in.monitor_power);
  const std::size_t il = m.inputs.add("wavelength", in.wavelength_m);
  const std::size_t ie = m.inputs.add("eta_f", in.eta_f.value_or(Uncertain::exact(1.0)));
  const std::size_t ir = m.inputs.add("ratio", in.ratio);
  if (in.cov_c_pm != 0.0) m.inputs.set_covariance(ic, ip, in.cov_c_pm);
  m.f = [=](std::span<const double> x) { return x[ic] / x[ip] * hc() / (x[il] * x[ie]) / x[ir]; };
  return m;
}

MeasurementModel de_freespace_model(const debudget::FreeSpaceDeInputs& in, const debudget::FreeSpaceVariability& v) {
  MeasurementModel m;
  m.name = "de_freespace";
  const std::size_t ic = m.inputs.add("count_rate", in.count_rate);
  const std::size_t ip = m.inputs.add("monitor_power", in.monitor_power);
  const std::size_t il = m.inputs.add("wavelength", in.wavelength_m);
  const std::size_t ir = m.inputs.add("ratio", in.ratio);
  if (in.cov_c_pm != 0.0) m.inputs.set_covariance(ic, ip, in.cov_c_pm);
  const double de0 = in.count_rate.value() / in.monitor_power.value() * hc() / in.wavelength_m.value() / in.ratio.value();
  const std::size_t i1 = m.inputs.add("reflect", Uncertain(0.0, v.reflect_rel * de0));
  const std::size_t i2 = m.inputs.add("collect", Uncertain(0.0, v.collect_rel * de0));
  const std::size_t i3 = m.inputs.add("align", Uncertain(0.0, v.align_rel * de0));
  m.f = [=](std::span<const double> x) {
    return x[ic] / x[ip] * hc() / x[il] / x[ir] + x[i1] + x[i2] + x[i3];
  };
  return m;
}

MeasurementModel fiber_chain_model(const debudget::FiberBudgetInputs& in) {
  MeasurementModel m;
  m.name = "de_fiber_chain";
  std::size_t ic = 0, ip = 0;
  Term c = counts_term(m.inputs, "", in.counts, in.afterpulse, &ic);
  Term pm = power_term(m.inputs, "pm_mon.", in.monitor, &ip);
  Term r = ratio_fiber_term(m.inputs, in.ratio);
  const std::size_t il = m.inputs.add("wavelength", in.wavelength_m);
  const std::size_t ie = m.inputs.add("eta_f", in.eta_f.value_or(Uncertain::exact(1.0)));
  if (in.cov_c_pm != 0.0) {
    const double dc = 1.0 - in.afterpulse.ap0.value() - 2.0 * in.afterpulse.ap.value() / in.counts.gate_s * in.counts.c_bar;
    m.inputs.set_covariance(ic, ip, in.cov_c_pm * in.monitor.cal_nl.value() / dc);
  }
  const double gate = in.counts.gate_s;
  m.f = [=](std::span<const double> x) { return c(x) / gate / pm(x) * hc() / (x[il] * x[ie]) / r(x); };
  return m;
}

MeasurementModel freespace_chain_model(const debudget::FreeSpaceBudgetInputs& in) {
  MeasurementModel m;
  m.name = "de_freespace_chain";
  std::size_t ic = 0, ip = 0;
  Term c = counts_term(m.inputs, "", in.counts, in.afterpulse, &ic);
  Term pm = power_term(m.inputs, "pm_mon.", in.monitor, &ip);
  Term w = trap_term(m.inputs, in.trap);
  std::size_t ry = 0;
  Term y = power_term(m.inputs, "pm_mon_ratio.", in.ratio_monitor, &ry);
  const std::size_t ist = m.inputs.add("stab", in.stab);
  const std::size_t il = m.inputs.add("wavelength", in.wavelength_m);
  if (in.cov_c_pm != 0.0) {
    const double dc = 1.0 - in.afterpulse.ap0.value() - 2.0 * in.afterpulse.ap.value() / in.counts.gate_s * in.counts.c_bar;
    m.inputs.set_covariance(ic, ip, in.cov_c_pm * in.monitor.cal_nl.value() / dc);
  }
  if (in.cov_wy != 0.0) {
    const debudget::TrapPower tp = debudget::trap_power(in.trap);
    const double dw_dv = tp.w.value() / (tp.v_bright.value() - tp.v_dark.value());
    m.inputs.set_covariance(m.inputs.index("trap.v_bright"), ry, in.cov_wy / dw_dv * in.ratio_monitor.cal_nl.value());
  }
  const double gate = in.counts.gate_s;
  auto de_free = [=](std::span<const double> x) { return c(x) / gate / pm(x) * hc() / x[il] / (w(x) / y(x) + x[ist]); };

  std::vector<double> nominal(m.inputs.size());
  for (std::size_t i = 0; i < nominal.size(); ++i) nominal[i] = m.inputs.input(i).value();
  const double de0 = de_free(nominal);
  const std::size_t i1 = m.inputs.add("reflect", Uncertain(0.0, in.variability.reflect_rel * de0));
  const std::size_t i2 = m.inputs.add("collect", Uncertain(0.0, in.variability.collect_rel * de0));
  const std::size_t i3 = m.inputs.add("align", Uncertain(0.0, in.variability.align_rel * de0));
  m.f = [=](std::span<const double> x) { return de_free(x) + x[i1] + x[i2] + x[i3]; };
  return m;
}

}  // namespace spdcal::montecarlo
