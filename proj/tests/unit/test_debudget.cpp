#include <cmath>

#include "doctest.h"
#include "spdcal/calibration.hpp"
#include "spdcal/campaign.hpp"
#include "spdcal/debudget.hpp"
#include "spdcal/montecarlo.hpp"

using namespace spdcal;
using namespace spdcal::debudget;
using doctest::Approx;

namespace {

const std::filesystem::path kData = SPDCAL_DATA_DIR;

timetag::AfterpulseModel ap_model(double ap0, double u0, double ap, double u1, double cov = 0.0) {
  timetag::AfterpulseModel m;
  m.ap0 = Uncertain(ap0, u0);
  m.ap = Uncertain(ap, u1);
  m.cov_ap0_ap = cov;
  return m;
}

double mc_rel(const montecarlo::MeasurementModel& m, std::uint64_t seed = 11) {
  const auto r = montecarlo::monte_carlo_uncertainty(m, 100000, seed);
  return r.value.u() / r.value.value();
}

double sum_variance(const Budget& b, char type = 0) {
  double s = 0;
  for (const auto& l : b.lines)
    if (type == 0 || l.type == type) s += l.variance;
  return s;
}

}  // namespace

TEST_CASE("corrected counts") {
  const auto obs = CountObservation::from_counts(1e5, 25, 100, 25);
  CHECK(obs.u_c == Approx(std::sqrt(1e5 / 25)));
  CHECK(obs.u_dark == Approx(2.0));

  const auto plain = corrected_counts(obs, ap_model(0, 0, 0, 0));
  CHECK(plain.value.value() == Approx(1e5 - 100));

  auto no_dark = obs;
  no_dark.c_dark = 0;
  CHECK(corrected_counts(no_dark, ap_model(0, 0, 0, 0)).value.value() == 1e5);

  const auto r = corrected_counts(obs, ap_model(0.001, 0, 1e-9, 0));
  CHECK(r.value.value() == Approx(99790.0).epsilon(1e-14));
  CHECK(r.warnings.empty());

  const auto m = ap_model(0.001, 5e-5, 1e-9, 1e-10, 2e-15);
  const auto with_u = corrected_counts(obs, m);
  const double dc = 1 - 0.001 - 2e-9 * 1e5;
  const double expect = std::sqrt(dc * dc * obs.u_c * obs.u_c + 4.0 + 1e10 * 25e-10 + 1e20 * 1e-20 + 2 * 1e15 * 2e-15);
  CHECK(with_u.value.u() == Approx(expect).epsilon(1e-12));

  CHECK_THROWS_AS(corrected_counts(CountObservation::from_counts(10, 1, 20, 1), m), InvalidArgument);
}

TEST_CASE("corrected counts against Monte Carlo") {
  const auto obs = CountObservation::from_counts(1e5, 25, 100, 25);
  const auto m = ap_model(0.002, 1e-4, 1e-9, 2e-10);
  const auto a = corrected_counts(obs, m).value;
  CHECK(mc_rel(montecarlo::corrected_counts_model(obs, m)) == Approx(a.u() / a.value()).epsilon(0.02));
}

TEST_CASE("afterpulse range warning only for fitted models") {
  auto m = ap_model(0.002, 0, 1e-9, 0);
  m.rate_min = 1e3;
  m.rate_max = 1e4;
  CHECK(corrected_counts(CountObservation::from_counts(1e5, 25, 100, 25), m).warnings.size() == 1);
}

TEST_CASE("monitor power") {
  PowerObservation p;
  p.bright = {1.00e-6, 1.02e-6, 0.98e-6};
  p.dark = {0.0};
  const auto plain = monitor_power(p);
  CHECK(plain.value.value() == Approx(1e-6));
  CHECK(plain.value.u() == Approx(0.02e-6 / std::sqrt(3.0)));

  p.cal_nl = Uncertain(1.0, 0.0014);
  const auto r = monitor_power(p);
  CHECK(r.value.value() == Approx(1e-6));
  CHECK(100 * r.value.relative() == Approx(1.16316).epsilon(1e-5));

  PowerObservation no_dark;
  no_dark.bright = {2.0, 2.0};
  const auto d = averaged_difference(no_dark);
  CHECK(d.total.value() == 2.0);
  CHECK(d.warnings.size() == 1);
}

TEST_CASE("OSA correction uses the mean reading as default scale") {
  PowerObservation p;
  p.bright = {1.0e-6, 1.0e-6, 1.0e-6};
  p.dark = {0.0, 0.0};
  p.osa = OsaInput{Uncertain(-1e-3, 1e-4), Uncertain(0.05, 0.0), std::nullopt};
  const auto d = averaged_difference(p);
  CHECK(d.default_scale);
  CHECK(d.osa.value() == Approx(1e-6 * -1e-3 * 0.05));
  CHECK(d.total.value() == Approx(1e-6 * (1 - 5e-5)));
  CHECK(monitor_power(p).warnings.size() == 1);

  p.osa->scale = Uncertain(1e-6, 0.0);
  CHECK_FALSE(averaged_difference(p).default_scale);
}

TEST_CASE("output to monitor ratio") {
  const auto r = output_to_monitor_ratio(Uncertain::exact(1e-11), Uncertain::exact(1e-6), Uncertain::exact(0));
  CHECK(r.value() == Approx(1e-5));

  const double R = 1e-5;
  const auto q = output_to_monitor_ratio(Uncertain::from_relative(1e-11, 0.003), Uncertain::from_relative(1e-6, 0.002),
                                         stability_term(0.002, R));
  CHECK(100 * q.relative() == Approx(0.412311).epsilon(1e-6));

  // a positive covariance lowers u
  const auto c = output_to_monitor_ratio(Uncertain::from_relative(1e-11, 0.003), Uncertain::from_relative(1e-6, 0.002),
                                         stability_term(0.002, R), 0.5 * 3e-14 * 2e-9);
  CHECK(c.u() < q.u());
  CHECK_THROWS_AS(output_to_monitor_ratio(Uncertain::exact(1), Uncertain::exact(0), Uncertain::exact(0)),
                  InvalidArgument);
}

TEST_CASE("fiber ratio against Monte Carlo") {
  RatioFiberInputs in;
  in.output.bright = {1.001e-11, 0.999e-11, 1.002e-11, 0.998e-11};
  in.output.dark = {1e-15, -1e-15};
  in.output.cal_nl = Uncertain(1.0, 0.001);
  in.cal_abs = Uncertain(1.0, 0.0022);
  in.monitor.bright = {1.0005e-6, 0.9995e-6, 1.0e-6};
  in.monitor.dark = {0.0};
  in.monitor.cal_nl = Uncertain(1.0, 0.0014);
  in.stab = stability_term(0.002, 1e-5);
  const auto r = ratio_fiber(in);
  CHECK(mc_rel(montecarlo::ratio_fiber_model(in)) == Approx(r.ratio.relative()).epsilon(0.02));
}

TEST_CASE("perfect detector identity") {
  const double lambda = 1533.6e-9, pm = 2e-6, R = 1e-8;
  const double rate = photon_flux(pm * R, lambda);
  FiberDeInputs in{Uncertain(rate, 10), Uncertain(pm, 1e-9), Uncertain::exact(lambda), Uncertain::exact(1.0),
                   Uncertain(R, 1e-11)};
  CHECK(de_fiber(in).value.value() == Approx(1.0).epsilon(1e-14));

  auto no_eta = in;
  no_eta.eta_f.reset();
  CHECK(de_fiber(no_eta).value.value() == de_fiber(in).value.value());
  CHECK(de_fiber(no_eta).value.u() == de_fiber(in).value.u());

  auto silly = in;
  silly.count_rate = Uncertain(2 * rate, 10);
  CHECK(de_fiber(silly).warnings.size() == 1);
}

TEST_CASE("fiber DE is invariant under common rescaling of C and PM") {
  FiberDeInputs in{Uncertain(5e4, 60), Uncertain(1.2e-6, 2e-9), Uncertain(851.8e-9, 1e-10),
                   Uncertain(0.9663, 1e-3), Uncertain(1e-5, 2e-8)};
  const auto base = de_fiber(in).value;
  auto scaled = in;
  scaled.count_rate = Uncertain(3 * 5e4, 3 * 60);
  scaled.monitor_power = Uncertain(3 * 1.2e-6, 3 * 2e-9);
  CHECK(de_fiber(scaled).value.value() == Approx(base.value()).epsilon(1e-14));
  CHECK(de_fiber(scaled).value.relative() == Approx(base.relative()).epsilon(1e-12));

  CHECK(mc_rel(montecarlo::de_fiber_model(in)) == Approx(base.relative()).epsilon(0.02));
}

TEST_CASE("trap power") {
  TrapObservation t;
  t.v_bright = {1.0, 1.0, 1.0};
  t.responsivity_cal = Uncertain(0.5, 0.0);
  t.gain = Uncertain(1e6, 0.0);
  CHECK(trap_power(t).w.value() == Approx(2e-6));

  t.responsivity_cal = Uncertain::from_relative(0.5, 0.0022);
  t.gain = Uncertain::from_relative(1e6, 0.0001);
  t.v_cal = Uncertain(0.0, 1e-4);

  // no dark set: voltmeter calibration enters once
  const auto three = trap_power(t);
  CHECK(three.warnings.size() == 1);
  CHECK(100 * three.w.relative() == Approx(0.220454).epsilon(1e-5));

  // measured dark: it enters the bright and dark means
  t.v_dark = {0.0, 0.0, 0.0};
  const auto four = trap_power(t);
  CHECK(four.warnings.empty());
  CHECK(100 * four.w.relative() == Approx(0.220681).epsilon(1e-5));

  t.v_dark = {2.0, 2.0};
  CHECK_THROWS_AS(trap_power(t), InvalidArgument);
}

TEST_CASE("free-space variability") {
  FreeSpaceDeInputs in{Uncertain(5e4, 0), Uncertain(1.2e-6, 0), Uncertain::exact(851.8e-9), Uncertain(1e-5, 0)};
  const auto base = de_free(in);
  CHECK(de_freespace(in, {}).value.value() == base.value.value());
  CHECK(de_freespace(in, {}).value.u() == base.value.u());

  const auto v = de_freespace(in, {0.00005, 0.001, 0.005});
  CHECK(100 * v.value.relative() == Approx(0.509926).epsilon(1e-5));
  CHECK_THROWS_AS(de_freespace(in, {-0.1, 0, 0}), InvalidArgument);
}

TEST_CASE("budgets add up and follow the component order") {
  const auto cal = CalibrationConstants::load(kData / "calibration" / "fiber_851.cfg");
  const auto in = campaign::reference_fiber_inputs(cal);
  const auto b = fiber_budget(in);
  CHECK(sum_variance(b) == Approx(b.de.relative() * b.de.relative()).epsilon(1e-10));
  REQUIRE(b.lines.size() >= 5);
  CHECK(b.lines[0].component == "cal_nl PM_mon");
  CHECK(b.lines[3].component == "cal_abs PM");
  double share = 0;
  for (const auto& l : b.lines) share += l.variance_share;
  CHECK(share == Approx(1.0));
}

TEST_CASE("1533.6 nm fiber budget") {
  const auto cal = CalibrationConstants::load(kData / "calibration" / "fiber_1533.cfg");
  const auto in = campaign::reference_fiber_inputs(cal);
  const auto b = fiber_budget(in);
  auto rel = [&](const std::string& name) {
    for (const auto& l : b.lines)
      if (l.component == name) return 100 * l.relative_u;
    return -1.0;
  };
  CHECK(rel("cal_nl PM_mon") == Approx(0.04).epsilon(1e-3));
  CHECK(rel("cal_nl PM_mon (ratio)") == Approx(0.04).epsilon(1e-3));
  CHECK(rel("R_out/mon stability") == Approx(0.05).epsilon(1e-3));
  CHECK(rel("cal_abs PM") == Approx(0.19).epsilon(1e-3));
  CHECK(rel("cal_nl PM") == Approx(0.05).epsilon(1e-3));
  const double floor = std::sqrt(0.04 * 0.04 * 2 + 0.05 * 0.05 * 2 + 0.19 * 0.19 + std::pow(rel("count shot noise"), 2));
  CHECK(floor == Approx(0.22).epsilon(0.02));
  CHECK(mc_rel(montecarlo::fiber_chain_model(in)) == Approx(b.de.relative()).epsilon(0.02));
}

TEST_CASE("free-space budget is dominated by alignment") {
  const auto cal = CalibrationConstants::load(kData / "calibration" / "freespace_851.cfg");
  const auto b = freespace_budget(campaign::reference_freespace_inputs(cal));
  double align = 0;
  for (const auto& l : b.lines)
    if (l.component == "alignment variability") align = l.variance;
  CHECK(align / sum_variance(b, 'B') > 0.60);
}

TEST_CASE("omitting positive covariances never lowers u") {
  const auto cal = CalibrationConstants::load(kData / "calibration" / "fiber_851.cfg");
  auto in = campaign::reference_fiber_inputs(cal);
  const auto without = fiber_budget(in);
  const auto cdiff = without.corrected_counts;
  in.cov_c_pm = 0.3 * cdiff.u() * without.monitor_power.u();
  const auto x = ratio_fiber(in.ratio);
  in.ratio.cov_xy = 0.3 * x.numerator.u() * x.y.u();
  const auto with = fiber_budget(in);
  CHECK(with.de.value.u() < without.de.value.u());
  CHECK(sum_variance(with) == Approx(with.de.relative() * with.de.relative()).epsilon(1e-10));
}

TEST_CASE("Monte Carlo engine") {
  montecarlo::InputSet set;
  const auto a = set.add("a", Uncertain(1.0, 0.1));
  const auto b = set.add("b", Uncertain(2.0, 0.2));
  CHECK_THROWS_AS(set.add("a", Uncertain(0, 1)), InvalidArgument);
  CHECK(set.index("b") == b);

  SUBCASE("linear model") {
    montecarlo::MeasurementModel m{"lin", set, [=](std::span<const double> x) { return x[a] + 2 * x[b]; }};
    const auto r = montecarlo::monte_carlo_uncertainty(m, 100000, 3);
    const double u = std::sqrt(0.01 + 0.16);
    const double sigma_mc = u / std::sqrt(2.0 * 100000);
    CHECK(std::abs(r.value.u() - u) < 3 * sigma_mc);
    CHECK(r.value.value() == Approx(5.0).epsilon(1e-2));
  }
  SUBCASE("correlated inputs") {
    set.set_covariance(a, b, -0.01);
    montecarlo::MeasurementModel m{"lin", set, [=](std::span<const double> x) { return x[a] + 2 * x[b]; }};
    const double u = std::sqrt(0.01 + 0.16 - 4 * 0.01);
    CHECK(montecarlo::monte_carlo_uncertainty(m, 100000, 3).value.u() == Approx(u).epsilon(0.01));
    CHECK_THROWS_AS(set.set_covariance(a, b, 0.5), InvalidArgument);
  }
  SUBCASE("exact inputs") {
    montecarlo::InputSet fixed;
    fixed.add("x", Uncertain::exact(3.0));
    montecarlo::MeasurementModel m{"sq", fixed, [](std::span<const double> x) { return x[0] * x[0]; }};
    const auto r = montecarlo::monte_carlo_uncertainty(m, 10000, 1);
    CHECK(r.value.value() == 9.0);
    CHECK(r.value.u() == 0.0);
  }
  SUBCASE("non-finite draws") {
    montecarlo::InputSet z;
    z.add("x", Uncertain(0.0, 1.0));
    montecarlo::MeasurementModel m{"log", z, [](std::span<const double> x) { return std::log(x[0]); }};
    CHECK_THROWS_AS(montecarlo::monte_carlo_uncertainty(m, 10000, 1), Error);
    CHECK_THROWS_AS(montecarlo::monte_carlo_uncertainty(m, 100, 1), InvalidArgument);
  }
  SUBCASE("deterministic") {
    montecarlo::MeasurementModel m{"p", set, [=](std::span<const double> x) { return x[a] * x[b]; }};
    const auto r1 = montecarlo::monte_carlo_uncertainty(m, 20000, 5);
    const auto r2 = montecarlo::monte_carlo_uncertainty(m, 20000, 5);
    CHECK(r1.value.value() == r2.value.value());
    CHECK(r1.value.u() == r2.value.u());
  }
}
