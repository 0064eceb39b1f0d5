// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "spdcal/allan.hpp"
#include "spdcal/calibration.hpp"
#include "spdcal/campaign.hpp"
#include "spdcal/consensus.hpp"
#include "spdcal/debudget.hpp"
#include "spdcal/montecarlo.hpp"
#include "spdcal/quantities.hpp"
#include "spdcal/simulator.hpp"
#include "spdcal/stats.hpp"
#include "spdcal/timetag.hpp"

namespace fs = std::filesystem;
using namespace spdcal;

namespace {

const fs::path kData = SPDCAL_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

int failures = 0;

void run(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  o.check(secs < budget_s, fmt("%.2f s", secs) + fmt(" (limit %.0f s)", budget_s));
  if (!o.pass) ++failures;
  std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

std::vector<consensus::RunResult> fixture(const std::string& name) {
  return consensus::load_runs_csv(kData / "fixtures" / (name + ".csv"));
}

Outcome consensus_means() {
  Outcome o;
  const std::pair<const char*, double> cases[] = {
      {"nist8103_tisapphire", 0.5532}, {"nist8103_cw", 0.5490}, {"v23172", 0.5811},
      {"v23173", 0.5821},        {"pd9d_splice", 0.9178},         {"ns233_connector", 0.8921},
      {"ns233_splice", 0.9234},
  };
  for (const auto& [name, expected] : cases) {
    const double m = consensus::pool_mean(fixture(name));
    o.check(std::abs(m - expected) <= 1e-4 + 1e-12, std::string(name) + fmt(" %.5f", m));
  }
  return o;
}

Outcome coverage_intervals() {
  Outcome o;
  struct Case {
    const char* name;
    double lo, hi, rel, tol;
  };
  const Case cases[] = {
      {"ns233_splice", 0.9171, 0.9298, 0.70, 0.002},
      {"nist8103_cw", 0.5397, 0.5587, 1.78, 0.003},
  };
  for (const auto& c : cases) {
    const auto runs = fixture(c.name);
    const auto ci = consensus::coverage_interval(runs, 0.95);
    const double rel = consensus::relative_expanded(runs, ci);
    const bool ok = std::abs(ci.lo - c.lo) <= c.tol && std::abs(ci.hi - c.hi) <= c.tol && std::abs(rel - c.rel) <= 0.05;
    o.check(ok, std::string(c.name) + fmt(" [%.4f,", ci.lo) + fmt(" %.4f]", ci.hi) + fmt(" %.3f %%", rel));
  }
  return o;
}

Outcome photon_flux_arithmetic() {
  Outcome o;
  const double a = photon_flux(10e-15, 851.8e-9);
  const double b = photon_flux(10e-15, 1533.6e-9);
  o.check(std::abs(a - 42880) <= 50, fmt("851.8 nm %.1f /s", a));
  o.check(std::abs(b - 77200) <= 50, fmt("1533.6 nm %.1f /s", b));
  return o;
}

Outcome expanded_arithmetic() {
  Outcome o;
  const double rel = expand(Uncertain(0.9235, 0.0030), 2.0).relative_percent();
  o.check(std::abs(rel - 0.65) <= 0.01, fmt("0.9235(30) -> %.4f %%", rel));
  return o;
}

Outcome gum_vs_mc() {
  Outcome o;
  auto compare = [&](const std::string& label, const debudget::Budget& b, const montecarlo::MeasurementModel& m) {
    const auto mc = montecarlo::monte_carlo_uncertainty(m, 100000, 20240601);
    const double ra = b.de.relative();
    const double rm = mc.value.u() / mc.value.value();
    o.check(std::abs(ra / rm - 1.0) <= 0.05,
            label + fmt(" GUM %.4f %%", 100 * ra) + fmt(" MC %.4f %%", 100 * rm));
  };
  for (const char* name : {"fiber_851", "fiber_1533"}) {
    const auto in = campaign::reference_fiber_inputs(CalibrationConstants::load(kData / "calibration" / (std::string(name) + ".cfg")));
    compare(name, debudget::fiber_budget(in), montecarlo::fiber_chain_model(in));
  }
  const auto in = campaign::reference_freespace_inputs(CalibrationConstants::load(kData / "calibration" / "freespace_851.cfg"));
  compare("freespace_851", debudget::freespace_budget(in), montecarlo::freespace_chain_model(in));
  return o;
}

std::uint64_t enumerate_pairs(const timetag::TimeTagStream& s, double window) {
  const auto& t = s.ticks();
  const auto w = static_cast<std::int64_t>(std::floor(window / s.resolution() + 1e-9));
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    for (std::size_t j = i + 1; j < t.size() && t[j] - t[i] <= w; ++j) ++n;
  return n;
}

Outcome timetag_suite() {
  Outcome o;
  const double bin = simulator::kDefaultResolution;

  // (a) histogram totals against brute-force pair enumeration
  {
    simulator::DetectorConfig det{52.29e-9, 0.01, 20e-9, 0.0, 1.0};
    bool all = true;
    for (double rate : {1e5, 1e6, 5e6}) {
      const auto full = simulator::simulate_detections({simulator::SourceMode::cw, rate, 0}, det, 2e4 / rate, 11, bin);
      if (full.size() < 10000) throw Error("stream too short");
      std::vector<std::int64_t> first(full.ticks().begin(), full.ticks().begin() + 10000);
      const timetag::TimeTagStream s(std::move(first), bin, full.duration());
      const auto h = timetag::interarrival_sum_histogram(s, bin, 1e-6);
      all = all && h.total() == enumerate_pairs(s, 1e-6);
    }
    o.check(all, "(a) histogram totals = enumeration");
  }

  // (b) dead time
  {
    simulator::DetectorConfig det{52.29e-9, 0.01, 20e-9, 100.0, 1.0};
    const auto s = simulator::simulate_detections({simulator::SourceMode::cw, 1e6, 0}, det, 1.0, 3, bin);
    const auto dt = timetag::estimate_dead_time(timetag::interarrival_sum_histogram(s, bin));
    const bool ok = dt.detected() && std::abs(dt.dead_time->value() - 52.29e-9) <= bin;
    o.check(ok, fmt("(b) dead time %.4f ns", dt.detected() ? dt.dead_time->value() * 1e9 : NAN));
  }

  // (c) afterpulse probability on 1e6-event streams: stream 1 alone, then
  // the mean of 20 streams against its own (sqrt 20 smaller) uncertainty
  {
    simulator::DetectorConfig det{52.29e-9, 0.010, 20e-9, 0.0, 1.0};
    const double rate = 1e5;
    double sum = 0.0, sum_u2 = 0.0, z1 = 0.0;
    const int n = 20;
    for (int seed = 1; seed <= n; ++seed) {
      const auto s = simulator::simulate_detections({simulator::SourceMode::cw, rate, 0}, det, 1e6 / rate, seed, bin);
      const auto h = timetag::interarrival_sum_histogram(s, bin);
      const auto dt = timetag::estimate_dead_time(h);
      const auto p = timetag::afterpulse_probability(h, timetag::kDefaultBaselineStart, dt.dead_time->value()).probability;
      if (seed == 1) z1 = (p.value() - 0.010) / p.u();
      sum += p.value();
      sum_u2 += p.u() * p.u();
    }
    const double zbar = (sum / n - 0.010) / (std::sqrt(sum_u2) / n);
    o.check(std::abs(z1) <= 2.0 && std::abs(zbar) <= 2.0,
            fmt("(c) stream 1 %.2f sigma", z1) + fmt(", 20-stream mean %.2f sigma", zbar));
  }

  // (d) linear afterpulse model coverage over seeds
  {
    const double ap0 = 0.005, ap1 = 5e-8;
    const double rates[] = {2e4, 4e4, 6e4, 8e4, 1e5};
    int covered = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      std::vector<timetag::AfterpulsePoint> pts;
      for (std::size_t k = 0; k < std::size(rates); ++k) {
        simulator::DetectorConfig det{52.29e-9, ap0 + ap1 * rates[k], 20e-9, 0.0, 1.0};
        const auto s = simulator::simulate_detections({simulator::SourceMode::cw, rates[k], 0}, det, 2e5 / rates[k],
                                                      seed * 16 + k, bin);
        const auto h = timetag::interarrival_sum_histogram(s, bin);
        const auto dt = timetag::estimate_dead_time(h);
        const double dead = dt.detected() ? dt.dead_time->value() : 0.0;
        pts.push_back({s.mean_rate(), timetag::afterpulse_probability(h, timetag::kDefaultBaselineStart, dead).probability});
      }
      const auto m = timetag::fit_afterpulse_model(pts);
      // joint 95 % ellipse on (ap0, ap)
      const double a = m.ap0.u() * m.ap0.u(), d = m.ap.u() * m.ap.u(), c = m.cov_ap0_ap;
      const double e0 = m.ap0.value() - ap0, e1 = m.ap.value() - ap1;
      const double det2 = a * d - c * c;
      const double chi2 = (d * e0 * e0 - 2 * c * e0 * e1 + a * e1 * e1) / det2;
      if (chi2 <= 5.991) ++covered;
    }
    o.check(covered >= 90, "(d) fit covers truth in " + std::to_string(covered) + "/100");
  }
  return o;
}

double loglog_slope(const allan::SampledSeries& s, const std::vector<double>& taus) {
  std::vector<double> x, y;
  for (const double t : taus) {
    x.push_back(std::log(t));
    y.push_back(std::log(allan::allan_deviation(s, t)));
  }
  return stats::fit_line(x, y).slope;
}

Outcome allan_suite() {
  Outcome o;
  {
    const allan::SampledSeries s(std::vector<double>(1000, 3.5e-6), 1.0);
    double worst = 0.0;
    for (const double t : allan::octave_taus(s)) worst = std::max(worst, allan::allan_deviation(s, t));
    o.check(worst == 0.0, fmt("constant max sigma %.3g", worst));
  }
  {
    const simulator::PowerMeterSimConfig cfg{1e-5, 1e-3, 0.0, -1};
    const auto s = simulator::simulate_power_series({&cfg, 1}, 100000, 1.0, 42).front();
    std::vector<double> taus;
    for (double t = 1; t <= 1024; t *= 2) taus.push_back(t);
    const double slope = loglog_slope(s, taus);
    o.check(std::abs(slope + 0.5) <= 0.05, fmt("white slope %.4f", slope));
  }
  {
    int below = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const simulator::PowerMeterSimConfig cfgs[] = {{1e-7, 1e-4, 2e-4, 0}, {1e-5, 1e-4, 2e-4, 0}};
      const auto ch = simulator::simulate_power_series(cfgs, 300, 1.0, seed);
      const auto ratio = allan::ratio_series(ch[0], ch[1]);
      const double raw = allan::allan_deviation(ch[0], 25.0) / ch[0].mean();
      const double rat = allan::allan_deviation(ratio, 25.0) / ratio.mean();
      if (rat < raw) ++below;
    }
    o.check(below >= 95, "ratio below raw at 25 s in " + std::to_string(below) + "/100");
  }
  return o;
}

Outcome campaign_suite() {
  Outcome o;
  const auto sweep = campaign::Scenario::load(kData / "scenarios" / "rate_sweep.cfg");
  int covered = 0, runs = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto data = campaign::simulate_campaign(sweep, seed);
    const auto an = campaign::analyze_campaign(data, {});
    for (const auto& e : an.estimates) {
      if (e.target_rate != 1e5) continue;
      ++runs;
      if (std::abs(e.de.value.value() - data.truth_at(1e5)) <= 2.0 * e.de.value.u()) ++covered;
    }
  }
  o.check(runs == 100 && covered >= 90, "rate-sweep k=2 coverage " + std::to_string(covered) + "/100");

  const auto quiet = campaign::Scenario::load(kData / "scenarios" / "noiseless.cfg");
  const auto data = campaign::simulate_campaign(quiet, 1);
  const auto an = campaign::analyze_campaign(data, {});
  double worst = INFINITY;
  for (const auto& e : an.estimates)
    if (e.target_rate == 1e5) worst = std::abs(e.de.value.value() / data.truth_at(1e5) - 1.0);
  o.check(worst <= 1e-10, fmt("noiseless relative error %.2e", worst));
  return o;
}

}  // namespace

int main() {
  run(1, "consensus means", 1, consensus_means);
  run(2, "coverage intervals", 1, coverage_intervals);
  run(3, "photon flux", 1, photon_flux_arithmetic);
  run(4, "expanded uncertainty", 1, expanded_arithmetic);
  run(5, "GUM vs Monte Carlo", 30, gum_vs_mc);
  run(6, "time-tag oracles", 120, timetag_suite);
  run(7, "Allan deviation", 60, allan_suite);
  run(8, "end-to-end campaign", 300, campaign_suite);
  return failures == 0 ? 0 : 1;
}
