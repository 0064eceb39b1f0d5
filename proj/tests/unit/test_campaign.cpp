#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "spdcal/campaign.hpp"
#include "spdcal/keyvalue.hpp"
#include "spdcal/report.hpp"

using namespace spdcal;
using namespace spdcal::campaign;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

const fs::path kData = SPDCAL_DATA_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spdcal_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

double estimate_at(const CampaignAnalysis& a, double rate) {
  for (const auto& e : a.estimates)
    if (e.target_rate == rate) return e.de.value.value();
  FAIL("no estimate at rate " << rate);
  return 0.0;
}

}  // namespace

TEST_CASE("scenario files") {
  const auto s = Scenario::load(kData / "scenarios" / "rate_sweep.cfg");
  CHECK(s.mode == Mode::fiber);
  CHECK(s.de_true == 0.556);
  CHECK(s.settings_cps.size() == 6);
  CHECK(s.afterpulse_cal_rates.size() == 4);
  CHECK(s.cal.wavelength_nm == Approx(851.8));
  CHECK(Scenario::load(kData / "scenarios" / "freespace.cfg").mode == Mode::free_space);

  const auto kv = KeyValueFile::parse("calibration = " + (kData / "calibration" / "fiber_851.cfg").string() +
                                          "\nsettings_cps = 1e4 1e5 1e6\nafterpulse_cal_rates = 1e4 1e5\n",
                                      "bad.cfg");
  CHECK_THROWS_AS(Scenario::from_keyvalue(kv), Error);
  CHECK_THROWS_AS(parse_mode("trap"), InvalidArgument);
}

TEST_CASE("noiseless campaign recovers the truth") {
  const auto s = Scenario::load(kData / "scenarios" / "noiseless.cfg");
  const auto data = simulate_campaign(s, 3);
  const auto a = analyze_campaign(data);
  for (double r : {1.0, 1e5}) CHECK(std::abs(estimate_at(a, r) / data.truth_at(r) - 1.0) < 1e-10);
  CHECK(a.outliers.empty());
}

TEST_CASE("simulation is deterministic per seed") {
  const auto s = Scenario::load(kData / "scenarios" / "rate_sweep.cfg");
  const auto a = simulate_campaign(s, 9);
  const auto b = simulate_campaign(s, 9);
  const auto c = simulate_campaign(s, 10);
  REQUIRE(a.measurements.size() == b.measurements.size());
  for (std::size_t i = 0; i < a.measurements.size(); ++i) {
    CHECK(a.measurements[i].counts.c_bar == b.measurements[i].counts.c_bar);
    CHECK(a.measurements[i].monitor_bright == b.measurements[i].monitor_bright);
  }
  CHECK(a.afterpulse_streams[0].ticks() == b.afterpulse_streams[0].ticks());
  CHECK(a.measurements[0].counts.c_bar != c.measurements[0].counts.c_bar);
}

TEST_CASE("saved campaigns analyze identically") {
  const auto s = Scenario::load(kData / "scenarios" / "rate_sweep.cfg");
  const auto data = simulate_campaign(s, 4);
  const auto dir = scratch("roundtrip");
  const auto file = save_campaign(data, dir);
  const auto files = campaign_files(file);
  CHECK(files.front() == file);
  for (const auto& f : files) CHECK(fs::exists(f));

  const auto loaded = load_campaign(file);
  const auto a = analyze_campaign(data);
  const auto b = analyze_campaign(loaded);
  CHECK(estimate_at(b, 1e5) == Approx(estimate_at(a, 1e5)).epsilon(1e-12));
  CHECK(b.fit.slope.value() == Approx(a.fit.slope.value()).epsilon(1e-10));
  CHECK(loaded.de_true == data.de_true);
  fs::remove_all(dir);
}

TEST_CASE("free-space campaign") {
  const auto s = Scenario::load(kData / "scenarios" / "freespace.cfg");
  int covered = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto data = simulate_campaign(s, seed);
    const auto a = analyze_campaign(data);
    for (const auto& e : a.estimates)
      if (e.target_rate == 1e5 && std::abs(e.de.value.value() - data.truth_at(1e5)) <= 2 * e.de.value.u()) ++covered;
  }
  CHECK(covered >= 8);
}

TEST_CASE("bistable dark counts are flagged at low rates") {
  const auto s = Scenario::load(kData / "scenarios" / "bistable.cfg");
  std::size_t low_anomalies = 0, missed = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto data = simulate_campaign(s, seed);
    const auto a = analyze_campaign(data);
    for (std::size_t i = 0; i < data.measurements.size(); ++i) {
      const auto& m = data.measurements[i];
      if (!m.dark_anomaly || m.counts.rate() > 2e4) continue;
      ++low_anomalies;
      if (std::find(a.outliers.begin(), a.outliers.end(), i) == a.outliers.end()) ++missed;
    }
  }
  CHECK(low_anomalies > 0);
  CHECK(missed == 0);
}

TEST_CASE("report text") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

  Report r("unit");
  r.set("result.x", Uncertain(0.5, 0.01));
  r.set("option.mode", "fiber");
  r.set("option.mode", "free-space");
  Warnings w{"first", "second"};
  r.warnings(w);
  const auto cal = CalibrationConstants::load(kData / "calibration" / "fiber_851.cfg");
  r.budget(debudget::fiber_budget(reference_fiber_inputs(cal)));
  const auto kv = KeyValueFile::parse(r.to_text(), "report");
  CHECK(kv.get_string("report.schema") == "spdcal-report/1");
  CHECK(kv.get_string("report.command") == "unit");
  CHECK(kv.get_double("result.x") == 0.5);
  CHECK(kv.get_double("result.x.u") == 0.01);
  CHECK(kv.get_string("option.mode") == "free-space");
  CHECK(kv.get_string("warning.02") == "second");
  const auto line = kv.get_string("budget.01");
  CHECK(std::count(line.begin(), line.end(), '|') == 3);
  CHECK((line.find(" | A | ") != std::string::npos || line.find(" | B | ") != std::string::npos));
}

namespace {

int run_cli(const std::string& args, const fs::path& out, const fs::path& err) {
  const std::string cmd = std::string("\"") + SPDCAL_CLI + "\" " + args + " > \"" + out.string() + "\" 2> \"" +
                          err.string() + "\"";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cli simulate and de") {
  const auto dir = scratch("cli");
  const auto scen = (kData / "scenarios" / "rate_sweep.cfg").string();
  REQUIRE(run_cli("simulate --scenario " + scen + " --seed 5 --out " + (dir / "a").string(), dir / "o1", dir / "e1") == 0);
  REQUIRE(run_cli("simulate --scenario " + scen + " --seed 5 --out " + (dir / "b").string(), dir / "o2", dir / "e2") == 0);
  const auto fa = campaign_files(dir / "a" / "scenario.cfg");
  REQUIRE(fa.size() > 2);
  for (const auto& f : fa) CHECK(slurp(f) == slurp(dir / "b" / f.filename()));

  REQUIRE(run_cli("de --scenario " + (dir / "a" / "scenario.cfg").string(), dir / "de.txt", dir / "e3") == 0);
  const auto kv = KeyValueFile::load(dir / "de.txt");
  CHECK(kv.get_string("report.command") == "de");
  CHECK(kv.get_string("input.scenario.cfg.sha256").size() == 64);
  CHECK(kv.contains("calibration.version"));
  CHECK(kv.get_string("option.fit_weighting") == "unweighted");
  CHECK(kv.contains("option.baseline_start_s"));
  CHECK(kv.contains("option.covariance_policy"));
  CHECK(kv.contains("budget.01"));
  CHECK(kv.get_double("result.de_at_1e+05.u") > 0.0);
  fs::remove_all(dir);
}

TEST_CASE("cli consensus and malformed input") {
  const auto dir = scratch("cli_misc");
  REQUIRE(run_cli("consensus --runs " + (kData / "fixtures" / "ns233_splice.csv").string(), dir / "c.txt", dir / "e1") == 0);
  const auto kv = KeyValueFile::load(dir / "c.txt");
  CHECK(kv.get_double("result.mean") == Approx(0.9234).epsilon(1.1e-4));

  {
    std::ofstream bad(dir / "bad.csv");
    bad << "label,lambda_nm,u_lambda,temp_C,u_temp,r_out_mon,u_r,de,u_de\n"
        << "1,1533.62,0.01,22.94,0.1,4.767e-06,1e-08,0.9235,0.003\n"
        << "2,1533.62,0.01,22.99,0.08,4.757e-06,1e-08,oops,0.003\n";
  }
  CHECK(run_cli("consensus --runs " + (dir / "bad.csv").string(), dir / "c2.txt", dir / "e2") == 1);
  const auto msg = slurp(dir / "e2");
  CHECK(msg.find("bad.csv:3") != std::string::npos);
  CHECK(msg.find("expected") != std::string::npos);
  fs::remove_all(dir);
}
