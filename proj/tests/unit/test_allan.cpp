#include <cmath>

#include "doctest.h"
#include "spdcal/allan.hpp"
#include "spdcal/simulator.hpp"
#include "spdcal/stats.hpp"

using namespace spdcal;
using namespace spdcal::allan;
using doctest::Approx;

namespace {

// Direct evaluation from block averages, no prefix sums.
double brute_adev(const std::vector<double>& v, std::size_t m, bool overlapping) {
  const std::size_t n = v.size();
  auto avg = [&](std::size_t start) {
    double s = 0;
    for (std::size_t k = 0; k < m; ++k) s += v[start + k];
    return s / static_cast<double>(m);
  };
  double acc = 0;
  std::size_t terms = 0;
  const std::size_t step = overlapping ? 1 : m;
  for (std::size_t i = 0; i + 2 * m <= n; i += step) {
    const double d = avg(i + m) - avg(i);
    acc += d * d;
    ++terms;
  }
  return std::sqrt(acc / (2.0 * static_cast<double>(terms)));
}

}  // namespace

TEST_CASE("constant series has zero deviation") {
  const SampledSeries s(std::vector<double>(200, 4.2e-6), 0.5);
  for (double tau : octave_taus(s)) CHECK(allan_deviation(s, tau) == 0.0);
  for (const auto& p : relative_allan(s, octave_taus(s))) CHECK(p.percent == 0.0);
}

TEST_CASE("alternating series") {
  const double a = 0.3;
  const SampledSeries s({a, -a, a, -a, a, -a}, 1.0);
  CHECK(allan_deviation(s, 1.0) == Approx(a * std::sqrt(2.0)).epsilon(1e-14));
}

TEST_CASE("estimator matches direct block averages") {
  const simulator::PowerMeterSimConfig cfg{1.0, 1e-2, 1e-3, -1};
  const auto s = simulator::simulate_power_series({&cfg, 1}, 333, 1.0, 5).front();
  for (std::size_t m : {1u, 2u, 3u, 7u, 50u, 110u}) {
    CHECK(allan_deviation(s, static_cast<double>(m)) == Approx(brute_adev(s.values, m, true)).epsilon(1e-9));
    CHECK(allan_deviation(s, static_cast<double>(m), Estimator::non_overlapping) ==
          Approx(brute_adev(s.values, m, false)).epsilon(1e-9));
  }
}

TEST_CASE("tau limits") {
  const SampledSeries s(std::vector<double>(21, 1.0), 2.0);
  CHECK(max_tau(s) == 20.0);
  CHECK_NOTHROW(allan_deviation(s, 20.0));
  CHECK_THROWS_WITH_AS(allan_deviation(s, 22.0), doctest::Contains("20"), InvalidArgument);
  CHECK_THROWS_AS(allan_deviation(s, 3.0), InvalidArgument);
}

TEST_CASE("white noise slope and level") {
  const simulator::PowerMeterSimConfig cfg{1e-5, 1e-3, 0.0, -1};
  const auto s = simulator::simulate_power_series({&cfg, 1}, 100000, 1.0, 9).front();
  std::vector<double> x, y;
  for (double tau = 1; tau <= 64; tau *= 2) {
    x.push_back(std::log(tau));
    y.push_back(std::log(allan_deviation(s, tau)));
  }
  CHECK(stats::fit_line(x, y).slope == Approx(-0.5).epsilon(0.1));
  const double one = 1.0;
  CHECK(relative_allan(s, {&one, 1}).front().percent == Approx(0.1).epsilon(0.01));
}

TEST_CASE("offset and scale invariance") {
  const simulator::PowerMeterSimConfig cfg{2.0, 1e-2, 5e-3, -1};
  const auto s = simulator::simulate_power_series({&cfg, 1}, 500, 1.0, 3).front();
  auto shifted = s.values;
  auto scaled = s.values;
  for (auto& v : shifted) v += 10.0;
  for (auto& v : scaled) v *= 7.5;
  const SampledSeries sh(shifted, 1.0), sc(scaled, 1.0);
  const auto taus = octave_taus(s);
  const auto base = relative_allan(s, taus);
  const auto rel = relative_allan(sc, taus);
  for (std::size_t k = 0; k < taus.size(); ++k) {
    CHECK(allan_deviation(sh, taus[k]) == Approx(allan_deviation(s, taus[k])).epsilon(1e-8));
    CHECK(rel[k].percent == Approx(base[k].percent).epsilon(1e-12));
  }
  CHECK_THROWS_AS(relative_allan(SampledSeries({1.0, -1.0, 1.0, -1.0}, 1.0), taus), InvalidArgument);
}

TEST_CASE("ratio series") {
  const SampledSeries b({1.0, 2.0, 4.0}, 1.0);
  CHECK(ratio_series(b, b).values == std::vector<double>{1, 1, 1});
  CHECK(ratio_series(SampledSeries({2.0, 4.0, 8.0}, 1.0), b).values == std::vector<double>{2, 2, 2});
  CHECK_THROWS_AS(ratio_series(b, SampledSeries({1.0, 0.0, 1.0}, 1.0)), InvalidArgument);

  // common-mode drift cancels
  const simulator::PowerMeterSimConfig with[] = {{1e-7, 1e-3, 1e-3, 4}, {1e-5, 2e-3, 1e-3, 4}};
  const simulator::PowerMeterSimConfig without[] = {{1e-7, 1e-3, 0.0, -1}, {1e-5, 2e-3, 0.0, -1}};
  const auto a = simulator::simulate_power_series(with, 400, 1.0, 21);
  const auto z = simulator::simulate_power_series(without, 400, 1.0, 21);
  const auto ra = ratio_series(a[0], a[1]);
  const auto rz = ratio_series(z[0], z[1]);
  for (std::size_t k = 0; k < ra.size(); ++k) CHECK(ra.values[k] == Approx(rz.values[k]).epsilon(1e-13));
}

TEST_CASE("ratio of drifting channels sits below the raw curve") {
  int below = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const simulator::PowerMeterSimConfig cfgs[] = {{1e-7, 1e-4, 2e-4, 0}, {1e-5, 1e-4, 2e-4, 0}};
    const auto ch = simulator::simulate_power_series(cfgs, 300, 1.0, seed);
    const auto ratio = ratio_series(ch[0], ch[1]);
    if (allan_deviation(ratio, 25.0) / ratio.mean() < allan_deviation(ch[0], 25.0) / ch[0].mean()) ++below;
  }
  CHECK(below >= 19);
}

TEST_CASE("power log parsing") {
  const std::string text = "t_s,reading_W,range_id,dark\n0,1e-6,r1,0\n1,1.1e-6,r1,0\n2,0,r1,1\n3,0.9e-6,r1,0\n";
  const auto rows = parse_power_csv(text, "p.csv");
  CHECK(rows.size() == 4);
  CHECK(rows[2].dark);
  CHECK(parse_power_csv(power_csv_text(rows), "q").size() == 4);
  CHECK_THROWS_WITH_AS(parse_power_csv("0,1e-6,r1,2\n", "p.csv"), doctest::Contains("p.csv:1"), ParseError);
  CHECK_THROWS_AS(parse_power_csv("0,1e-6,r1\n", "p.csv"), ParseError);
  // dark row at t=2 leaves a gap in the bright timestamps
  CHECK_THROWS_AS(bright_series(rows), InvalidArgument);
  const auto s = bright_series(parse_power_csv("0,1,a,0\n1,2,a,0\n2,3,a,0\n", "x"));
  CHECK(s.sample_interval == Approx(1.0));
  CHECK(s.mean() == Approx(2.0));
}
