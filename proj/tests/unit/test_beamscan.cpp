#include <cmath>

#include "doctest.h"
#include "spdcal/beamscan.hpp"
#include "spdcal/errors.hpp"

using namespace spdcal;
using namespace spdcal::beamscan;
using doctest::Approx;

namespace {

constexpr double um = 1e-6;

template <class F>
ScanGrid make_grid(std::size_t n, double step, F f) {
  std::vector<double> v(n * n);
  const double half = 0.5 * static_cast<double>(n - 1) * step;
  for (std::size_t iy = 0; iy < n; ++iy)
    for (std::size_t ix = 0; ix < n; ++ix) v[iy * n + ix] = f(ix * step - half, iy * step - half);
  return ScanGrid(n, n, step, step, v, {-half, -half});
}

double window_mean(const ScanGrid& g, double window) {
  double s = 0, n = 0;
  for (std::size_t iy = 0; iy < g.ny(); ++iy)
    for (std::size_t ix = 0; ix < g.nx(); ++ix) {
      const auto p = g.pixel_center(ix, iy);
      if (std::abs(p.x) <= window / 2 * (1 + 1e-12) && std::abs(p.y) <= window / 2 * (1 + 1e-12)) s += g.at(ix, iy), ++n;
    }
  return s / n;
}

}  // namespace

TEST_CASE("fraction outside a diameter") {
  const auto spot = make_grid(21, 10 * um, [](double x, double y) { return x == 0 && y == 0 ? 5.0 : 0.0; });
  CHECK(fraction_outside_diameter(spot, {0, 0}, 10 * um) == 0.0);

  const double D = 200 * um;
  const auto disk = make_grid(401, 1 * um, [&](double x, double y) { return std::hypot(x, y) <= D / 2 ? 1.0 : 0.0; });
  CHECK(fraction_outside_diameter(disk, {0, 0}, D / std::sqrt(2.0)) == Approx(0.5).epsilon(0.01));

  const double w = 10 * um;  // 1/e^2 radius
  const auto beam = make_grid(301, 1 * um, [&](double x, double y) { return std::exp(-2 * (x * x + y * y) / (w * w)); });
  CHECK(fraction_outside_diameter(beam, {0, 0}, 150 * um) < 1e-3);

  double prev = 1.0;
  for (double d = 2 * um; d < 60 * um; d += 1.7 * um) {
    const double f = fraction_outside_diameter(beam, {0, 0}, d);
    CHECK(f <= prev);
    prev = f;
  }
  CHECK_THROWS_AS(fraction_outside_diameter(make_grid(5, um, [](double, double) { return 0.0; }), {0, 0}, 3 * um),
                  InvalidArgument);
}

TEST_CASE("region std") {
  const auto flat = make_grid(31, 10 * um, [](double, double) { return 7.0; });
  CHECK(region_std(flat, {0, 0}, 150 * um) == 0.0);

  const ScanGrid g(3, 3, 1 * um, 1 * um, {98, 100, 102, 99, 100, 101, 100, 100, 100});
  // all nine centers lie within 1.5 um of the middle pixel
  const double vals[] = {98, 100, 102, 99, 100, 101, 100, 100, 100};
  double m = 0, ss = 0;
  for (double v : vals) m += v / 9;
  for (double v : vals) ss += (v - m) * (v - m);
  CHECK(region_std(g, {1 * um, 1 * um}, 3 * um) == Approx(std::sqrt(ss / 8) / m).epsilon(1e-12));
  CHECK(region_std_shot_corrected(g, {1 * um, 1 * um}, 3 * um) == 0.0);

  auto big = make_grid(41, 5 * um, [](double x, double y) { return 1e4 + 30 * std::sin(x / (7 * um)) + y / um; });
  std::vector<double> scaled;
  for (std::size_t iy = 0; iy < big.ny(); ++iy)
    for (std::size_t ix = 0; ix < big.nx(); ++ix) scaled.push_back(3.5 * big.at(ix, iy));
  const ScanGrid big3(41, 41, 5 * um, 5 * um, scaled, big.origin());
  CHECK(region_std(big3, {0, 0}, 150 * um) == Approx(region_std(big, {0, 0}, 150 * um)).epsilon(1e-12));
  CHECK_THROWS_AS(region_std(big, {0, 0}, 4 * um), InvalidArgument);
}

TEST_CASE("fringes raise the spatial spread") {
  const auto smooth = make_grid(61, 5 * um, [](double x, double y) { return 1000 * (1 - 1e-5 * (x * x + y * y) / (um * um)); });
  const auto fringed = make_grid(61, 5 * um, [](double x, double y) {
    return 1000 * (1 - 1e-5 * (x * x + y * y) / (um * um)) * (1 + 0.05 * std::sin(2 * M_PI * x / (23 * um)));
  });
  for (double d : {30 * um, 60 * um, 100 * um, 150 * um, 250 * um})
    CHECK(region_std(fringed, {0, 0}, d) > region_std(smooth, {0, 0}, d));
}

TEST_CASE("centre slope") {
  const auto flat = make_grid(21, 5 * um, [](double, double) { return 3.0; });
  CHECK(center_slope(flat, {0, 0}, 40 * um) == Approx(0.0).epsilon(1e-15));

  const auto ramp = make_grid(21, 5 * um, [](double x, double) { return 1000 * (1 + 1e-3 * x / um); });
  const double s = center_slope(ramp, {0, 0}, 40 * um);
  CHECK(s == Approx(0.1).epsilon(1e-12));
  CHECK(alignment_uncertainty(s, 5 * um) == Approx(0.5).epsilon(1e-12));

  // a constant offset leaves the plane gradient unchanged; only the normalising mean moves
  const auto tilted = make_grid(21, 5 * um, [](double x, double y) { return 500 + 0.3 * x / um - 0.2 * y / um; });
  const auto lifted = make_grid(21, 5 * um, [](double x, double y) { return 900 + 0.3 * x / um - 0.2 * y / um; });
  const double w = 40 * um;
  CHECK(center_slope(lifted, {0, 0}, w) * window_mean(lifted, w) ==
        Approx(center_slope(tilted, {0, 0}, w) * window_mean(tilted, w)).epsilon(1e-12));
  CHECK(center_slope(tilted, {0, 0}, w) == Approx(100 * std::hypot(0.3, 0.2) / 500).epsilon(1e-12));

  CHECK_THROWS_AS(center_slope(ramp, {0, 0}, 6 * um), InvalidArgument);
  CHECK_THROWS_AS(alignment_uncertainty(-1, 5 * um), InvalidArgument);
}

TEST_CASE("centroids") {
  const auto beam = make_grid(41, 2 * um, [](double x, double y) {
    return std::exp(-((x - 6 * um) * (x - 6 * um) + (y + 4 * um) * (y + 4 * um)) / (50 * um * um));
  });
  const auto c = intensity_centroid(beam);
  CHECK(c.x == Approx(6 * um).epsilon(1e-3));
  CHECK(c.y == Approx(-4 * um).epsilon(1e-3));
  const auto h = half_max_centroid(beam);
  CHECK(h.x == Approx(6 * um).epsilon(1e-9));
  CHECK(h.y == Approx(-4 * um).epsilon(1e-9));
}

TEST_CASE("grid text") {
  const ScanGrid g(3, 2, 10 * um, 5 * um, {1, 2, 3, 4, 5, 6}, {-10 * um, 0});
  const auto back = ScanGrid::parse(g.to_text());
  CHECK(back.nx() == 3);
  CHECK(back.ny() == 2);
  CHECK(back.at(2, 1) == 6);
  CHECK(back.x_step() == Approx(10 * um));
  CHECK(back.origin().x == Approx(-10 * um));

  CHECK_THROWS_WITH_AS(ScanGrid::parse("# x_step_um=10 y_step_um=10\n1,2,3\n4,5\n", "scan.csv"),
                       doctest::Contains("scan.csv:3"), ParseError);
  CHECK_THROWS_AS(ScanGrid::parse("1,2,3\n"), ParseError);
  CHECK_THROWS_AS(ScanGrid::parse("# x_step_um=10 y_step_um=10\n1,-2,3\n"), ParseError);
}
