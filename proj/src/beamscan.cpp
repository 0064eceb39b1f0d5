#include "spdcal/beamscan.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spdcal/errors.hpp"
#include "spdcal/kernels.hpp"
#include "spdcal/keyvalue.hpp"

namespace spdcal::beamscan {

ScanGrid::ScanGrid(std::size_t nx, std::size_t ny, double x_step_m, double y_step_m, std::vector<double> values,
                   Point origin)
    : nx_(nx), ny_(ny), dx_(x_step_m), dy_(y_step_m), values_(std::move(values)), origin_(origin) {
  if (nx == 0 || ny == 0) throw InvalidArgument("scan grid is empty");
  if (values_.size() != nx * ny) throw InvalidArgument("scan grid size does not match nx * ny");
  if (!(dx_ > 0.0 && dy_ > 0.0)) throw InvalidArgument("scan steps must be positive");
  for (double v : values_)
    if (!std::isfinite(v) || v < 0.0) throw InvalidArgument("scan values must be finite and non-negative");
}

ScanGrid ScanGrid::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  double xs = 0.0, ys = 0.0, x0 = 0.0, y0 = 0.0;
  bool have_x = false, have_y = false;
  std::vector<double> values;
  std::size_t nx = 0, ny = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    if (t[0] == '#') {
      for (const auto& tok : split(t.substr(1), ' ')) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const auto v = parse_double(tok.substr(eq + 1));
        if (key == "x_step_um" || key == "y_step_um" || key == "x0_um" || key == "y0_um") {
          if (!v) throw ParseError(origin, line_no, "numeric " + key);
          if (key == "x_step_um") xs = *v * 1e-6, have_x = true;
          if (key == "y_step_um") ys = *v * 1e-6, have_y = true;
          if (key == "x0_um") x0 = *v * 1e-6;
          if (key == "y0_um") y0 = *v * 1e-6;
        }
      }
      continue;
    }
    const auto cols = split(t, ',');
    if (nx == 0) nx = cols.size();
    if (cols.size() != nx) throw ParseError(origin, line_no, std::to_string(nx) + " values per row");
    for (const auto& c : cols) {
      const auto v = parse_double(c);
      if (!v || !std::isfinite(*v) || *v < 0.0) throw ParseError(origin, line_no, "finite non-negative values");
      values.push_back(*v);
    }
    ++ny;
  }
  if (!have_x || !have_y) throw ParseError(origin, 1, "header '# x_step_um=.. y_step_um=..'");
  if (ny == 0) throw ParseError(origin, line_no, "at least one row of values");
  if (!(xs > 0.0 && ys > 0.0)) throw ParseError(origin, 1, "positive step sizes");
  return ScanGrid(nx, ny, xs, ys, std::move(values), {x0, y0});
}

ScanGrid ScanGrid::load(const std::filesystem::path& path) { return parse(read_text_file(path, "scan CSV"), path.string()); }

std::string ScanGrid::to_text() const {
  std::string out = "# x_step_um=" + format_double(dx_ * 1e6) + " y_step_um=" + format_double(dy_ * 1e6);
  if (origin_.x != 0.0 || origin_.y != 0.0)
    out += " x0_um=" + format_double(origin_.x * 1e6) + " y0_um=" + format_double(origin_.y * 1e6);
  out += "\n";
  for (std::size_t iy = 0; iy < ny_; ++iy) {
    for (std::size_t ix = 0; ix < nx_; ++ix) {
      if (ix) out += ",";
      out += format_double(at(ix, iy));
    }
    out += "\n";
  }
  return out;
}

Point ScanGrid::pixel_center(std::size_t ix, std::size_t iy) const {
  return {origin_.x + static_cast<double>(ix) * dx_, origin_.y + static_cast<double>(iy) * dy_};
}

double ScanGrid::total() const { return kernels::active().sum(values_.data(), values_.size()); }

namespace {

kernels::RadialSums radial(const ScanGrid& g, Point c, double diameter_m) {
  if (!(diameter_m > 0.0)) throw InvalidArgument("diameter must be positive");
  const double r = 0.5 * diameter_m;
  const kernels::Table& kt = kernels::active();
  kernels::RadialSums acc;
  const double x0 = g.origin().x - c.x;
  for (std::size_t iy = 0; iy < g.ny(); ++iy) {
    const double dy = g.pixel_center(0, iy).y - c.y;
    kt.radial_row(g.row(iy), g.nx(), x0, g.x_step(), dy * dy, r * r, acc);
  }
  return acc;
}

struct RegionMoments {
  double mean;
  double variance;
};

RegionMoments region_moments(const ScanGrid& g, Point c, double diameter_m) {
  const kernels::RadialSums first = radial(g, c, diameter_m);
  if (first.inside_count < 5) throw InvalidArgument("fewer than 5 pixels inside the region");
  const double mean = first.inside_sum / static_cast<double>(first.inside_count);
  if (mean == 0.0) throw InvalidArgument("region mean is zero");
  // Second pass on mean-shifted rows keeps the variance free of cancellation.
  const double r = 0.5 * diameter_m;
  const kernels::Table& kt = kernels::active();
  kernels::RadialSums acc;
  std::vector<double> shifted(g.nx());
  const double x0 = g.origin().x - c.x;
  for (std::size_t iy = 0; iy < g.ny(); ++iy) {
    const double dy = g.pixel_center(0, iy).y - c.y;
    for (std::size_t ix = 0; ix < g.nx(); ++ix) shifted[ix] = g.at(ix, iy) - mean;
    kt.radial_row(shifted.data(), g.nx(), x0, g.x_step(), dy * dy, r * r, acc);
  }
  const double n = static_cast<double>(acc.inside_count);
  const double var = (acc.inside_sumsq - acc.inside_sum * acc.inside_sum / n) / (n - 1.0);
  return {mean, std::max(var, 0.0)};
}

}  // namespace

double fraction_outside_diameter(const ScanGrid& grid, Point center, double diameter_m) {
  const kernels::RadialSums acc = radial(grid, center, diameter_m);
  const double total = acc.inside_sum + acc.outside_sum;
  if (!(total > 0.0)) throw InvalidArgument("scan grid total is zero");
  if (acc.inside_count == 0) throw InvalidArgument("circle contains no pixel centers");
  return acc.outside_sum / total;
}

double region_std(const ScanGrid& grid, Point center, double diameter_m) {
  const RegionMoments m = region_moments(grid, center, diameter_m);
  return std::sqrt(m.variance) / m.mean;
}

double region_std_shot_corrected(const ScanGrid& grid, Point center, double diameter_m) {
  const RegionMoments m = region_moments(grid, center, diameter_m);
  return std::sqrt(std::max(m.variance - m.mean, 0.0)) / m.mean;
}

double center_slope(const ScanGrid& grid, Point center, double window_m) {
  if (!(window_m > 0.0)) throw InvalidArgument("slope window must be positive");
  const double h = 0.5 * window_m * (1.0 + 1e-12);
  std::vector<double> xs, ys, vs;
  for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const Point p = grid.pixel_center(ix, iy);
      if (std::fabs(p.x - center.x) <= h && std::fabs(p.y - center.y) <= h) {
        xs.push_back(p.x - center.x);
        ys.push_back(p.y - center.y);
        vs.push_back(grid.at(ix, iy));
      }
    }
  }
  auto distinct = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return static_cast<std::size_t>(std::unique(v.begin(), v.end()) - v.begin());
  };
  if (vs.size() < 9 || distinct(xs) < 3 || distinct(ys) < 3)
    throw InvalidArgument("slope window holds fewer than 3x3 pixels");

  const double n = static_cast<double>(vs.size());
  double mx = 0.0, my = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < vs.size(); ++i) mx += xs[i], my += ys[i], mv += vs[i];
  mx /= n, my /= n, mv /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0, sxv = 0.0, syv = 0.0;
  for (std::size_t i = 0; i < vs.size(); ++i) {
    const double x = xs[i] - mx, y = ys[i] - my, v = vs[i] - mv;
    sxx += x * x, syy += y * y, sxy += x * y, sxv += x * v, syv += y * v;
  }
  const double det = sxx * syy - sxy * sxy;
  if (!(det > 0.0)) throw InvalidArgument("degenerate slope window");
  if (mv == 0.0) throw InvalidArgument("slope window mean is zero");
  const double gx = (sxv * syy - syv * sxy) / det;
  const double gy = (syv * sxx - sxv * sxy) / det;
  return 100.0 * std::hypot(gx, gy) / mv * 1e-6;
}

double alignment_uncertainty(double slope_pct_per_um, double repeatability_m) {
  if (slope_pct_per_um < 0.0 || repeatability_m < 0.0) throw InvalidArgument("slope and repeatability must be non-negative");
  return slope_pct_per_um * repeatability_m * 1e6;
}

Point intensity_centroid(const ScanGrid& grid) {
  double s = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      const double v = grid.at(ix, iy);
      const Point p = grid.pixel_center(ix, iy);
      s += v, sx += v * p.x, sy += v * p.y;
    }
  }
  if (!(s > 0.0)) throw InvalidArgument("scan grid total is zero");
  return {sx / s, sy / s};
}

Point half_max_centroid(const ScanGrid& grid) {
  double vmax = 0.0;
  for (std::size_t iy = 0; iy < grid.ny(); ++iy)
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) vmax = std::max(vmax, grid.at(ix, iy));
  if (!(vmax > 0.0)) throw InvalidArgument("scan grid total is zero");
  double n = 0.0, sx = 0.0, sy = 0.0;
  for (std::size_t iy = 0; iy < grid.ny(); ++iy) {
    for (std::size_t ix = 0; ix < grid.nx(); ++ix) {
      if (grid.at(ix, iy) >= 0.5 * vmax) {
        const Point p = grid.pixel_center(ix, iy);
        n += 1.0, sx += p.x, sy += p.y;
      }
    }
  }
  return {sx / n, sy / n};
}

}  // namespace spdcal::beamscan
