#pragma once

// Statistics over 2-D pinhole / detector scan grids. Pixels are classified
// in or out of a region by the distance of their centers.

#include <filesystem>
#include <string>
#include <vector>

namespace spdcal::beamscan {

struct Point {
  double x = 0.0;  // m
  double y = 0.0;  // m
};

class ScanGrid {
public:
  /// values are row-major with `nx` values per row; all finite and >= 0.
  ScanGrid(std::size_t nx, std::size_t ny, double x_step_m, double y_step_m, std::vector<double> values,
           Point origin = {});

  /// Header `# x_step_um=.. y_step_um=..` (optional x0_um, y0_um), then comma-separated rows.
  static ScanGrid parse(const std::string& text, const std::string& origin = "<memory>");
  static ScanGrid load(const std::filesystem::path& path);
  std::string to_text() const;

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  double x_step() const { return dx_; }
  double y_step() const { return dy_; }
  Point origin() const { return origin_; }
  double at(std::size_t ix, std::size_t iy) const { return values_[iy * nx_ + ix]; }
  const double* row(std::size_t iy) const { return values_.data() + iy * nx_; }
  Point pixel_center(std::size_t ix, std::size_t iy) const;
  double total() const;

private:
  std::size_t nx_, ny_;
  double dx_, dy_;
  std::vector<double> values_;
  Point origin_;
};

/// Share of the total signal at pixels farther than d/2 from `center`.
double fraction_outside_diameter(const ScanGrid& grid, Point center, double diameter_m);

/// Sample standard deviation over mean of pixels within d/2 of `center`.
double region_std(const ScanGrid& grid, Point center, double diameter_m);

/// As region_std with the Poisson variance (mean, for values in counts) removed.
double region_std_shot_corrected(const ScanGrid& grid, Point center, double diameter_m);

/// Gradient norm of the least-squares plane over a square window of side
/// `window_m`, relative to the window mean, in %/um.
double center_slope(const ScanGrid& grid, Point center, double window_m);

/// slope (%/um) times positioning repeatability, in %.
double alignment_uncertainty(double slope_pct_per_um, double repeatability_m);

Point intensity_centroid(const ScanGrid& grid);
/// Unweighted centroid of the pixels at or above half the grid maximum.
Point half_max_centroid(const ScanGrid& grid);

}  // namespace spdcal::beamscan
