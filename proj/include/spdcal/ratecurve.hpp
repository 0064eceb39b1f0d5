#pragma once

// DE versus detected count rate: per-setting aggregation, straight-line fit,
// and evaluation at a reference rate.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spdcal/quantities.hpp"

namespace spdcal::ratecurve {

struct RatePoint {
  std::string setting_id;
  double rate = 0.0;  // detected counts/s
  Uncertain de;
};

/// CSV columns: setting_id, rate_cps, de, u_de. A header row is optional.
std::vector<RatePoint> parse_rate_csv(const std::string& text, const std::string& origin = "<memory>");
std::vector<RatePoint> load_rate_csv(const std::filesystem::path& path);
std::string rate_csv_text(std::span<const RatePoint> points);

struct SettingMean {
  std::string setting_id;
  double rate = 0.0;
  double de = 0.0;
  std::size_t n = 0;
};

/// Arithmetic means per setting, in order of first appearance.
std::vector<SettingMean> aggregate_by_setting(std::span<const RatePoint> points);

struct RateCurveFit {
  Uncertain intercept;
  Uncertain slope;  // per counts/s
  double cov = 0.0;
  std::size_t n_points = 0;
  bool weighted = false;
  double rate_min = 0.0;
  double rate_max = 0.0;
  double x_center = 0.0;
  double var_center = 0.0;

  double predict(double rate) const { return intercept.value() + slope.value() * rate; }
  /// Standard uncertainty of the mean response at `rate`.
  double prediction_u(double rate) const;
};

/// Least squares DE = a + b rate. Unweighted unless `weighted` (1/u^2).
RateCurveFit fit_rate_curve(std::span<const RatePoint> points, bool weighted = false);

struct RateEstimate {
  Estimate de;
  double target_rate = 0.0;
  double mean_point_u = 0.0;  // arithmetic mean of the per-point u's
  double prediction_u = 0.0;
};

/// u^2 = (mean per-point u)^2 + (prediction u)^2. Targets above 10x the highest
/// fitted rate are flagged.
RateEstimate de_at_rate(const RateCurveFit& fit, std::span<const RatePoint> points, double target_rate);

/// Indices of points whose residual exceeds `threshold` times their own u,
/// found by repeatedly dropping the worst point and refitting.
std::vector<std::size_t> flag_outliers(const RateCurveFit& fit, std::span<const RatePoint> points,
                                       double threshold = 3.0);

/// Points with rate <= cutoff.
std::vector<RatePoint> below_rate(std::span<const RatePoint> points, double cutoff);

/// Plot data: raw points (rate, de, u) and per-setting means (rate, de).
std::string points_plot_csv(std::span<const RatePoint> points);
std::string means_plot_csv(std::span<const SettingMean> means);

}  // namespace spdcal::ratecurve
