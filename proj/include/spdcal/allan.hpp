#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spdcal/quantities.hpp"

namespace spdcal::allan {

/// Uniformly sampled readings (watts, or a unitless ratio).
struct SampledSeries {
  SampledSeries(std::vector<double> values, double sample_interval);

  std::vector<double> values;
  double sample_interval;

  std::size_t size() const { return values.size(); }
  double mean() const;
};

enum class Estimator { overlapping, non_overlapping };

/// Allan deviation of the readings themselves (not of their first differences)
/// at tau = m * sample_interval. The overlapping form averages over all
/// N - 2m + 1 start positions and needs N >= 2m + 1 samples.
double allan_deviation(const SampledSeries& series, double tau, Estimator estimator = Estimator::overlapping);

/// Largest tau accepted by allan_deviation for this series.
double max_tau(const SampledSeries& series, Estimator estimator = Estimator::overlapping);

struct RelativePoint {
  double tau;
  double percent;  // 100 * sigma(tau) / mean
};

std::vector<RelativePoint> relative_allan(const SampledSeries& series, std::span<const double> taus,
                                          Estimator estimator = Estimator::overlapping);

/// Octave taus 1, 2, 4, ... x sample_interval up to max_tau.
std::vector<double> octave_taus(const SampledSeries& series, Estimator estimator = Estimator::overlapping);

/// Elementwise a / b.
SampledSeries ratio_series(const SampledSeries& a, const SampledSeries& b);

/// One row of a power-meter log: `t_s, reading_W, range_id, dark(0|1)`.
struct PowerReading {
  double t_s;
  double reading_w;
  std::string range_id;
  bool dark;
};

std::vector<PowerReading> load_power_csv(const std::filesystem::path& path);
std::vector<PowerReading> parse_power_csv(const std::string& text, const std::string& origin);
std::string power_csv_text(std::span<const PowerReading> rows);

/// Bright rows only, with the sample interval inferred from timestamps (must be uniform to 1 %).
SampledSeries bright_series(std::span<const PowerReading> rows);

}  // namespace spdcal::allan
