#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spdcal/quantities.hpp"

namespace spdcal::timetag {

inline constexpr double kDefaultWindow = 1e-6;           // s
inline constexpr double kDefaultBaselineStart = 500e-9;  // s
inline constexpr double kDefaultThresholdFraction = 0.5;

/// Detection timestamps in integer ticks of `resolution` seconds.
///
/// File format, one value per line:
///   # resolution_ps=<decimal>
///   # duration_s=<decimal>
///   <tick>
///   ...
/// Ticks are unsigned decimals, strictly increasing.
class TimeTagStream {
public:
  TimeTagStream(std::vector<std::int64_t> ticks, double resolution_s, double duration_s);

  const std::vector<std::int64_t>& ticks() const { return ticks_; }
  double resolution() const { return resolution_; }
  double duration() const { return duration_; }
  std::size_t size() const { return ticks_.size(); }
  bool empty() const { return ticks_.empty(); }
  double mean_rate() const { return static_cast<double>(ticks_.size()) / duration_; }

  static TimeTagStream load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
  std::string to_text() const;
  static TimeTagStream parse(const std::string& text, const std::string& origin);

private:
  std::vector<std::int64_t> ticks_;
  double resolution_;
  double duration_;
};

/// Counts of delays t_j - t_i (j > i) binned from zero.
///
/// There are floor(window / bin_width) + 1 bins so that a delay equal to the
/// window is still counted; the last bin is therefore partial.
struct IntervalHistogram {
  double bin_width = 0.0;  // s
  double window = 0.0;     // s
  std::size_t n_events = 0;
  std::vector<std::uint64_t> counts;
  Warnings warnings;

  std::uint64_t total() const;
  /// Bins of full width (all but the last).
  std::size_t complete_bins() const { return counts.empty() ? 0 : counts.size() - 1; }
  double bin_start(std::size_t k) const { return static_cast<double>(k) * bin_width; }
};

IntervalHistogram interarrival_sum_histogram(const TimeTagStream& stream, double bin_width,
                                             double window = kDefaultWindow);

struct DeadTimeResult {
  std::optional<Uncertain> dead_time;  // empty: no dead time detectable
  std::size_t first_bin = 0;           // first bin above threshold
  double baseline = 0.0;               // mean counts per bin used for the threshold

  bool detected() const { return dead_time.has_value(); }
};

/// Dead time = start of the first bin exceeding threshold_fraction x baseline,
/// u = one bin width. Baseline is the mean of complete bins at or beyond
/// baseline_start (or the last half of complete bins if the window is shorter).
DeadTimeResult estimate_dead_time(const IntervalHistogram& hist,
                                  double threshold_fraction = kDefaultThresholdFraction,
                                  double baseline_start = kDefaultBaselineStart);

struct AfterpulseResult {
  Uncertain probability;           // excess counts / detected events
  double baseline = 0.0;           // mean counts per bin beyond baseline_start
  double excess_counts = 0.0;      // baseline-subtracted sum over [dead_time, baseline_start)
  double ratio_to_baseline = 0.0;  // excess_counts / baseline, diagnostic only
  std::size_t baseline_bins = 0;
};

/// Excess of delay counts over the flat baseline between the dead time and
/// `baseline_start`, per detected event. Negative bin excesses are kept so that
/// noise averages out. Throws if fewer than 10 baseline bins exist.
AfterpulseResult afterpulse_probability(const IntervalHistogram& hist, double baseline_start,
                                        double dead_time);

/// p(rate) = ap0 + ap * rate.
struct AfterpulseModel {
  Uncertain ap0;
  Uncertain ap;  // per (counts/s)
  double cov_ap0_ap = 0.0;
  double rate_min = 0.0;
  double rate_max = 0.0;
  double chi2 = 0.0;
  std::size_t dof = 0;

  double predict(double rate) const { return ap0.value() + ap.value() * rate; }
  double prediction_u(double rate) const;
  /// Half-width of the two-sided confidence band on the mean prediction.
  double confidence_half_width(double rate, double level = 0.95) const;
  bool covers(double rate) const { return rate >= rate_min && rate <= rate_max; }
};

struct AfterpulsePoint {
  double rate;  // counts/s
  Uncertain p;
};

/// Weighted (1/u^2) straight-line fit. Needs >= 3 points and >= 2 distinct rates.
AfterpulseModel fit_afterpulse_model(std::span<const AfterpulsePoint> points);

struct BlockingLoss {
  double incident_rate;    // r solving m = r / (1 + r tau)
  double exact_fraction;   // 1 / (1 + r tau)
  double linear_fraction;  // 1 - r tau
  double deviation;        // |exact - linear| / exact
};

/// Non-paralyzable blocking loss at detected rate m. Throws SaturationError if m*tau >= 1.
BlockingLoss blocking_loss_deviation(double detected_rate, double dead_time);

}  // namespace spdcal::timetag
