#pragma once

// Simulated calibration campaigns and the analysis pipeline that turns a
// campaign's raw records (counts, meter logs, time tags) into DE versus rate.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spdcal/calibration.hpp"
#include "spdcal/debudget.hpp"
#include "spdcal/ratecurve.hpp"
#include "spdcal/timetag.hpp"

namespace spdcal::campaign {

enum class Mode { fiber, free_space };

Mode parse_mode(const std::string& text);
std::string mode_name(Mode mode);

/// Generator settings. File keys are the field names; `calibration` is a path
/// relative to the scenario file.
struct Scenario {
  Mode mode = Mode::fiber;
  CalibrationConstants cal;  // nominal constants; realized values are drawn from them
  double de_true = 0.556;
  double dead_time_s = 52e-9;
  double afterpulse_ap0 = 0.002;
  double afterpulse_ap = 1e-9;  // per counts/s
  double afterpulse_tau_s = 20e-9;
  double dark_rate = 100.0;
  std::vector<double> settings_cps;
  std::size_t repeats = 3;
  std::size_t n_intervals = 25;
  std::size_t n_dark_intervals = 25;
  double gate_s = 1.0;
  std::size_t monitor_readings = 25;
  std::size_t ratio_readings = 25;
  double meter_white_rel = 1e-3;  // per reading
  double ratio_nominal = 1e-5;    // output-to-monitor ratio
  double ratio_monitor_power_w = 1e-5;
  std::vector<double> afterpulse_cal_rates;
  std::size_t afterpulse_cal_events = 200000;
  bool noiseless = false;
  double bistable_dark_rate = 0.0;    // dark rate of the upper state
  double bistable_probability = 0.0;  // chance a bright measurement sees the upper state
  std::vector<double> targets = {1.0, 1e5};

  static Scenario from_keyvalue(const KeyValueFile& kv);
  static Scenario load(const std::filesystem::path& path);
};

struct Measurement {
  std::string id;
  std::string setting_id;
  debudget::CountObservation counts;
  std::vector<double> monitor_bright;  // W
  std::vector<double> monitor_dark;
  bool dark_anomaly = false;  // generator bookkeeping, not used by the analysis
};

/// Everything the analysis consumes, plus the generator's truth.
struct CampaignData {
  Mode mode = Mode::fiber;
  CalibrationConstants cal;
  std::vector<Measurement> measurements;
  std::vector<double> ratio_output_bright;  // PM watts, or trap volts in free space
  std::vector<double> ratio_output_dark;
  std::vector<double> ratio_monitor_bright;
  std::vector<double> ratio_monitor_dark;
  std::vector<timetag::TimeTagStream> afterpulse_streams;
  std::optional<timetag::AfterpulseModel> afterpulse_model;  // given directly instead of streams
  std::vector<double> targets;

  double de_true = 0.0;
  double dead_time_s = 0.0;
  std::uint64_t seed = 0;

  /// Operational DE at detected rate r: de_true (1 - r tau).
  double truth_at(double rate) const { return de_true * (1.0 - rate * dead_time_s); }
};

CampaignData simulate_campaign(const Scenario& scenario, std::uint64_t seed);

struct AnalysisOptions {
  bool weighted_fit = false;
  double bin_width_s = 156.25e-12;
  double window_s = timetag::kDefaultWindow;
  double baseline_start_s = timetag::kDefaultBaselineStart;
  double threshold_fraction = timetag::kDefaultThresholdFraction;
  double outlier_threshold = 3.0;
  std::vector<double> targets;  // empty: the campaign's own targets
};

struct AfterpulseCalibration {
  std::vector<timetag::AfterpulsePoint> points;
  std::vector<std::optional<Uncertain>> dead_times;
  timetag::AfterpulseModel model;
  Warnings warnings;
};

/// Histogram, dead time and afterpulse probability per stream, then the linear fit.
AfterpulseCalibration calibrate_afterpulse(std::span<const timetag::TimeTagStream> streams,
                                           const AnalysisOptions& options);

struct CampaignAnalysis {
  AfterpulseCalibration afterpulse;
  std::vector<debudget::Budget> budgets;  // one per measurement
  std::vector<ratecurve::RatePoint> points;
  ratecurve::RateCurveFit fit;
  std::vector<ratecurve::RateEstimate> estimates;
  std::vector<std::size_t> outliers;
  Warnings warnings;
};

CampaignAnalysis analyze_campaign(const CampaignData& data, const AnalysisOptions& options = {});

/// Budget of one measurement given the afterpulse model.
debudget::Budget measurement_budget(const CampaignData& data, const Measurement& m,
                                    const timetag::AfterpulseModel& afterpulse);

/// Writes scenario.cfg and the files it lists into `dir`. Returns the scenario path.
std::filesystem::path save_campaign(const CampaignData& data, const std::filesystem::path& dir);
/// Reads a scenario.cfg written by save_campaign (or assembled by hand).
CampaignData load_campaign(const std::filesystem::path& scenario_file);
/// Files a saved scenario refers to, scenario file first.
std::vector<std::filesystem::path> campaign_files(const std::filesystem::path& scenario_file);

/// Representative observations for a calibration configuration: 1e5 counts/s
/// over 25 one-second gates and low-scatter meter logs. Used for budget tables
/// and the Monte-Carlo cross-check.
debudget::FiberBudgetInputs reference_fiber_inputs(const CalibrationConstants& cal);
debudget::FreeSpaceBudgetInputs reference_freespace_inputs(const CalibrationConstants& cal);

}  // namespace spdcal::campaign
