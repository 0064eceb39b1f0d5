#pragma once

// Detection-efficiency measurement equations and their GUM uncertainty
// propagation, for fiber-coupled (power meter) and free-space (trap detector)
// substitution setups. Covariances the setup is known to have but does not
// characterize default to zero, which can only overstate the result.

#include <optional>
#include <string>
#include <vector>

#include "spdcal/quantities.hpp"
#include "spdcal/timetag.hpp"

namespace spdcal::debudget {

/// Mean bright and dark counts per gate interval with shot-noise uncertainties.
struct CountObservation {
  double c_bar = 0.0;
  double c_dark = 0.0;
  std::size_t n_intervals = 1;
  std::size_t n_dark_intervals = 1;
  double gate_s = 1.0;
  double u_c = 0.0;
  double u_dark = 0.0;

  /// Fills u_c = sqrt(c_bar / n) and u_dark = sqrt(c_dark / n_dark).
  static CountObservation from_counts(double c_bar, std::size_t n, double c_dark, std::size_t n_dark,
                                      double gate_s = 1.0);

  double rate() const { return c_bar / gate_s; }
};

/// Afterpulse- and dark-corrected counts per gate:
///   (1 - ap0) C - C_dark - ap' C^2,   ap' = ap / gate_s.
Estimate corrected_counts(const CountObservation& obs, const timetag::AfterpulseModel& model);

/// Wavelength correction inputs of one meter. Without `scale`, the meter's own
/// mean bright-minus-dark reading (or the trap's R_cal) is used.
struct OsaInput {
  Uncertain b_lambda;          // nm^-1
  Uncertain delta_lambda_osa;  // nm
  std::optional<Uncertain> scale;
};

struct PowerObservation {
  std::vector<double> bright;  // W
  std::vector<double> dark;    // W
  Uncertain cal_nl = Uncertain::exact(1.0);
  std::optional<OsaInput> osa;
};

/// n^-1 sum (bright_i - mean(dark)) + OSA correction, with u^2 = s^2/n + u^2(OSA).
struct AveragedDifference {
  Uncertain readings;  // mean difference, u = s / sqrt(n)
  Uncertain osa;       // wavelength correction term
  Uncertain total;
  bool default_scale = false;
  Warnings warnings;
};

AveragedDifference averaged_difference(const PowerObservation& obs);

/// Calibrated monitor power: averaged difference / cal_nl.
Estimate monitor_power(const PowerObservation& obs);

/// X / Y + stab with u from the two-variable quotient rule and an optional cov(X, Y).
Uncertain output_to_monitor_ratio(const Uncertain& x, const Uncertain& y, const Uncertain& stab, double cov_xy = 0.0);

struct RatioFiberInputs {
  PowerObservation output;   // calibrated PM during the ratio measurement (cal_nl = PM range)
  Uncertain cal_abs = Uncertain::exact(1.0);
  PowerObservation monitor;  // PM_mon during the ratio measurement
  Uncertain stab = Uncertain::exact(0.0);
  double cov_xy = 0.0;
};

struct RatioResult {
  Uncertain numerator;  // X (fiber) or W (free space)
  Uncertain y;
  Uncertain ratio;
  Warnings warnings;
};

RatioResult ratio_fiber(const RatioFiberInputs& in);

/// Converts a relative stability uncertainty into the additive stab term (value 0).
Uncertain stability_term(double relative_u, double nominal_ratio);

struct FiberDeInputs {
  Uncertain count_rate;     // corrected counts per second
  Uncertain monitor_power;  // W
  Uncertain wavelength_m;
  std::optional<Uncertain> eta_f;  // absent: no fiber-to-fiber junction, term dropped
  Uncertain ratio;
  double cov_c_pm = 0.0;  // covariance of count_rate and monitor_power
};

/// DE = C / PM * h c / (lambda * eta_f) / R. Values outside (0, 1.5) only warn.
Estimate de_fiber(const FiberDeInputs& in);

struct TrapObservation {
  std::vector<double> v_bright;  // V
  std::vector<double> v_dark;    // V
  Uncertain v_cal = Uncertain::exact(0.0);  // voltmeter correction, added to each mean
  Uncertain responsivity_cal;               // A/W
  std::optional<OsaInput> responsivity_osa;
  Uncertain gain;  // V/A
};

struct TrapPower {
  Uncertain v_bright;
  Uncertain v_dark;
  Uncertain responsivity;
  Uncertain w;  // W
  bool default_scale = false;
  Warnings warnings;
};

/// W = (V - V_dark) / (R g) with u^2(V) = s^2/n + u^2(v_cal) for both bright and dark.
TrapPower trap_power(const TrapObservation& trap);

RatioResult ratio_freespace(const TrapObservation& trap, const PowerObservation& monitor, const Uncertain& stab,
                            double cov_wy = 0.0);

struct FreeSpaceDeInputs {
  Uncertain count_rate;
  Uncertain monitor_power;
  Uncertain wavelength_m;
  Uncertain ratio;
  double cov_c_pm = 0.0;
};

/// Relative standard uncertainties (fractions) of the zero-mean additive
/// reflection, collection and alignment terms.
struct FreeSpaceVariability {
  double reflect_rel = 0.0;
  double collect_rel = 0.0;
  double align_rel = 0.0;
};

Estimate de_free(const FreeSpaceDeInputs& in);
Estimate de_freespace(const FreeSpaceDeInputs& in, const FreeSpaceVariability& variability);

// ---------------------------------------------------------------------------
// Whole-chain budgets from raw observations.

struct BudgetLine {
  std::string component;
  char type = 'B';            // GUM evaluation type
  double relative_u = 0.0;    // relative standard uncertainty contributed to DE
  double variance = 0.0;      // signed relative variance (negative for covariance lines)
  double variance_share = 0.0;
};

struct Budget {
  Estimate de;
  Uncertain corrected_counts;  // per gate
  Uncertain count_rate;        // per second
  Uncertain monitor_power;
  Uncertain ratio;
  std::vector<BudgetLine> lines;
  Warnings warnings;
};

struct FiberBudgetInputs {
  CountObservation counts;
  timetag::AfterpulseModel afterpulse;
  PowerObservation monitor;  // PM_mon during the DUT measurement
  RatioFiberInputs ratio;
  Uncertain wavelength_m;
  std::optional<Uncertain> eta_f;
  double cov_c_pm = 0.0;  // cov(corrected counts per gate, monitor power)
};

struct FreeSpaceBudgetInputs {
  CountObservation counts;
  timetag::AfterpulseModel afterpulse;
  PowerObservation monitor;
  TrapObservation trap;
  PowerObservation ratio_monitor;  // PM_mon during the trap ratio measurement
  Uncertain stab = Uncertain::exact(0.0);
  Uncertain wavelength_m;
  FreeSpaceVariability variability;
  double cov_c_pm = 0.0;
  double cov_wy = 0.0;
};

Budget fiber_budget(const FiberBudgetInputs& in);
Budget freespace_budget(const FreeSpaceBudgetInputs& in);

}  // namespace spdcal::debudget
