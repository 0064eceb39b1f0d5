#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "spdcal/keyvalue.hpp"
#include "spdcal/quantities.hpp"

namespace spdcal {

/// Calibration constants for one wavelength setup. All uncertainties are k = 1.
///
/// File keys (see data/calibration/*.cfg):
///   version, wavelength_nm, delta_lambda_osa_nm, u_osa_m, u_eta_f, n_eff,
///   b_lambda.<meter>@<nm>, cal_nl.<meter>@<range>, cal_abs.pm,
///   responsivity_cal.sitrap, gain.sitrap, voltmeter_cal_rel, stab_rel,
///   variability.{reflect,collect,align}_rel
struct CalibrationConstants {
  std::string version;
  std::string source;  // file the constants came from, if any
  double wavelength_nm = 0.0;
  double delta_lambda_osa_nm = 0.0;
  double u_osa_m = 0.0;
  double u_eta_f = 0.0;
  std::optional<double> n_eff;

  std::map<std::string, std::map<double, Uncertain>> b_lambda;  // meter -> wavelength -> b
  std::map<std::string, Uncertain> cal_nl;                       // "meter@range"
  std::optional<Uncertain> cal_abs_pm;
  std::optional<Uncertain> responsivity_cal;  // A/W
  std::optional<Uncertain> gain;              // V/A
  double voltmeter_cal_rel = 0.0;
  double stab_rel = 0.0;

  double reflect_rel = 0.0;
  double collect_rel = 0.0;
  double align_rel = 0.0;

  /// b_lambda for `meter` at the configured wavelength (matched within 0.5 nm).
  Uncertain b_lambda_for(const std::string& meter) const;
  Uncertain cal_nl_for(const std::string& meter, const std::string& range) const;
  Uncertain cal_abs() const;
  Uncertain trap_responsivity() const;
  Uncertain trap_gain() const;

  static CalibrationConstants from_keyvalue(const KeyValueFile& kv);
  static CalibrationConstants load(const std::filesystem::path& path);
  std::string to_text() const;
};

}  // namespace spdcal
