#include "spdcal/calibration.hpp"

#include <cmath>
#include <sstream>

namespace spdcal {
namespace {

std::string uncertain_text(const Uncertain& x) {
  return format_double(x.value()) + " " + format_double(x.u());
}

}  // namespace

Uncertain CalibrationConstants::b_lambda_for(const std::string& meter) const {
  const auto it = b_lambda.find(meter);
  if (it != b_lambda.end()) {
    for (const auto& [wl, b] : it->second) {
      if (std::abs(wl - wavelength_nm) <= 0.5) return b;
    }
  }
  throw InvalidArgument("no b_lambda for meter '" + meter + "' at " + format_double(wavelength_nm) + " nm");
}

Uncertain CalibrationConstants::cal_nl_for(const std::string& meter, const std::string& range) const {
  const auto it = cal_nl.find(meter + "@" + range);
  if (it == cal_nl.end()) {
    throw InvalidArgument("no nonlinearity correction for " + meter + "@" + range);
  }
  return it->second;
}

Uncertain CalibrationConstants::cal_abs() const {
  if (!cal_abs_pm) throw InvalidArgument("calibration constants lack cal_abs.pm");
  return *cal_abs_pm;
}

Uncertain CalibrationConstants::trap_responsivity() const {
  if (!responsivity_cal) throw InvalidArgument("calibration constants lack responsivity_cal.sitrap");
  return *responsivity_cal;
}

Uncertain CalibrationConstants::trap_gain() const {
  if (!gain) throw InvalidArgument("calibration constants lack gain.sitrap");
  return *gain;
}

CalibrationConstants CalibrationConstants::from_keyvalue(const KeyValueFile& kv) {
  CalibrationConstants c;
  c.source = kv.origin();
  c.version = kv.get_string("version");
  c.wavelength_nm = kv.get_double("wavelength_nm");
  c.delta_lambda_osa_nm = kv.get_double("delta_lambda_osa_nm", 0.0);
  c.u_osa_m = kv.get_double("u_osa_m", 0.0);
  c.u_eta_f = kv.get_double("u_eta_f", 0.0);
  if (kv.contains("n_eff")) c.n_eff = kv.get_double("n_eff");

  for (const auto& key : kv.keys_with_prefix("b_lambda.")) {
    const std::string rest = key.substr(9);
    const auto at = rest.find('@');
    if (at == std::string::npos) kv.fail(key, "key form b_lambda.<meter>@<wavelength_nm>");
    const auto wl = parse_double(rest.substr(at + 1));
    if (!wl) kv.fail(key, "a numeric wavelength after '@'");
    c.b_lambda[rest.substr(0, at)][*wl] = kv.get_uncertain(key);
  }
  for (const auto& key : kv.keys_with_prefix("cal_nl.")) {
    const std::string rest = key.substr(7);
    if (rest.find('@') == std::string::npos) kv.fail(key, "key form cal_nl.<meter>@<range>");
    c.cal_nl[rest] = kv.get_uncertain(key);
  }
  c.cal_abs_pm = kv.find_uncertain("cal_abs.pm");
  c.responsivity_cal = kv.find_uncertain("responsivity_cal.sitrap");
  c.gain = kv.find_uncertain("gain.sitrap");
  if (kv.contains("voltmeter_cal_rel")) c.voltmeter_cal_rel = kv.get_relative("voltmeter_cal_rel");
  if (kv.contains("stab_rel")) c.stab_rel = kv.get_relative("stab_rel");
  if (kv.contains("variability.reflect_rel")) c.reflect_rel = kv.get_relative("variability.reflect_rel");
  if (kv.contains("variability.collect_rel")) c.collect_rel = kv.get_relative("variability.collect_rel");
  if (kv.contains("variability.align_rel")) c.align_rel = kv.get_relative("variability.align_rel");
  return c;
}

CalibrationConstants CalibrationConstants::load(const std::filesystem::path& path) {
  return from_keyvalue(KeyValueFile::load(path));
}

std::string CalibrationConstants::to_text() const {
  std::ostringstream out;
  out << "# calibration constants, uncertainties k=1\n";
  out << "version = " << version << "\n";
  out << "wavelength_nm = " << format_double(wavelength_nm) << "\n";
  out << "delta_lambda_osa_nm = " << format_double(delta_lambda_osa_nm) << "\n";
  out << "u_osa_m = " << format_double(u_osa_m) << "\n";
  out << "u_eta_f = " << format_double(u_eta_f) << "\n";
  if (n_eff) out << "n_eff = " << format_double(*n_eff) << "\n";
  for (const auto& [meter, by_wl] : b_lambda) {
    for (const auto& [wl, b] : by_wl) {
      out << "b_lambda." << meter << "@" << format_double(wl) << " = " << uncertain_text(b) << "\n";
    }
  }
  for (const auto& [key, v] : cal_nl) out << "cal_nl." << key << " = " << uncertain_text(v) << "\n";
  if (cal_abs_pm) out << "cal_abs.pm = " << uncertain_text(*cal_abs_pm) << "\n";
  if (responsivity_cal) out << "responsivity_cal.sitrap = " << uncertain_text(*responsivity_cal) << "\n";
  if (gain) out << "gain.sitrap = " << uncertain_text(*gain) << "\n";
  out << "voltmeter_cal_rel = " << format_double(voltmeter_cal_rel) << "\n";
  out << "stab_rel = " << format_double(stab_rel) << "\n";
  out << "variability.reflect_rel = " << format_double(reflect_rel) << "\n";
  out << "variability.collect_rel = " << format_double(collect_rel) << "\n";
  out << "variability.align_rel = " << format_double(align_rel) << "\n";
  return out.str();
}

}  // namespace spdcal
