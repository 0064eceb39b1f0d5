#pragma once

#include <optional>

#include "spdcal/errors.hpp"

namespace spdcal {

/// CODATA 2018 (exact SI) constants.
inline constexpr double kPlanck = 6.62607015e-34;     // J s
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// A value with its standard uncertainty (k = 1). Units are contextual.
class Uncertain {
public:
  constexpr Uncertain() = default;
  Uncertain(double value, double u);

  static Uncertain exact(double value) { return Uncertain(value, 0.0); }
  /// `rel` is a fraction, not a percentage.
  static Uncertain from_relative(double value, double rel);

  double value() const { return value_; }
  double u() const { return u_; }

  /// u / |value|. Throws InvalidArgument when value == 0.
  double relative() const;

private:
  double value_ = 0.0;
  double u_ = 0.0;
};

/// Two quantities with their covariance. |cov| <= a.u * b.u is enforced.
struct CorrelatedPair {
  CorrelatedPair(Uncertain a, Uncertain b, double cov);

  Uncertain a;
  Uncertain b;
  double cov;

  double correlation() const;
};

/// Wavelength-reading correction term  scale * b_lambda * delta_lambda.
///
/// b_lambda is in nm^-1 and delta_lambda_osa in nm, so the correction carries
/// the unit of `scale`. Propagation follows the meter-calibration convention:
/// only the scale and b_lambda uncertainties contribute, delta_lambda is held
/// constant (its uncertainty enters through the source wavelength instead).
struct WavelengthCorrection {
  Uncertain b_lambda;
  Uncertain delta_lambda_osa;
  Uncertain scale;

  double value() const;
  double u() const;
  Uncertain as_uncertain() const { return Uncertain(value(), u()); }
};

/// Photon flux (photons/s) carried by optical power `power_w` at `wavelength_m`.
double photon_flux(double power_w, double wavelength_m);

/// Normal-incidence Fresnel transmittance 1 - ((n-1)/(n+1))^2 of an uncoated
/// fiber end. The uncertainty is a configured constant, not propagated from n.
Uncertain fiber_end_transmittance(double n_eff, double u_eta);

struct ExpandedInterval {
  double lo;
  double hi;
  double k;
  double value;

  double half_width() const { return 0.5 * (hi - lo); }
  /// 100 * k * u / value (%). Throws when value == 0.
  double relative_percent() const;
};

ExpandedInterval expand(const Uncertain& x, double k);

/// A result plus anything the caller should be told about it.
struct Estimate {
  Uncertain value;
  Warnings warnings;

  double relative() const { return value.relative(); }
};

}  // namespace spdcal
