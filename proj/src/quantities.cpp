#include "spdcal/quantities.hpp"

#include <cmath>
#include <string>

namespace spdcal {

Uncertain::Uncertain(double value, double u) : value_(value), u_(u) {
  if (!std::isfinite(value) || !std::isfinite(u)) {
    throw InvalidArgument("Uncertain: value and uncertainty must be finite");
  }
  if (u < 0.0) {
    throw InvalidArgument("Uncertain: negative standard uncertainty " + std::to_string(u));
  }
}

Uncertain Uncertain::from_relative(double value, double rel) {
  return Uncertain(value, std::abs(value) * rel);
}

double Uncertain::relative() const {
  if (value_ == 0.0) {
    throw InvalidArgument("relative uncertainty undefined at value 0");
  }
  return u_ / std::abs(value_);
}

CorrelatedPair::CorrelatedPair(Uncertain a_, Uncertain b_, double cov_) : a(a_), b(b_), cov(cov_) {
  // Small slack for covariances computed in floating point from a correlation of exactly 1.
  const double bound = a.u() * b.u();
  if (std::abs(cov) > bound * (1.0 + 1e-12)) {
    throw InvalidArgument("CorrelatedPair: |cov| exceeds u(a) * u(b)");
  }
}

double CorrelatedPair::correlation() const {
  const double denom = a.u() * b.u();
  return denom == 0.0 ? 0.0 : cov / denom;
}

double WavelengthCorrection::value() const {
  return scale.value() * b_lambda.value() * delta_lambda_osa.value();
}

double WavelengthCorrection::u() const {
  // Equivalent to |corr| * sqrt((u_s/s)^2 + (u_b/b)^2) without dividing by zero.
  const double d = std::abs(delta_lambda_osa.value());
  return d * std::hypot(scale.u() * b_lambda.value(), scale.value() * b_lambda.u());
}

double photon_flux(double power_w, double wavelength_m) {
  if (!(wavelength_m > 0.0)) {
    throw InvalidArgument("photon_flux: wavelength must be positive");
  }
  if (power_w < 0.0) {
    throw InvalidArgument("photon_flux: power must be non-negative");
  }
  return power_w * wavelength_m / (kPlanck * kSpeedOfLight);
}

Uncertain fiber_end_transmittance(double n_eff, double u_eta) {
  if (!(n_eff >= 1.0)) {
    throw InvalidArgument("fiber_end_transmittance: n_eff must be >= 1");
  }
  const double r = (n_eff - 1.0) / (n_eff + 1.0);
  return Uncertain(1.0 - r * r, u_eta);
}

double ExpandedInterval::relative_percent() const {
  if (value == 0.0) {
    throw InvalidArgument("relative expanded uncertainty undefined at value 0");
  }
  return 100.0 * half_width() / std::abs(value);
}

ExpandedInterval expand(const Uncertain& x, double k) {
  if (!(k > 0.0)) {
    throw InvalidArgument("expand: coverage factor must be positive");
  }
  return {x.value() - k * x.u(), x.value() + k * x.u(), k, x.value()};
}

}  // namespace spdcal
