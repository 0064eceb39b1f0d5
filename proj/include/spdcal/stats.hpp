#pragma once

#include <span>

namespace spdcal::stats {

double normal_cdf(double z);
/// Inverse of normal_cdf for p in (0, 1).
double normal_quantile(double p);

/// Kernel-backed reductions over the active ISA table.
double mean(std::span<const double> x);
/// Unbiased (n - 1) sample variance; 0 for fewer than two values.
double sample_variance(std::span<const double> x);

/// Two-parameter straight-line least squares y = a + b x.
///
/// With weights (w_i = 1/u_i^2) the covariance is (X^T W X)^-1; unweighted
/// fits scale (X^T X)^-1 by the residual variance SSR/(n-2). Abscissae are
/// centered internally for conditioning.
struct LineFit {
  double intercept = 0.0;
  double slope = 0.0;
  double var_intercept = 0.0;
  double var_slope = 0.0;
  double cov = 0.0;
  double ssr = 0.0;  // weighted sum of squared residuals (chi^2 for weighted fits)
  std::size_t n = 0;
  double x_center = 0.0;    // weighted mean abscissa
  double var_center = 0.0;  // variance of the prediction at x_center

  double predict(double x) const { return intercept + slope * x; }
  /// Variance of the mean-response prediction at x, evaluated in centered form.
  double prediction_variance(double x) const {
    const double dx = x - x_center;
    return var_center + dx * dx * var_slope;
  }
};

/// Throws SingularFitError when fewer than two distinct x values are present.
LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> weights = {});

}  // namespace spdcal::stats
