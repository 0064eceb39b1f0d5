#include "spdcal/stats.hpp"

#include <cmath>
#include <numbers>

#include "spdcal/errors.hpp"
#include "spdcal/kernels.hpp"

namespace spdcal::stats {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("normal_quantile: p must lie in (0, 1)");
  // Acklam's rational approximation, then two Newton steps on erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    const double e = normal_cdf(x) - p;
    const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
    x -= e / pdf;
  }
  return x;
}

double mean(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("mean of empty set");
  return kernels::active().sum(x.data(), x.size()) / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  return kernels::active().sum_sq_dev(x.data(), x.size(), m) / static_cast<double>(x.size() - 1);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y, std::span<const double> weights) {
  const std::size_t n = x.size();
  if (y.size() != n || (!weights.empty() && weights.size() != n)) {
    throw InvalidArgument("fit_line: mismatched input lengths");
  }
  const bool weighted = !weights.empty();
  auto w = [&](std::size_t i) { return weighted ? weights[i] : 1.0; };

  double sw = 0.0, swx = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(w(i) > 0.0) || !std::isfinite(w(i))) throw InvalidArgument("fit_line: weights must be positive");
    sw += w(i);
    swx += w(i) * x[i];
    swy += w(i) * y[i];
  }
  if (n < 2) throw SingularFitError("fit_line: need at least two points");
  const double xbar = swx / sw;
  const double ybar = swy / sw;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - xbar;
    sxx += w(i) * dx * dx;
    sxy += w(i) * dx * (y[i] - ybar);
  }
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(x[i] - xbar));
  if (!(sxx > 0.0) || sxx <= 1e-24 * sw * scale * scale) {
    throw SingularFitError("fit_line: abscissae are all equal (singular design)");
  }

  LineFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = ybar - f.slope * xbar;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - f.predict(x[i]);
    f.ssr += w(i) * r * r;
  }
  // Covariance of (ybar, slope) is diagonal in centered coordinates.
  double sigma2 = 1.0;
  if (!weighted) sigma2 = n > 2 ? f.ssr / static_cast<double>(n - 2) : 0.0;
  const double var_ybar = sigma2 / sw;
  f.var_slope = sigma2 / sxx;
  f.var_intercept = var_ybar + xbar * xbar * f.var_slope;
  f.cov = -xbar * f.var_slope;
  f.x_center = xbar;
  f.var_center = var_ybar;
  return f;
}

}  // namespace spdcal::stats
