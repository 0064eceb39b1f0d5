#include <cmath>

#include "spdcal/kernels.hpp"

namespace spdcal::kernels::scalar {
namespace {

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    s += d * d;
  }
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double allan_sumsq(const double* p, std::size_t n_terms, std::size_t m) {
  double s = 0.0;
  for (std::size_t i = 0; i < n_terms; ++i) {
    const double d = p[i + 2 * m] - 2.0 * p[i + m] + p[i];
    s += d * d;
  }
  return s;
}

void delay_histogram(const std::int64_t* t, std::size_t n, std::int64_t window, double bin_ticks,
                     std::uint64_t* counts, std::size_t n_bins) {
  std::size_t end = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (end < i + 1) end = i + 1;
    while (end < n && t[end] - t[i] <= window) ++end;
    for (std::size_t j = i + 1; j < end; ++j) {
      const auto bin = static_cast<std::size_t>(std::floor(static_cast<double>(t[j] - t[i]) / bin_ticks));
      if (bin < n_bins) ++counts[bin];
    }
  }
}

void radial_row(const double* row, std::size_t nx, double x0, double dx, double dy2, double r2,
                RadialSums& acc) {
  for (std::size_t k = 0; k < nx; ++k) {
    const double x = x0 + static_cast<double>(k) * dx;
    const double v = row[k];
    if (x * x + dy2 <= r2) {
      acc.inside_sum += v;
      acc.inside_sumsq += v * v;
      ++acc.inside_count;
    } else {
      acc.outside_sum += v;
    }
  }
}

constexpr Table kTable{sum, sum_sq_dev, axpy, allan_sumsq, delay_histogram, radial_row};

}  // namespace

const Table& table() { return kTable; }

}  // namespace spdcal::kernels::scalar
