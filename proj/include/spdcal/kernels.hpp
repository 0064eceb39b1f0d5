#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference and, on x86-64,
// an AVX2 variant. The table is chosen once at startup from CPUID and can be
// pinned (tests, `--isa scalar`) with force_isa().

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace spdcal::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct RadialSums {
  double inside_sum = 0.0;
  double inside_sumsq = 0.0;
  std::size_t inside_count = 0;
  double outside_sum = 0.0;
};

struct Table {
  double (*sum)(const double* x, std::size_t n);
  /// sum (x_i - mean)^2
  double (*sum_sq_dev)(const double* x, std::size_t n, double mean);
  /// y += a * x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  /// sum_{i < n_terms} (p[i+2m] - 2 p[i+m] + p[i])^2 over a prefix-sum array p.
  double (*allan_sumsq)(const double* prefix, std::size_t n_terms, std::size_t m);
  /// For every ordered pair i < j with 0 < t_j - t_i <= window_ticks, increments
  /// counts[floor((t_j - t_i) / bin_ticks)]. Ticks must be strictly increasing and < 2^52.
  void (*delay_histogram)(const std::int64_t* ticks, std::size_t n, std::int64_t window_ticks,
                          double bin_ticks, std::uint64_t* counts, std::size_t n_bins);
  /// Accumulates one grid row of values at x = x0 + k*dx split by dx^2 + dy2 <= r2.
  void (*radial_row)(const double* row, std::size_t nx, double x0, double dx, double dy2, double r2,
                     RadialSums& acc);
};

bool isa_available(Isa isa);
Isa detected_isa();

/// Table for a specific ISA. Throws InvalidArgument if not available on this CPU/build.
const Table& table(Isa isa);

/// Table currently used by the library.
const Table& active();
Isa active_isa();
void force_isa(Isa isa);

namespace scalar {
const Table& table();
}
#if defined(SPDCAL_HAVE_AVX2)
namespace avx2 {
const Table& table();
}
#endif

}  // namespace spdcal::kernels
