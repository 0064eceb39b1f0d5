#pragma once

// Equal-weight linear opinion pool of run-level results.

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "spdcal/quantities.hpp"

namespace spdcal::consensus {

struct RunResult {
  std::string label;
  Uncertain wavelength_nm;
  Uncertain temperature_c;
  Uncertain r_out_mon;
  Uncertain de;
};

/// CSV columns: label, lambda_nm, u_lambda, temp_C, u_temp, r_out_mon, u_r, de, u_de.
std::vector<RunResult> parse_runs_csv(const std::string& text, const std::string& origin = "<memory>");
std::vector<RunResult> load_runs_csv(const std::filesystem::path& path);
std::string runs_csv_text(std::span<const RunResult> runs);

/// Arithmetic mean of the run DE values. Needs >= 2 runs.
double pool_mean(std::span<const RunResult> runs);

/// Distribution function of the mixture of N(de_i, u_i^2) with equal weights.
double mixture_cdf(std::span<const RunResult> runs, double x);

/// Root of mixture_cdf(x) = p by bisection, to absolute tolerance `tol`.
double mixture_quantile(std::span<const RunResult> runs, double p, double tol = 1e-12);

struct CoverageInterval {
  double lo = 0.0;
  double hi = 0.0;
  double level = 0.95;
};

CoverageInterval coverage_interval(std::span<const RunResult> runs, double level = 0.95);

/// 100 * (hi - lo) / 2 / pool_mean.
double relative_expanded(std::span<const RunResult> runs, const CoverageInterval& interval);

}  // namespace spdcal::consensus
