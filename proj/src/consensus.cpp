#include "spdcal/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spdcal/keyvalue.hpp"
#include "spdcal/stats.hpp"

namespace spdcal::consensus {

std::vector<RunResult> parse_runs_csv(const std::string& text, const std::string& origin) {
  std::vector<RunResult> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 9)
      throw ParseError(origin, line_no, "9 columns 'label, lambda_nm, u_lambda, temp_C, u_temp, r_out_mon, u_r, de, u_de'");
    if (cols[0] == "label") continue;
    double v[8];
    for (int i = 0; i < 8; ++i) {
      const auto d = parse_double(cols[i + 1]);
      if (!d) throw ParseError(origin, line_no, "numeric column " + std::to_string(i + 2));
      v[i] = *d;
    }
    if (v[1] < 0.0 || v[3] < 0.0 || v[5] < 0.0) throw ParseError(origin, line_no, "non-negative uncertainties");
    if (!(v[6] > 0.0 && v[6] < 1.5)) throw ParseError(origin, line_no, "de in (0, 1.5)");
    if (!(v[7] > 0.0)) throw ParseError(origin, line_no, "positive u_de");
    out.push_back({cols[0], Uncertain(v[0], v[1]), Uncertain(v[2], v[3]), Uncertain(v[4], v[5]), Uncertain(v[6], v[7])});
  }
  return out;
}

std::vector<RunResult> load_runs_csv(const std::filesystem::path& path) {
  return parse_runs_csv(read_text_file(path, "run results CSV"), path.string());
}

std::string runs_csv_text(std::span<const RunResult> runs) {
  std::string out = "label,lambda_nm,u_lambda,temp_C,u_temp,r_out_mon,u_r,de,u_de\n";
  auto f = [](const Uncertain& x) { return format_double(x.value()) + "," + format_double(x.u()); };
  for (const auto& r : runs)
    out += r.label + "," + f(r.wavelength_nm) + "," + f(r.temperature_c) + "," + f(r.r_out_mon) + "," + f(r.de) + "\n";
  return out;
}

namespace {

void require_runs(std::span<const RunResult> runs) {
  if (runs.size() < 2) throw InvalidArgument("consensus needs at least 2 runs");
  for (const auto& r : runs)
    if (!(r.de.u() > 0.0)) throw InvalidArgument("run " + r.label + " has no DE uncertainty");
}

}  // namespace

double pool_mean(std::span<const RunResult> runs) {
  require_runs(runs);
  double s = 0.0;
  for (const auto& r : runs) s += r.de.value();
  return s / static_cast<double>(runs.size());
}

double mixture_cdf(std::span<const RunResult> runs, double x) {
  double s = 0.0;
  for (const auto& r : runs) s += stats::normal_cdf((x - r.de.value()) / r.de.u());
  return s / static_cast<double>(runs.size());
}

double mixture_quantile(std::span<const RunResult> runs, double p, double tol) {
  require_runs(runs);
  if (!(p > 0.0 && p < 1.0)) throw InvalidArgument("quantile level must be in (0, 1)");
  double lo = runs[0].de.value(), hi = lo;
  for (const auto& r : runs) {
    lo = std::min(lo, r.de.value() - 40.0 * r.de.u());
    hi = std::max(hi, r.de.value() + 40.0 * r.de.u());
  }
  if (!(mixture_cdf(runs, lo) <= p && mixture_cdf(runs, hi) >= p)) throw Error("mixture quantile not bracketed");
  for (int it = 0; it < 200 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_cdf(runs, mid) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (hi - lo > std::max(tol, 1e-6)) throw Error("mixture quantile did not converge");
  return 0.5 * (lo + hi);
}

CoverageInterval coverage_interval(std::span<const RunResult> runs, double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("coverage level must be in (0, 1)");
  CoverageInterval ci;
  ci.level = level;
  ci.lo = mixture_quantile(runs, 0.5 * (1.0 - level));
  ci.hi = mixture_quantile(runs, 0.5 * (1.0 + level));
  return ci;
}

double relative_expanded(std::span<const RunResult> runs, const CoverageInterval& interval) {
  const double m = pool_mean(runs);
  if (m == 0.0) throw InvalidArgument("pooled mean is zero");
  return 100.0 * 0.5 * (interval.hi - interval.lo) / m;
}

}  // namespace spdcal::consensus
