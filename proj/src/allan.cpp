#include "spdcal/allan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "spdcal/keyvalue.hpp"
#include "spdcal/kernels.hpp"
#include "spdcal/stats.hpp"

namespace spdcal::allan {

SampledSeries::SampledSeries(std::vector<double> v, double dt) : values(std::move(v)), sample_interval(dt) {
  if (values.size() < 2) throw InvalidArgument("SampledSeries: need at least 2 samples");
  if (!(sample_interval > 0.0)) throw InvalidArgument("SampledSeries: sample interval must be positive");
}

double SampledSeries::mean() const { return stats::mean(values); }

namespace {

std::size_t averaging_factor(const SampledSeries& s, double tau) {
  const double m = tau / s.sample_interval;
  const double r = std::round(m);
  if (!(r >= 1.0) || std::abs(m - r) > 1e-9 * r) {
    throw InvalidArgument("tau must be a positive integer multiple of the sample interval");
  }
  return static_cast<std::size_t>(r);
}

// Running sums of the mean-removed series; removing the mean keeps the block
// differences accurate for series with a large offset.
std::vector<double> centered_prefix(const SampledSeries& s) {
  const double mu = s.mean();
  std::vector<double> p(s.size() + 1, 0.0);
  for (std::size_t i = 0; i < s.size(); ++i) p[i + 1] = p[i] + (s.values[i] - mu);
  return p;
}

}  // namespace

double max_tau(const SampledSeries& s, Estimator estimator) {
  const std::size_t n = s.size();
  const std::size_t m = estimator == Estimator::overlapping ? (n - 1) / 2 : n / 2;
  return static_cast<double>(m) * s.sample_interval;
}

double allan_deviation(const SampledSeries& s, double tau, Estimator estimator) {
  const std::size_t m = averaging_factor(s, tau);
  const std::size_t n = s.size();
  const std::vector<double> p = centered_prefix(s);
  const double md = static_cast<double>(m);

  if (estimator == Estimator::overlapping) {
    if (n < 2 * m + 1) {
      throw InvalidArgument("series of " + std::to_string(n) + " samples too short for tau = " +
                            format_double(tau) + " s; max feasible tau = " + format_double(max_tau(s, estimator)) +
                            " s");
    }
    const std::size_t terms = n - 2 * m + 1;
    const double ss = kernels::active().allan_sumsq(p.data(), terms, m);
    return std::sqrt(ss / (2.0 * static_cast<double>(terms) * md * md));
  }

  const std::size_t blocks = n / m;
  if (blocks < 2) {
    throw InvalidArgument("series too short for tau = " + format_double(tau) +
                          " s; max feasible tau = " + format_double(max_tau(s, estimator)) + " s");
  }
  double ss = 0.0;
  for (std::size_t k = 0; k + 1 < blocks; ++k) {
    const double d = (p[(k + 2) * m] - 2.0 * p[(k + 1) * m] + p[k * m]) / md;
    ss += d * d;
  }
  return std::sqrt(ss / (2.0 * static_cast<double>(blocks - 1)));
}

std::vector<RelativePoint> relative_allan(const SampledSeries& s, std::span<const double> taus, Estimator estimator) {
  const double mu = s.mean();
  if (mu == 0.0) throw InvalidArgument("relative_allan: series mean is zero");
  std::vector<RelativePoint> out;
  out.reserve(taus.size());
  for (const double tau : taus) out.push_back({tau, 100.0 * allan_deviation(s, tau, estimator) / std::abs(mu)});
  return out;
}

std::vector<double> octave_taus(const SampledSeries& s, Estimator estimator) {
  std::vector<double> taus;
  const double top = max_tau(s, estimator);
  for (std::size_t m = 1; static_cast<double>(m) * s.sample_interval <= top * (1.0 + 1e-12); m *= 2) {
    taus.push_back(static_cast<double>(m) * s.sample_interval);
  }
  return taus;
}

SampledSeries ratio_series(const SampledSeries& a, const SampledSeries& b) {
  if (a.size() != b.size()) throw InvalidArgument("ratio_series: length mismatch");
  if (std::abs(a.sample_interval - b.sample_interval) > 1e-12 * a.sample_interval) {
    throw InvalidArgument("ratio_series: sample interval mismatch");
  }
  std::vector<double> r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (b.values[i] == 0.0) throw InvalidArgument("ratio_series: zero divisor at sample " + std::to_string(i));
    r[i] = a.values[i] / b.values[i];
  }
  return SampledSeries(std::move(r), a.sample_interval);
}

std::vector<PowerReading> parse_power_csv(const std::string& text, const std::string& origin) {
  std::vector<PowerReading> rows;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 4) throw ParseError(origin, line_no, "4 columns 't_s, reading_W, range_id, dark'");
    if (cols[0] == "t_s") continue;  // header
    const auto ts = parse_double(cols[0]);
    const auto w = parse_double(cols[1]);
    if (!ts) throw ParseError(origin, line_no, "numeric t_s");
    if (!w) throw ParseError(origin, line_no, "numeric reading_W");
    if (cols[3] != "0" && cols[3] != "1") throw ParseError(origin, line_no, "dark flag 0 or 1");
    rows.push_back({*ts, *w, cols[2], cols[3] == "1"});
  }
  return rows;
}

std::vector<PowerReading> load_power_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, "a readable power CSV");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_power_csv(ss.str(), path.string());
}

std::string power_csv_text(std::span<const PowerReading> rows) {
  std::string out = "t_s,reading_W,range_id,dark\n";
  for (const auto& r : rows) {
    out += format_double(r.t_s) + "," + format_double(r.reading_w) + "," + r.range_id + "," + (r.dark ? "1" : "0") +
           "\n";
  }
  return out;
}

SampledSeries bright_series(std::span<const PowerReading> rows) {
  std::vector<double> t, v;
  for (const auto& r : rows) {
    if (r.dark) continue;
    t.push_back(r.t_s);
    v.push_back(r.reading_w);
  }
  if (v.size() < 2) throw InvalidArgument("power log has fewer than 2 bright readings");
  const double dt = (t.back() - t.front()) / static_cast<double>(t.size() - 1);
  if (!(dt > 0.0)) throw InvalidArgument("power log timestamps are not increasing");
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 0.01 * dt) {
      throw InvalidArgument("power log is not uniformly sampled near t = " + format_double(t[i]) + " s");
    }
  }
  return SampledSeries(std::move(v), dt);
}

}  // namespace spdcal::allan
