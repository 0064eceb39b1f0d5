#include "spdcal/timetag.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spdcal/keyvalue.hpp"
#include "spdcal/kernels.hpp"
#include "spdcal/stats.hpp"

namespace spdcal::timetag {
namespace {

// Converts a time to ticks, snapping values that are integral up to rounding noise.
double to_ticks(double seconds, double resolution) {
  const double t = seconds / resolution;
  const double r = std::round(t);
  return std::abs(t - r) <= 1e-9 * std::max(1.0, std::abs(t)) ? r : t;
}

std::size_t first_bin_at_or_after(double t, double bin_width) {
  const double k = t / bin_width;
  const double r = std::round(k);
  if (std::abs(k - r) <= 1e-9 * std::max(1.0, k)) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::ceil(k));
}

std::string format_general(double x, int precision) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::general, precision);
  return std::string(buf, ptr);
}

}  // namespace

TimeTagStream::TimeTagStream(std::vector<std::int64_t> ticks, double resolution_s, double duration_s)
    : ticks_(std::move(ticks)), resolution_(resolution_s), duration_(duration_s) {
  if (!(resolution_ > 0.0) || !std::isfinite(resolution_)) {
    throw InvalidArgument("time-tag resolution must be positive");
  }
  if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
    throw InvalidArgument("time-tag duration must be positive");
  }
  for (std::size_t i = 0; i < ticks_.size(); ++i) {
    if (ticks_[i] < 0) throw InvalidArgument("negative time tag at index " + std::to_string(i));
    if (i > 0 && ticks_[i] <= ticks_[i - 1]) {
      throw InvalidArgument("time tags not strictly increasing at index " + std::to_string(i));
    }
  }
  if (!ticks_.empty() && static_cast<double>(ticks_.back()) * resolution_ > duration_ * (1.0 + 1e-12)) {
    throw InvalidArgument("time tag beyond stream duration");
  }
  if (!ticks_.empty() && ticks_.back() >= (std::int64_t{1} << 52)) {
    throw InvalidArgument("time tags must be below 2^52");
  }
}

std::string TimeTagStream::to_text() const {
  std::string out;
  out.reserve(ticks_.size() * 12 + 64);
  out += "# resolution_ps=" + format_general(resolution_ * 1e12, 12) + "\n";
  out += "# duration_s=" + format_general(duration_, 15) + "\n";
  char buf[32];
  for (const auto t : ticks_) {
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, t);
    out.append(buf, ptr);
    out += '\n';
  }
  return out;
}

void TimeTagStream::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << to_text();
}

TimeTagStream TimeTagStream::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "a readable time-tag file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

TimeTagStream TimeTagStream::parse(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto header = [&](const std::string& key) {
    if (!std::getline(in, line)) throw ParseError(origin, line_no + 1, "header '# " + key + "=<decimal>'");
    ++line_no;
    const std::string prefix = "# " + key + "=";
    if (line.rfind(prefix, 0) != 0) throw ParseError(origin, line_no, "header '" + prefix + "<decimal>'");
    const auto v = parse_double(line.substr(prefix.size()));
    if (!v || *v <= 0.0) throw ParseError(origin, line_no, "a positive decimal after '" + prefix + "'");
    return *v;
  };
  const double resolution_ps = header("resolution_ps");
  const double duration = header("duration_s");

  std::vector<std::int64_t> ticks;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::int64_t t = 0;
    const auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), t);
    if (ec != std::errc() || ptr != line.data() + line.size() || line[0] == '-') {
      throw ParseError(origin, line_no, "an unsigned decimal tick");
    }
    if (!ticks.empty() && t <= ticks.back()) {
      throw ParseError(origin, line_no, "strictly increasing ticks (got " + line + " after " +
                                            std::to_string(ticks.back()) + ")");
    }
    ticks.push_back(t);
  }
  try {
    return TimeTagStream(std::move(ticks), resolution_ps * 1e-12, duration);
  } catch (const InvalidArgument& e) {
    throw ParseError(origin, line_no, std::string("a consistent stream: ") + e.what());
  }
}

std::uint64_t IntervalHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

IntervalHistogram interarrival_sum_histogram(const TimeTagStream& stream, double bin_width, double window) {
  if (stream.empty()) throw InvalidArgument("interarrival_sum_histogram: empty stream");
  if (!(bin_width >= stream.resolution() * (1.0 - 1e-9))) {
    throw InvalidArgument("interarrival_sum_histogram: bin width below tagger resolution");
  }
  if (!(window >= bin_width)) throw InvalidArgument("interarrival_sum_histogram: window shorter than one bin");

  IntervalHistogram h;
  h.bin_width = bin_width;
  h.window = window;
  h.n_events = stream.size();
  if (window > stream.duration()) {
    h.warnings.push_back("window exceeds stream duration");
  }
  const double bin_ticks = to_ticks(bin_width, stream.resolution());
  const auto window_ticks = static_cast<std::int64_t>(std::floor(to_ticks(window, stream.resolution())));
  const auto n_bins = static_cast<std::size_t>(std::floor(static_cast<double>(window_ticks) / bin_ticks)) + 1;
  h.counts.assign(n_bins, 0);
  kernels::active().delay_histogram(stream.ticks().data(), stream.size(), window_ticks, bin_ticks,
                                    h.counts.data(), n_bins);
  return h;
}

namespace {

struct Baseline {
  double mean = 0.0;
  std::size_t first = 0;
  std::size_t count = 0;
};

Baseline baseline_from(const IntervalHistogram& hist, double baseline_start, bool allow_fallback) {
  const std::size_t complete = hist.complete_bins();
  Baseline b;
  b.first = first_bin_at_or_after(baseline_start, hist.bin_width);
  if (b.first >= complete) {
    if (!allow_fallback) return b;
    b.first = complete / 2;
  }
  b.count = complete - b.first;
  if (b.count == 0) return b;
  double s = 0.0;
  for (std::size_t k = b.first; k < complete; ++k) s += static_cast<double>(hist.counts[k]);
  b.mean = s / static_cast<double>(b.count);
  return b;
}

}  // namespace

DeadTimeResult estimate_dead_time(const IntervalHistogram& hist, double threshold_fraction,
                                  double baseline_start) {
  if (!(threshold_fraction > 0.0 && threshold_fraction < 1.0)) {
    throw InvalidArgument("estimate_dead_time: threshold_fraction must lie in (0, 1)");
  }
  const Baseline base = baseline_from(hist, baseline_start, true);
  if (base.count == 0 || !(base.mean > 0.0)) {
    throw InvalidArgument("estimate_dead_time: histogram baseline is empty");
  }
  DeadTimeResult r;
  r.baseline = base.mean;
  const double threshold = threshold_fraction * base.mean;
  const std::size_t complete = hist.complete_bins();
  std::size_t k = 0;
  while (k < complete && static_cast<double>(hist.counts[k]) <= threshold) ++k;
  r.first_bin = k;
  if (k == 0 || k == complete) return r;

  // The prefix must be significantly empty, not one low Poisson bin.
  double prefix = 0.0;
  for (std::size_t i = 0; i < k; ++i) prefix += static_cast<double>(hist.counts[i]);
  const double expected = static_cast<double>(k) * base.mean;
  if (prefix >= expected - 5.0 * std::sqrt(expected)) return r;

  r.dead_time = Uncertain(hist.bin_start(k), hist.bin_width);
  return r;
}

AfterpulseResult afterpulse_probability(const IntervalHistogram& hist, double baseline_start, double dead_time) {
  if (!(baseline_start < hist.window)) {
    throw InvalidArgument("afterpulse_probability: baseline_start must be inside the window");
  }
  if (!(dead_time >= 0.0 && dead_time < baseline_start)) {
    throw InvalidArgument("afterpulse_probability: dead_time must lie in [0, baseline_start)");
  }
  if (hist.n_events == 0) throw InvalidArgument("afterpulse_probability: no events");
  const Baseline base = baseline_from(hist, baseline_start, false);
  if (base.count < 10) {
    throw InvalidArgument("afterpulse_probability: fewer than 10 baseline bins (" + std::to_string(base.count) +
                          "); widen the window");
  }

  const double bw = hist.bin_width;
  const auto first = static_cast<std::size_t>(std::floor(dead_time / bw));
  double excess = 0.0;
  double raw = 0.0;
  double live_bins = 0.0;
  for (std::size_t k = first; k < base.first; ++k) {
    const double live = k == first ? std::clamp((hist.bin_start(k + 1) - dead_time) / bw, 0.0, 1.0) : 1.0;
    const double c = static_cast<double>(hist.counts[k]);
    excess += c - live * base.mean;
    raw += c;
    live_bins += live;
  }
  const double var = raw + live_bins * live_bins * base.mean / static_cast<double>(base.count);
  const double n = static_cast<double>(hist.n_events);

  AfterpulseResult r;
  r.probability = Uncertain(excess / n, std::sqrt(var) / n);
  r.baseline = base.mean;
  r.excess_counts = excess;
  r.ratio_to_baseline = base.mean > 0.0 ? excess / base.mean : 0.0;
  r.baseline_bins = base.count;
  return r;
}

double AfterpulseModel::prediction_u(double rate) const {
  const double v = ap0.u() * ap0.u() + rate * rate * ap.u() * ap.u() + 2.0 * rate * cov_ap0_ap;
  return std::sqrt(std::max(0.0, v));
}

double AfterpulseModel::confidence_half_width(double rate, double level) const {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level must lie in (0, 1)");
  return stats::normal_quantile(0.5 + 0.5 * level) * prediction_u(rate);
}

AfterpulseModel fit_afterpulse_model(std::span<const AfterpulsePoint> points) {
  if (points.size() < 3) throw InvalidArgument("fit_afterpulse_model: need at least 3 points");
  std::vector<double> x, y, w;
  bool any_zero = false, all_zero = true;
  for (const auto& p : points) {
    x.push_back(p.rate);
    y.push_back(p.p.value());
    any_zero = any_zero || p.p.u() == 0.0;
    all_zero = all_zero && p.p.u() == 0.0;
    if (p.p.u() > 0.0) w.push_back(1.0 / (p.p.u() * p.p.u()));
  }
  if (any_zero && !all_zero) {
    throw InvalidArgument("fit_afterpulse_model: mixed zero and non-zero uncertainties");
  }
  const stats::LineFit f = stats::fit_line(x, y, all_zero ? std::span<const double>{} : std::span<const double>(w));

  AfterpulseModel m;
  m.ap0 = Uncertain(f.intercept, std::sqrt(std::max(0.0, f.var_intercept)));
  m.ap = Uncertain(f.slope, std::sqrt(std::max(0.0, f.var_slope)));
  m.cov_ap0_ap = f.cov;
  m.rate_min = *std::min_element(x.begin(), x.end());
  m.rate_max = *std::max_element(x.begin(), x.end());
  m.chi2 = f.ssr;
  m.dof = points.size() - 2;
  return m;
}

BlockingLoss blocking_loss_deviation(double detected_rate, double dead_time) {
  if (!(detected_rate >= 0.0) || !(dead_time >= 0.0)) {
    throw InvalidArgument("blocking_loss_deviation: rate and dead time must be non-negative");
  }
  const double mt = detected_rate * dead_time;
  if (mt >= 1.0) throw SaturationError("blocking_loss_deviation: detected rate x dead time >= 1");
  BlockingLoss b;
  b.incident_rate = detected_rate / (1.0 - mt);
  const double rt = b.incident_rate * dead_time;
  b.exact_fraction = 1.0 / (1.0 + rt);
  b.linear_fraction = 1.0 - rt;
  b.deviation = std::abs(b.exact_fraction - b.linear_fraction) / b.exact_fraction;
  return b;
}

}  // namespace spdcal::timetag
