#include "spdcal/ratecurve.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "spdcal/keyvalue.hpp"
#include "spdcal/stats.hpp"

namespace spdcal::ratecurve {

std::vector<RatePoint> parse_rate_csv(const std::string& text, const std::string& origin) {
  std::vector<RatePoint> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto cols = split(t, ',');
    if (cols.size() != 4) throw ParseError(origin, line_no, "4 columns 'setting_id, rate_cps, de, u_de'");
    if (cols[0] == "setting_id") continue;
    const auto rate = parse_double(cols[1]);
    const auto de = parse_double(cols[2]);
    const auto u = parse_double(cols[3]);
    if (!rate || !(*rate > 0.0)) throw ParseError(origin, line_no, "positive numeric rate_cps");
    if (!de || !(*de > 0.0 && *de < 1.5)) throw ParseError(origin, line_no, "de in (0, 1.5)");
    if (!u || *u < 0.0) throw ParseError(origin, line_no, "non-negative numeric u_de");
    out.push_back({cols[0], *rate, Uncertain(*de, *u)});
  }
  return out;
}

std::vector<RatePoint> load_rate_csv(const std::filesystem::path& path) {
  return parse_rate_csv(read_text_file(path, "rate CSV"), path.string());
}

std::string rate_csv_text(std::span<const RatePoint> points) {
  std::string out = "setting_id,rate_cps,de,u_de\n";
  for (const auto& p : points)
    out += p.setting_id + "," + format_double(p.rate) + "," + format_double(p.de.value()) + "," +
           format_double(p.de.u()) + "\n";
  return out;
}

std::vector<SettingMean> aggregate_by_setting(std::span<const RatePoint> points) {
  std::vector<SettingMean> out;
  for (const auto& p : points) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SettingMean& m) { return m.setting_id == p.setting_id; });
    if (it == out.end()) {
      out.push_back({p.setting_id, 0.0, 0.0, 0});
      it = out.end() - 1;
    }
    it->rate += p.rate;
    it->de += p.de.value();
    ++it->n;
  }
  for (auto& m : out) {
    m.rate /= static_cast<double>(m.n);
    m.de /= static_cast<double>(m.n);
  }
  return out;
}

double RateCurveFit::prediction_u(double rate) const {
  const double d = rate - x_center;
  return std::sqrt(std::max(var_center + d * d * slope.u() * slope.u(), 0.0));
}

RateCurveFit fit_rate_curve(std::span<const RatePoint> points, bool weighted) {
  if (points.size() < 3) throw InvalidArgument("rate curve fit needs at least 3 points");
  std::vector<double> x, y, w;
  for (const auto& p : points) {
    if (!(p.rate > 0.0)) throw InvalidArgument("rate must be positive");
    x.push_back(p.rate);
    y.push_back(p.de.value());
    if (weighted) {
      if (!(p.de.u() > 0.0)) throw InvalidArgument("weighted fit needs positive per-point u");
      w.push_back(1.0 / (p.de.u() * p.de.u()));
    }
  }
  const stats::LineFit lf = stats::fit_line(x, y, w);
  RateCurveFit f;
  f.intercept = Uncertain(lf.intercept, std::sqrt(std::max(lf.var_intercept, 0.0)));
  f.slope = Uncertain(lf.slope, std::sqrt(std::max(lf.var_slope, 0.0)));
  f.cov = lf.cov;
  f.n_points = points.size();
  f.weighted = weighted;
  f.rate_min = *std::min_element(x.begin(), x.end());
  f.rate_max = *std::max_element(x.begin(), x.end());
  f.x_center = lf.x_center;
  f.var_center = lf.var_center;
  return f;
}

RateEstimate de_at_rate(const RateCurveFit& fit, std::span<const RatePoint> points, double target_rate) {
  if (points.empty()) throw InvalidArgument("no rate points");
  if (!(target_rate > 0.0)) throw InvalidArgument("target rate must be positive");
  RateEstimate r;
  r.target_rate = target_rate;
  double su = 0.0;
  for (const auto& p : points) su += p.de.u();
  r.mean_point_u = su / static_cast<double>(points.size());
  r.prediction_u = fit.prediction_u(target_rate);
  r.de.value = Uncertain(fit.predict(target_rate), std::hypot(r.mean_point_u, r.prediction_u));
  if (target_rate > 10.0 * fit.rate_max)
    r.de.warnings.push_back("target rate " + format_double(target_rate) + " /s is more than 10x the highest fitted rate");
  return r;
}

std::vector<std::size_t> flag_outliers(const RateCurveFit& fit, std::span<const RatePoint> points, double threshold) {
  // Remove the worst point while it exceeds the threshold, refitting each time,
  // so one gross outlier cannot drag the line onto its neighbours.
  std::vector<std::size_t> keep(points.size()), flagged;
  for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = i;
  RateCurveFit current = fit;
  while (true) {
    double worst = threshold;
    std::size_t worst_pos = keep.size();
    for (std::size_t k = 0; k < keep.size(); ++k) {
      const RatePoint& p = points[keep[k]];
      if (!(p.de.u() > 0.0)) continue;
      const double z = std::fabs(p.de.value() - current.predict(p.rate)) / p.de.u();
      if (z > worst) worst = z, worst_pos = k;
    }
    if (worst_pos == keep.size()) break;
    flagged.push_back(keep[worst_pos]);
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(worst_pos));
    std::vector<RatePoint> rest;
    for (std::size_t i : keep) rest.push_back(points[i]);
    try {
      current = fit_rate_curve(rest, fit.weighted);
    } catch (const Error&) {
      break;
    }
  }
  std::sort(flagged.begin(), flagged.end());
  return flagged;
}

std::vector<RatePoint> below_rate(std::span<const RatePoint> points, double cutoff) {
  std::vector<RatePoint> out;
  for (const auto& p : points)
    if (p.rate <= cutoff) out.push_back(p);
  return out;
}

std::string points_plot_csv(std::span<const RatePoint> points) {
  std::string out = "rate_cps,de,u_de\n";
  for (const auto& p : points)
    out += format_double(p.rate) + "," + format_double(p.de.value()) + "," + format_double(p.de.u()) + "\n";
  return out;
}

std::string means_plot_csv(std::span<const SettingMean> means) {
  std::string out = "setting_id,rate_cps,de,n\n";
  for (const auto& m : means)
    out += m.setting_id + "," + format_double(m.rate) + "," + format_double(m.de) + "," + std::to_string(m.n) + "\n";
  return out;
}

}  // namespace spdcal::ratecurve
