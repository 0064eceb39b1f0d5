#include "spdcal/simulator.hpp"

#include <cmath>
#include <limits>
#include <queue>
#include <random>

namespace spdcal::simulator {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32), stream_id};
  return std::mt19937_64(seq);
}

constexpr double kNever = std::numeric_limits<double>::infinity();

// Next arrival of a homogeneous Poisson process.
class PoissonClock {
public:
  PoissonClock(double rate, std::mt19937_64 engine) : rate_(rate), engine_(std::move(engine)) { advance(); }
  double next() const { return next_; }
  void advance() {
    if (!(rate_ > 0.0)) {
      next_ = kNever;
      return;
    }
    next_ = t_ + std::exponential_distribution<double>(rate_)(engine_);
    t_ = next_;
  }

private:
  double rate_;
  std::mt19937_64 engine_;
  double t_ = 0.0;
  double next_ = kNever;
};

// Pulses at k / rep, each detected with probability q.
class PulseClock {
public:
  PulseClock(double rep, double q, std::mt19937_64 engine) : period_(1.0 / rep), q_(q), engine_(std::move(engine)) {
    advance();
  }
  double next() const { return next_; }
  void advance() {
    if (!(q_ > 0.0)) {
      next_ = kNever;
      return;
    }
    pulse_ += std::geometric_distribution<std::int64_t>(q_)(engine_) + 1;
    next_ = static_cast<double>(pulse_) * period_;
  }

private:
  double period_;
  double q_;
  std::mt19937_64 engine_;
  std::int64_t pulse_ = -1;
  double next_ = kNever;
};

}  // namespace

timetag::TimeTagStream simulate_detections(const SourceConfig& source, const DetectorConfig& det, double duration_s,
                                           std::uint64_t seed, double resolution_s) {
  if (!(duration_s > 0.0)) throw InvalidArgument("duration must be positive");
  if (!(resolution_s > 0.0)) throw InvalidArgument("resolution must be positive");
  if (det.dead_time < 0.0 || det.afterpulse_tau < 0.0 || det.dark_rate < 0.0)
    throw InvalidArgument("detector times and rates must be non-negative");
  if (!(det.afterpulse_prob >= 0.0 && det.afterpulse_prob < 1.0)) throw InvalidArgument("afterpulse_prob must be in [0, 1)");
  if (!(det.de_true >= 0.0 && det.de_true <= 1.0)) throw InvalidArgument("de_true must be in [0, 1]");
  if (source.rate < 0.0 || source.mu_p < 0.0) throw InvalidArgument("source parameters must be non-negative");

  double signal_rate = 0.0;
  double q = 0.0;
  if (source.mode == SourceMode::cw) {
    signal_rate = source.rate * det.de_true;
  } else {
    if (source.rate > 0.0) q = -std::expm1(-source.mu_p * det.de_true);
    signal_rate = source.rate * q;
  }
  if ((signal_rate + det.dark_rate) * det.dead_time >= 1.0)
    throw SaturationError("detectable rate times dead time reaches 1");

  PoissonClock cw(source.mode == SourceMode::cw ? signal_rate : 0.0, make_engine(seed, 1));
  PulseClock pulses(source.mode == SourceMode::pulsed && source.rate > 0.0 ? source.rate : 1.0,
                    source.mode == SourceMode::pulsed ? q : 0.0, make_engine(seed, 2));
  PoissonClock dark(det.dark_rate, make_engine(seed, 3));
  std::mt19937_64 ap_engine = make_engine(seed, 4);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::exponential_distribution<double> ap_delay(det.afterpulse_tau > 0.0 ? 1.0 / det.afterpulse_tau : 1.0);

  std::priority_queue<double, std::vector<double>, std::greater<>> afterpulses;
  std::vector<std::int64_t> ticks;
  ticks.reserve(static_cast<std::size_t>(std::min(1e8, (signal_rate + det.dark_rate) * duration_s * 1.1 + 16)));
  double last = -kNever;
  std::int64_t last_tick = -1;

  while (true) {
    const double t_ap = afterpulses.empty() ? kNever : afterpulses.top();
    const double t = std::min({cw.next(), pulses.next(), dark.next(), t_ap});
    if (!(t < duration_s)) break;
    if (t == t_ap) {
      afterpulses.pop();
    } else if (t == cw.next()) {
      cw.advance();
    } else if (t == pulses.next()) {
      pulses.advance();
    } else {
      dark.advance();
    }
    if (t < last + det.dead_time) continue;
    const auto tick = static_cast<std::int64_t>(std::floor(t / resolution_s));
    if (tick <= last_tick) continue;
    last = t;
    last_tick = tick;
    ticks.push_back(tick);
    if (det.afterpulse_prob > 0.0 && uniform(ap_engine) < det.afterpulse_prob) {
      const double delay = det.afterpulse_tau > 0.0 ? ap_delay(ap_engine) : 0.0;
      afterpulses.push(t + det.dead_time + delay);
    }
  }
  return timetag::TimeTagStream(std::move(ticks), resolution_s, duration_s);
}

std::vector<allan::SampledSeries> simulate_power_series(std::span<const PowerMeterSimConfig> configs,
                                                        std::size_t n_samples, double sample_interval,
                                                        std::uint64_t seed) {
  if (n_samples < 2) throw InvalidArgument("need at least 2 samples");
  if (!(sample_interval > 0.0)) throw InvalidArgument("sample interval must be positive");
  for (const auto& c : configs)
    if (c.white_sigma < 0.0 || c.drift < 0.0) throw InvalidArgument("noise parameters must be non-negative");

  // One drift walk per group; ungrouped channels get their own.
  std::vector<int> group(configs.size());
  std::vector<double> group_step;
  std::vector<int> ids;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const int id = configs[i].common_mode_id;
    int g = -1;
    if (id >= 0) {
      for (std::size_t k = 0; k < ids.size(); ++k)
        if (ids[k] == id) g = static_cast<int>(k);
    }
    if (g < 0) {
      g = static_cast<int>(group_step.size());
      group_step.push_back(configs[i].drift);
      ids.push_back(id >= 0 ? id : -1 - static_cast<int>(i));
    }
    group[i] = g;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> walks(group_step.size(), std::vector<double>(n_samples, 0.0));
  for (std::size_t g = 0; g < walks.size(); ++g) {
    auto engine = make_engine(seed, 100 + static_cast<std::uint32_t>(g));
    double w = 0.0;
    for (std::size_t k = 0; k < n_samples; ++k) {
      if (group_step[g] > 0.0) w += group_step[g] * normal(engine);
      walks[g][k] = w;
    }
  }

  std::vector<allan::SampledSeries> out;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    auto engine = make_engine(seed, 1000 + static_cast<std::uint32_t>(i));
    std::vector<double> v(n_samples);
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double white = configs[i].white_sigma > 0.0 ? configs[i].white_sigma * normal(engine) : 0.0;
      v[k] = configs[i].mean * (1.0 + walks[group[i]][k]) * (1.0 + white);
    }
    out.emplace_back(std::move(v), sample_interval);
  }
  return out;
}

double registered_rate(double a, double tau, double ap0, double ap) {
  if (a < 0.0 || tau < 0.0 || ap0 < 0.0 || ap < 0.0) throw InvalidArgument("rates and model terms must be non-negative");
  if (a == 0.0) return 0.0;
  const double b = 1.0 - ap0 + a * tau;
  if (ap == 0.0) return a / b;
  const double disc = b * b - 4.0 * ap * a;
  if (disc < 0.0) throw SaturationError("no registered rate solves the afterpulse/dead-time model");
  // Smaller root, written to avoid cancellation.
  return 2.0 * a / (b + std::sqrt(disc));
}

double primary_rate_for(double c, double tau, double ap0, double ap) {
  if (c < 0.0) throw InvalidArgument("rate must be non-negative");
  if (c * tau >= 1.0) throw SaturationError("registered rate times dead time reaches 1");
  return c * (1.0 - ap0 - ap * c) / (1.0 - c * tau);
}

}  // namespace spdcal::simulator
