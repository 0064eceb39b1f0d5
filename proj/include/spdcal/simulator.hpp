#pragma once

// Seeded apparatus simulator: photon arrivals, detector response and
// power-meter reading series.
//
// Generator: std::mt19937_64 seeded with std::seed_seq{seed low, seed high,
// stream id}. Each physical process draws from its own stream id, so adding
// afterpulses does not perturb the arrival sequence.

#include <cstdint>
#include <span>
#include <vector>

#include "spdcal/allan.hpp"
#include "spdcal/timetag.hpp"

namespace spdcal::simulator {

inline constexpr double kDefaultResolution = 156.25e-12;  // s

enum class SourceMode { cw, pulsed };

struct SourceConfig {
  SourceMode mode = SourceMode::cw;
  double rate = 0.0;  // photons/s (cw) or pulse repetition rate (pulsed)
  double mu_p = 0.0;  // mean photons per pulse (pulsed)
};

struct DetectorConfig {
  double dead_time = 0.0;        // s, non-paralyzable
  double afterpulse_prob = 0.0;  // per registered detection
  double afterpulse_tau = 0.0;   // s, exponential delay beyond the dead time
  double dark_rate = 0.0;        // counts/s
  double de_true = 1.0;
};

/// Registered detections over [0, duration). Throws SaturationError when the
/// detectable rate times the dead time reaches 1.
timetag::TimeTagStream simulate_detections(const SourceConfig& source, const DetectorConfig& det, double duration_s,
                                           std::uint64_t seed, double resolution_s = kDefaultResolution);

struct PowerMeterSimConfig {
  double mean = 0.0;          // W
  double white_sigma = 0.0;   // relative, per sample
  double drift = 0.0;         // relative random-walk step per sample
  int common_mode_id = -1;    // channels with the same id >= 0 share one drift walk
};

/// Channels sharing a common-mode id use the drift step of the first such channel.
std::vector<allan::SampledSeries> simulate_power_series(std::span<const PowerMeterSimConfig> configs,
                                                        std::size_t n_samples, double sample_interval,
                                                        std::uint64_t seed);

/// Detected (registered) rate of a non-paralyzable detector whose afterpulse
/// fraction is ap0 + ap * C: solves C (1 - ap0 - ap C) = A (1 - C tau) for the
/// primary rate A.
double registered_rate(double primary_rate, double dead_time, double ap0, double ap);

/// Inverse of registered_rate.
double primary_rate_for(double registered, double dead_time, double ap0, double ap);

}  // namespace spdcal::simulator
