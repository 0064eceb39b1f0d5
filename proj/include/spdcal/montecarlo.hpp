#pragma once

// Monte-Carlo propagation used as an independent check on the analytic
// budgets. Inputs are jointly Gaussian; the model is evaluated per draw.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "spdcal/debudget.hpp"
#include "spdcal/quantities.hpp"

namespace spdcal::montecarlo {

class InputSet {
public:
  /// Returns the input's index. Names must be unique.
  std::size_t add(std::string name, Uncertain x);
  void set_covariance(std::size_t i, std::size_t j, double cov);

  std::size_t size() const { return inputs_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const Uncertain& input(std::size_t i) const { return inputs_.at(i); }
  std::size_t index(const std::string& name) const;
  /// Full covariance matrix, row-major.
  std::vector<double> covariance_matrix() const;

private:
  std::vector<std::string> names_;
  std::vector<Uncertain> inputs_;
  struct Cov {
    std::size_t i, j;
    double cov;
  };
  std::vector<Cov> covs_;
};

using ModelFn = std::function<double(std::span<const double>)>;

struct MeasurementModel {
  std::string name;
  InputSet inputs;
  ModelFn f;

  /// f evaluated at the input values.
  double nominal() const;
};

struct McResult {
  Uncertain value;
  std::size_t n_draws = 0;
  std::size_t n_nonfinite = 0;
};

/// Needs n_draws >= 1e4. Deterministic for a given (seed, n_draws).
/// More than 0.1 % non-finite evaluations is an error; fewer are dropped.
McResult monte_carlo_uncertainty(const MeasurementModel& model, std::size_t n_draws, std::uint64_t seed);

// Models built from the same observations as the analytic path.
MeasurementModel corrected_counts_model(const debudget::CountObservation& obs, const timetag::AfterpulseModel& ap);
MeasurementModel monitor_power_model(const debudget::PowerObservation& obs);
MeasurementModel ratio_fiber_model(const debudget::RatioFiberInputs& in);
MeasurementModel ratio_freespace_model(const debudget::TrapObservation& trap, const debudget::PowerObservation& monitor,
                                       const Uncertain& stab, double cov_wy = 0.0);
MeasurementModel de_fiber_model(const debudget::FiberDeInputs& in);
MeasurementModel de_freespace_model(const debudget::FreeSpaceDeInputs& in,
                                    const debudget::FreeSpaceVariability& variability);
MeasurementModel fiber_chain_model(const debudget::FiberBudgetInputs& in);
MeasurementModel freespace_chain_model(const debudget::FreeSpaceBudgetInputs& in);

}  // namespace spdcal::montecarlo
