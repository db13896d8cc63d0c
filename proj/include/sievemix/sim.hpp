#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sievemix/estimator.hpp"
#include "sievemix/mixture.hpp"

namespace sievemix {

/// Counter-based stream seed: a SplitMix64 chain over (seed, schedule, n, rep).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t schedule_id, std::uint64_t n, std::uint64_t rep);

/// Composition sampling: pick a component by weight, then transform a
/// standardized draw. Custom families are drawn by rejection from their
/// envelope. Deterministic given the seed.
std::vector<double> sample(const MixtureParams& theta, std::size_t n, std::uint64_t seed);

struct SimConfig {
  MixtureParams theta0;
  std::vector<MixtureParams> true_set;  // defaults to {theta0} when empty
  std::vector<ComponentFamily> spec;    // defaults to theta0's families when empty
  std::vector<SieveSchedule> schedules;
  std::vector<std::size_t> n_grid;
  std::size_t reps = 1;
  std::uint64_t seed = 1;
  std::size_t starts = 8;
  FitOptions fit_options;

  void validate() const;
  std::vector<MixtureParams> effective_true_set() const;
  std::vector<ComponentFamily> effective_spec() const;
};

struct SimRow {
  std::size_t schedule_id = 0;
  std::size_t n = 0;
  std::size_t rep = 0;
  std::uint64_t seed = 0;
  double param_dist = 0.0;
  double l1_dist = 0.0;
  double loglik_hat = 0.0;
  double loglik_true = 0.0;
  std::size_t floor_active_count = 0;
  double wall_ms = 0.0;
  double min_sigma_minus_floor = 0.0;
};

struct SimFailure {
  std::size_t schedule_id = 0;
  std::size_t n = 0;
  std::size_t rep = 0;
  std::string message;
};

struct SummaryRow {
  std::size_t schedule_id = 0;
  std::size_t n = 0;
  std::size_t count = 0;
  double median_param_dist = 0.0;
  double median_l1_dist = 0.0;
};

struct SimReport {
  std::vector<SimRow> rows;  // sorted by (schedule, n, rep)
  std::vector<SimFailure> failures;
  std::vector<SummaryRow> summary;
  double spearman_l1_param = 0.0;
};

double median(std::vector<double> values);
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// For every (schedule, n, rep): sample, multi-start fit with theta0
/// injected, record both distances. Throws NumericalError when more than
/// 10% of replications fail.
SimReport run_consistency(const SimConfig& config);

struct FailureDemoConfig {
  MixtureParams theta0;
  std::vector<MixtureParams> true_set;
  SieveSchedule schedule;          // the schedule whose floor the spike uses
  SieveSchedule control_schedule;  // theorem-admissible floor for reference fits
  std::vector<std::size_t> n_grid;
  std::uint64_t seed = 1;
  std::size_t starts = 8;
  FitOptions fit_options;
};

struct FailureRow {
  std::size_t n = 0;
  double log_floor = 0.0;
  double loglik_spike = 0.0;
  double loglik_reference = 0.0;
  double gain = 0.0;  // spike minus reference
  bool spike_superior = false;
  double param_dist_spike = 0.0;
  double param_dist_reference = 0.0;
};

struct FailureReport {
  std::vector<FailureRow> rows;
  /// Smallest grid n from which the spike is superior at every larger grid n.
  std::optional<std::size_t> crossover_n;
};

/// Compares the constructed spike against the best nondegenerate fit
/// (multi-start under the control schedule, theta0 injected). The spike's
/// remaining components come from the best (M-1)-component fit.
FailureReport run_failure_demo(const FailureDemoConfig& config);

struct DegenerateDemoConfig {
  MixtureParams theta0;
  SieveSchedule control_schedule;  // floor for the constrained optimum
  std::size_t n = 50;
  std::uint64_t seed = 1;
  std::size_t halvings = 40;
  std::optional<double> sigma_start;  // defaults to the floor c_n of the control schedule
  std::size_t starts = 8;
  FitOptions fit_options;
};

struct DegenerateDemoReport {
  std::vector<double> data;
  MixtureParams base;  // component 0 at data[0] with weight 1/n
  std::vector<PathPoint> path;
  MixtureParams constrained;
  double constrained_loglik = 0.0;
  double excess = 0.0;  // final path loglik minus the constrained optimum
};

/// Shrinks the scale of a component centered at the first observation and
/// compares against the constrained multi-start optimum. The remaining
/// components come from the best (M-1)-component constrained fit.
DegenerateDemoReport run_degenerate_demo(const DegenerateDemoConfig& config);

}  // namespace sievemix
