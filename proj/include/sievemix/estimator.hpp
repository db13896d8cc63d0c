#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sievemix/components.hpp"
#include "sievemix/mixture.hpp"

namespace sievemix {

/// Scale floor c_n = c0 * exp(-n^d). An override exponent replaces d for
/// failure-mode studies (d' > 0, typically > 1).
struct SieveSchedule {
  double c0 = 1.0;
  double d = 0.5;
  std::optional<double> override_exponent;

  /// Throws ValidationError unless c0 > 0 and 0 < d < 1 (or a valid override).
  void validate() const;
  double exponent() const { return override_exponent.value_or(d); }
};

struct ScaleFloor {
  double value = 0.0;      // may underflow to 0
  double log_value = 0.0;  // exact in log-space
};

ScaleFloor sieve_floor(const SieveSchedule& schedule, std::size_t n);

/// Called after every iteration with the current feasible iterate.
using FitObserver = std::function<void(std::size_t iteration, const MixtureParams&, double loglik)>;

struct FitOptions {
  std::size_t max_iter = 500;
  double tol = 1e-8;
  FitObserver observer;
};

struct FitResult {
  MixtureParams theta_hat;
  double loglik = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<bool> floor_active;
  std::size_t n = 0;
  ScaleFloor floor;
  std::size_t start_index = 0;
  std::vector<std::string> warnings;
};

/// Maximum likelihood over {sigma_m >= c_n}: EM with a clamped variance update
/// for all-normal specs, Nelder-Mead on sigma = c_n + exp(s) and softmax
/// weights otherwise. The returned loglik never falls below loglik(init).
FitResult fit(std::span<const double> data, const std::vector<ComponentFamily>& spec,
              const SieveSchedule& schedule, const MixtureParams& init, const FitOptions& opts = {});

/// Deterministic initialization `start` of the multi-start ladder.
MixtureParams canonical_init(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                             double floor, std::size_t start, std::uint64_t seed);

/// Best of `starts` canonical initializations plus any extra initializations
/// (which are tried after the canonical ones). Ties go to the lowest index.
FitResult multi_start_fit(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                          const SieveSchedule& schedule, std::size_t starts, std::uint64_t seed,
                          const FitOptions& opts = {},
                          const std::vector<MixtureParams>& extra_inits = {});

struct PathPoint {
  double sigma = 0.0;
  double log_sigma = 0.0;
  double loglik = 0.0;
};

/// Unconstrained log-likelihood as the scale of component m shrinks along
/// `sigma_seq` (strictly decreasing, positive). No floor is applied.
std::vector<PathPoint> degenerate_path(std::span<const double> data, const MixtureParams& base,
                                       std::size_t m, std::span<const double> sigma_seq);

/// Adversarial parameter: component 0 has weight 1/n at data[0] with scale
/// c_n (kept in log-space); components 1..M-1 copy the donor's, rescaled to
/// total weight 1 - 1/n.
MixtureParams spike_params(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                           const SieveSchedule& schedule, std::size_t n, const MixtureParams& donor);

}  // namespace sievemix
