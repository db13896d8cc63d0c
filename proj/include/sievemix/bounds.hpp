#pragma once

// Quantitative objects of the consistency argument for sieve MLE: the
// step-function envelope of a mixture where some scale is small, the width
// bound for its pieces, the tail bound of the true density, the expanding
// radius for sample extremes, the binomial tail inequality, and the
// expected-log separation margin between f0 and reduced mixtures.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sievemix/components.hpp"
#include "sievemix/mixture.hpp"
#include "sievemix/quadrature.hpp"

namespace sievemix {

struct ConditionCheck {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  bool evaluated = false;  // false when an input (theta0, lambda0) is missing
  bool holds = false;
};

struct ContextInputs {
  double kappa0 = 0.0;
  double c0 = 0.0;
  std::size_t M = 1;
  Envelope envelope;
  std::optional<MixtureParams> theta0;
  double A0 = 1.0;
  double zeta = 1.0;
  std::optional<double> lambda0;
};

struct BoundContext {
  double kappa0 = 0.0;
  double c0 = 0.0;
  std::size_t M = 1;
  double v0 = 0.0;
  double v1 = 0.0;
  double beta = 0.0;
  double beta_tilde = 0.0;
  double nu_coefficient = 0.0;  // (v1/kappa0)^(1/beta)
  double v2 = 0.0;
  double B = 0.0;
  double A0 = 1.0;
  double zeta = 1.0;
  std::optional<MixtureParams> theta0;
  std::optional<double> u0;
  std::optional<double> u1;
  std::optional<double> mu_bar0;
  std::vector<ConditionCheck> conditions;
};

/// Shared envelope over families: beta is the smallest tail exponent and v1
/// is recomputed at that exponent where a family's own beta differs.
Envelope combined_envelope(const std::vector<ComponentFamily>& families);

/// Throws ValidationError naming the failed inequality when
/// kappa0 < v0 / (c0 (M + 1)) does not hold.
BoundContext derive_context(const ContextInputs& in);

double nu(const BoundContext& ctx, double y);
double xi(const BoundContext& ctx, double y);

/// sup_x f(x; theta), by grid search and golden-section refinement.
double density_supremum(const MixtureParams& theta);

/// c_n' = c0 exp(-n^(1/4)), in log-space.
double log_c_n_prime(const BoundContext& ctx, std::size_t n);

struct StepPiece {
  double lo = 0.0;
  double hi = 0.0;  // half-open [lo, hi)
  double height = 0.0;
  std::optional<bool> in_tau;  // H <= M v0 / c_n' when n was given
};

struct StepEnvelope {
  std::vector<StepPiece> pieces;
  std::vector<std::pair<double, double>> union_intervals;  // J(theta)
  std::size_t T() const { return pieces.size(); }
};

/// Height of the step bound at x: sum of v0/sigma_m over intervals
/// [mu_m - nu(sigma_m), mu_m + nu(sigma_m)) containing x, plus kappa0.
double step_height_at(const MixtureParams& theta, const BoundContext& ctx, double x);

StepEnvelope step_envelope(const MixtureParams& theta, const BoundContext& ctx,
                           std::optional<std::size_t> n = std::nullopt);

struct SweepRow {
  double at = 0.0;  // x or piece index
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // lhs - rhs; <= 0 means the bound holds
};

struct StepBoundReport {
  bool density_ok = true;
  bool width_ok = true;
  bool count_ok = true;
  bool passes() const { return density_ok && width_ok && count_ok; }
  double worst_density_margin = 0.0;
  double worst_x = 0.0;
  double worst_width_margin = 0.0;
  std::size_t T = 0;
  std::size_t points_checked = 0;
  std::vector<SweepRow> density_rows;
  std::vector<SweepRow> width_rows;
};

/// Checks mix_density <= step height on J, W(J_t) <= xi(H_t) and T <= 2M.
/// The grid is filtered to J and augmented with points inside every piece.
StepBoundReport verify_step_bound(const MixtureParams& theta, const BoundContext& ctx,
                                  const GridSpec& grid, std::size_t points_per_piece = 101);

struct SweepReport {
  bool holds = true;
  double worst_margin = 0.0;
  double worst_x = 0.0;
  std::vector<SweepRow> rows;
};

/// Per-component step bound f_m <= 1_I v0/sigma + kappa0 on a grid.
SweepReport verify_component_step(const ComponentFamily& family, double mu, double sigma,
                                  const BoundContext& ctx, const GridSpec& grid);

/// f(x; theta0) <= min(u0, u1 |x|^-beta) on the grid.
SweepReport verify_true_tail(const MixtureParams& theta0, const BoundContext& ctx, const GridSpec& grid);

/// A_n = A0 n^((2 + zeta)/(beta - 1)).
double extreme_radius(const BoundContext& ctx, std::size_t n);

/// Fraction of `reps` samples of size n whose minimum is below -A_n or whose
/// maximum exceeds A_n.
double extreme_exceedance_mc(const MixtureParams& theta0, const BoundContext& ctx, std::size_t n,
                             std::size_t reps, std::uint64_t seed);

struct OkamotoResult {
  double exact_tail = 0.0;
  double bound = 0.0;
};

/// Exact P(X/n - p > eps) for X ~ Bin(n, p), summed in log-space, and the
/// bound exp(-2 n eps^2).
OkamotoResult okamoto_bound(std::size_t n, double p, double eps);

/// E0[log f0] - E0[log(g + kappa)], integrated against f0 on a certified
/// window. Throws NumericalError when kappa = 0 and g vanishes where f0 has
/// mass, and when the integrability check on |log f0| f0 fails.
IntegralEstimate kl_margin(const MixtureParams& theta0, const MixtureParams& g, double kappa);

struct CandidateGrid {
  std::vector<double> weights;    // per-component weight values (sum <= 1 enforced)
  double loc_lo = 0.0;
  double loc_hi = 0.0;
  std::size_t loc_count = 0;
  double log_scale_lo = 0.0;      // natural log of the smallest scale
  double log_scale_hi = 0.0;
  std::size_t scale_count = 0;
  bool include_extremes = true;   // near-degenerate and near-flat scales
  std::size_t max_candidates = 20000;

  /// A grid spanning the support of theta0 with roughly `target` candidates
  /// per reduced component.
  static CandidateGrid around(const MixtureParams& theta0, std::size_t target);
};

struct MarginScanReport {
  double min_margin = 0.0;
  std::size_t argmin_index = 0;
  std::optional<MixtureParams> argmin;
  std::size_t candidates = 0;
  std::string label;
};

/// Candidate (M-1)-component sub-probability mixtures built from the grid.
/// Families are taken from theta0's first M-1 components. When the product
/// grid exceeds max_candidates a seeded subset is drawn.
std::vector<MixtureParams> margin_candidates(const MixtureParams& theta0, const CandidateGrid& grid,
                                             std::uint64_t seed);

MarginScanReport margin_scan(const MixtureParams& theta0, double kappa,
                             const std::vector<MixtureParams>& candidates);
MarginScanReport margin_scan(const MixtureParams& theta0, double kappa, const CandidateGrid& grid,
                             std::uint64_t seed);

}  // namespace sievemix
