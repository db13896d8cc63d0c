#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sievemix/components.hpp"
#include "sievemix/quadrature.hpp"

namespace sievemix {

/// One weighted location-scale component. The scale is stored together with
/// its logarithm so that scales below the double range (spike constructions
/// at exp(-n^2)) keep an exact log value; `sigma` then underflows to 0.
struct Component {
  double alpha = 0.0;
  ComponentFamily family;
  double mu = 0.0;
  double sigma = 1.0;
  double log_sigma = 0.0;

  static Component make(double alpha, ComponentFamily family, double mu, double sigma);
  static Component with_log_scale(double alpha, ComponentFamily family, double mu, double log_sigma);
};

inline constexpr double kWeightTolerance = 1e-12;

class MixtureParams {
 public:
  /// Weights must sum to 1 within kWeightTolerance; they are renormalized.
  static MixtureParams full(std::vector<Component> components);
  /// Weights must sum to at most 1 + kWeightTolerance. May be empty.
  static MixtureParams sub_probability(std::vector<Component> components);

  const std::vector<Component>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }
  const Component& operator[](std::size_t m) const { return components_[m]; }
  bool is_sub_probability() const { return sub_probability_; }
  double weight_sum() const;

  /// Copy with component m replaced; the result is re-validated in the same mode.
  MixtureParams with_component(std::size_t m, const Component& c) const;

 private:
  std::vector<Component> components_;
  bool sub_probability_ = false;
};

/// Nonempty, in-range, duplicate-free set of 0-based component indices.
class SubMixtureSelector {
 public:
  SubMixtureSelector(std::vector<std::size_t> indices, std::size_t mixture_size);
  static SubMixtureSelector all(std::size_t mixture_size);
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::vector<std::size_t> indices_;
};

double mix_density(const MixtureParams& theta, double x);
/// log f(x; theta) by log-sum-exp over components; -inf where the density is 0.
double mix_log_density(const MixtureParams& theta, double x);
/// Sum of log densities; -inf when some point has zero density.
double log_likelihood(const MixtureParams& theta, std::span<const double> data);

double sub_density(const MixtureParams& theta, const SubMixtureSelector& sel, double x);
/// theta restricted to the selected components, as sub-probability parameters.
MixtureParams restrict_to(const MixtureParams& theta, const SubMixtureSelector& sel);

inline constexpr std::size_t kLocalSupCloudSize = 128;

/// Sampled supremum of f(x; theta') over the rho-ball around theta in the
/// (alpha, mu, sigma) coordinates, projected onto valid parameters.
double local_sup_density(const MixtureParams& theta, double rho, double x);

/// Certified window [-R, R] outside of which the mixture has mass <= tail.
double tail_window(const MixtureParams& theta, double tail);
/// Upper bound on the mass of theta outside [-radius, radius].
double tail_mass_outside(const MixtureParams& theta, double radius);
/// Quadrature breakpoints that resolve each component's scale and jumps.
std::vector<double> mixture_breakpoints(const MixtureParams& theta, double lo, double hi);

/// L1 distance between the two densities. The error bar includes the
/// certified tail remainder. Throws ValidationError without envelopes.
IntegralEstimate l1_distance(const MixtureParams& a, const MixtureParams& b);

/// Distance to a finite approximation of the equivalence class: minimum over
/// representatives and same-family label permutations of the Euclidean
/// distance in (alpha, mu, sigma); components with alpha < 1e-10 on both
/// sides contribute only through alpha.
double param_set_distance(const MixtureParams& theta_hat, std::span<const MixtureParams> true_set);

}  // namespace sievemix
