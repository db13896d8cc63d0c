#pragma once

// Standardized location-scale component families and their tail envelopes.
//
// Every family is described by its standardized density f(z; 0, 1). The
// envelope triple (v0, v1, beta) certifies f(z) <= min(v0, v1 |z|^-beta),
// which is what makes truncated integrals and the step-function bounds in
// bounds.hpp rigorous.

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace sievemix {

enum class FamilyKind { normal, student_t, uniform, custom };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

struct Envelope {
  double v0 = 0.0;
  double v1 = 0.0;
  double beta = 0.0;
};

/// How the envelope constants of a family were obtained.
enum class EnvelopeOrigin { exact, numerical, user_supplied };

class ComponentFamily {
 public:
  using Density = std::function<double(double)>;

  /// Standard normal. Envelope derived numerically at the given tail exponent.
  static ComponentFamily normal(double beta = 2.0);
  /// Textbook Student-t with `dof` degrees of freedom (not unit variance).
  /// beta defaults to min(2, dof + 1).
  static ComponentFamily student_t(double dof, std::optional<double> beta = std::nullopt);
  /// U(-1/2, 1/2): mu is the center and sigma the width.
  static ComponentFamily uniform(double beta = 2.0);
  /// Arbitrary standardized density. Without an explicit envelope the family
  /// carries none until with_derived_envelope() is called.
  static ComponentFamily custom(std::string name, Density density,
                                std::optional<Envelope> envelope = std::nullopt);

  /// Replace the envelope by user-supplied constants (validated).
  ComponentFamily with_envelope(const Envelope& env) const;
  /// Replace the envelope by derive_envelope(*this, beta); flagged numerical.
  ComponentFamily with_derived_envelope(double beta) const;

  FamilyKind kind() const { return kind_; }
  double dof() const { return dof_; }
  const std::string& name() const { return name_; }
  bool has_envelope() const { return envelope_.has_value(); }
  /// Throws ValidationError when no envelope is attached.
  const Envelope& envelope() const;
  EnvelopeOrigin envelope_origin() const { return origin_; }

  double density(double z) const;
  double log_density(double z) const;

  /// Upper bound on P(|Z| > z) for z >= 0: the exact tail when a closed form
  /// exists, otherwise the envelope tail integral 2 v1 z^(1-beta) / (beta-1).
  /// Returns +inf when neither is available.
  double tail_mass_bound(double z) const;

  /// Standardized points where the density is discontinuous (uniform support
  /// endpoints). Empty for continuous families.
  std::vector<double> discontinuities() const;

  /// Same kind and parameters; used for label permutations.
  bool same_family_as(const ComponentFamily& other) const;

 private:
  ComponentFamily() = default;

  FamilyKind kind_ = FamilyKind::normal;
  double dof_ = 0.0;
  double t_log_norm_ = 0.0;
  std::string name_;
  std::shared_ptr<const Density> custom_;
  std::optional<Envelope> envelope_;
  EnvelopeOrigin origin_ = EnvelopeOrigin::exact;
};

double standardized_density(const ComponentFamily& family, double z);

/// (1/sigma) f((x - mu)/sigma). Throws ValidationError unless sigma > 0.
double component_density(const ComponentFamily& family, double mu, double sigma, double x);

/// Log of the component density with the scale given by its logarithm, so
/// scales far below the smallest double (e.g. exp(-3600)) remain usable.
double component_log_density(const ComponentFamily& family, double mu, double log_sigma,
                             double x);

/// Relative inflation applied to numerically derived envelope constants.
inline constexpr double kEnvelopeSafetyMargin = 1e-6;

/// Numerical sup f and sup |z|^beta f, each inflated by kEnvelopeSafetyMargin.
/// Throws NumericalError when the tail supremum does not stabilize (beta
/// larger than the family's tail allows).
Envelope derive_envelope(const ComponentFamily& family, double beta);

struct GridSpec {
  double lo = -50.0;
  double hi = 50.0;
  std::size_t count = 10001;

  std::vector<double> points() const;
};

struct EnvelopeReport {
  bool holds = true;
  double worst_margin = 0.0;
  double worst_x = 0.0;
};

EnvelopeReport check_envelope(const ComponentFamily& family, const GridSpec& grid);

struct RegularityPoint {
  double mu = 0.0;
  double sigma = 0.0;
  double x = 0.0;
  double density = 0.0;
  std::vector<double> ball_sup;  // one per radius, largest radius first
  bool monotone = true;
  bool converges = true;
  bool at_known_discontinuity = false;
};

struct RegularityReport {
  std::vector<RegularityPoint> points;
  std::size_t comparisons = 0;
  std::size_t failures = 0;
  /// True when every failing point is a known discontinuity of the family
  /// (a null set, which pointwise continuity a.e. tolerates).
  bool passes = true;
  std::string measurability = "not machine-checkable";
};

inline constexpr std::size_t kRegularityBallPoints = 64;

/// Sampled surrogate for continuity in (mu, sigma): ball suprema over a
/// deterministic Halton cloud must shrink toward the point value.
RegularityReport check_regularity(const ComponentFamily& family,
                                  const std::vector<std::pair<double, double>>& param_grid,
                                  const std::vector<double>& radii);

}  // namespace sievemix
