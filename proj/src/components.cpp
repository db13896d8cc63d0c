#include "sievemix/components.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>

#include "sievemix/errors.hpp"
#include "sievemix/lowdisc.hpp"

namespace sievemix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
const double kLogSqrt2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

void validate_envelope(const Envelope& env) {
  if (!(env.v0 > 0.0) || !std::isfinite(env.v0)) throw ValidationError("envelope v0 must be positive and finite");
  if (!(env.v1 > 0.0) || !std::isfinite(env.v1)) throw ValidationError("envelope v1 must be positive and finite");
  if (!(env.beta > 1.0) || !std::isfinite(env.beta)) throw ValidationError("envelope beta must exceed 1");
}

// Golden-section maximization of f on [a, b].
template <class F>
std::pair<double, double> golden_max(F&& f, double a, double b, int iters = 200) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < iters && (b - a) > 1e-15 * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  double fa = f(a), fb = f(b);
  double best_x = c, best_f = fc;
  for (auto [x, fx] : {std::pair{d, fd}, std::pair{a, fa}, std::pair{b, fb}}) {
    if (fx > best_f) {
      best_f = fx;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

// Grid that is fine near the origin and geometric out to +-reach.
std::vector<double> search_grid(double reach) {
  std::vector<double> grid;
  constexpr int kLinear = 8001;
  constexpr int kGeometric = 4000;
  grid.reserve(kLinear + 2 * kGeometric);
  for (int i = 0; i < kLinear; ++i) grid.push_back(-4.0 + 8.0 * i / (kLinear - 1));
  const double lo = std::log(1e-3);
  const double hi = std::log(reach);
  for (int i = 0; i < kGeometric; ++i) {
    double z = std::exp(lo + (hi - lo) * i / (kGeometric - 1));
    grid.push_back(z);
    grid.push_back(-z);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

template <class F>
double grid_sup(F&& f, const std::vector<double>& grid) {
  std::size_t best = 0;
  double best_f = -kInf;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double v = f(grid[i]);
    if (v > best_f) {
      best_f = v;
      best = i;
    }
  }
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, grid.size() - 1)];
  auto [x, refined] = golden_max(f, a, b);
  (void)x;
  return std::max(best_f, refined);
}

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::normal: return "normal";
    case FamilyKind::student_t: return "student_t";
    case FamilyKind::uniform: return "uniform";
    case FamilyKind::custom: return "custom";
  }
  return "unknown";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "normal") return FamilyKind::normal;
  if (name == "student_t" || name == "t") return FamilyKind::student_t;
  if (name == "uniform") return FamilyKind::uniform;
  if (name == "custom") return FamilyKind::custom;
  throw ValidationError("unknown family kind '" + name + "'");
}

ComponentFamily ComponentFamily::normal(double beta) {
  ComponentFamily f;
  f.kind_ = FamilyKind::normal;
  f.name_ = "normal";
  f.envelope_ = derive_envelope(f, beta);
  f.origin_ = EnvelopeOrigin::numerical;
  return f;
}

ComponentFamily ComponentFamily::student_t(double dof, std::optional<double> beta) {
  if (!(dof > 0.0) || !std::isfinite(dof)) throw ValidationError("student_t dof must be positive");
  ComponentFamily f;
  f.kind_ = FamilyKind::student_t;
  f.dof_ = dof;
  f.name_ = "student_t";
  f.t_log_norm_ = std::lgamma((dof + 1.0) / 2.0) - 0.5 * std::log(dof * std::numbers::pi) -
                  std::lgamma(dof / 2.0);
  f.envelope_ = derive_envelope(f, beta.value_or(std::min(2.0, dof + 1.0)));
  f.origin_ = EnvelopeOrigin::numerical;
  return f;
}

ComponentFamily ComponentFamily::uniform(double beta) {
  if (!(beta > 1.0)) throw ValidationError("envelope beta must exceed 1");
  ComponentFamily f;
  f.kind_ = FamilyKind::uniform;
  f.name_ = "uniform";
  // sup over |z| <= 1/2 of |z|^beta is 2^-beta, attained at the closed end.
  f.envelope_ = Envelope{1.0, std::pow(2.0, -beta), beta};
  f.origin_ = EnvelopeOrigin::exact;
  return f;
}

ComponentFamily ComponentFamily::custom(std::string name, Density density,
                                        std::optional<Envelope> envelope) {
  if (!density) throw ValidationError("custom family requires a density function");
  ComponentFamily f;
  f.kind_ = FamilyKind::custom;
  f.name_ = std::move(name);
  f.custom_ = std::make_shared<const Density>(std::move(density));
  if (envelope) {
    validate_envelope(*envelope);
    f.envelope_ = envelope;
    f.origin_ = EnvelopeOrigin::user_supplied;
  }
  return f;
}

ComponentFamily ComponentFamily::with_envelope(const Envelope& env) const {
  validate_envelope(env);
  ComponentFamily f = *this;
  f.envelope_ = env;
  f.origin_ = EnvelopeOrigin::user_supplied;
  return f;
}

ComponentFamily ComponentFamily::with_derived_envelope(double beta) const {
  ComponentFamily f = *this;
  f.envelope_ = derive_envelope(*this, beta);
  f.origin_ = EnvelopeOrigin::numerical;
  return f;
}

const Envelope& ComponentFamily::envelope() const {
  if (!envelope_) throw ValidationError("family '" + name_ + "' has no envelope constants");
  return *envelope_;
}

double ComponentFamily::density(double z) const {
  switch (kind_) {
    case FamilyKind::normal:
      return std::exp(-0.5 * z * z - kLogSqrt2Pi);
    case FamilyKind::student_t:
      return std::exp(log_density(z));
    case FamilyKind::uniform:
      return (z >= -0.5 && z < 0.5) ? 1.0 : 0.0;
    case FamilyKind::custom: {
      double v = (*custom_)(z);
      return (v > 0.0 && std::isfinite(v)) ? v : 0.0;
    }
  }
  return 0.0;
}

double ComponentFamily::log_density(double z) const {
  switch (kind_) {
    case FamilyKind::normal:
      return -0.5 * z * z - kLogSqrt2Pi;
    case FamilyKind::student_t:
      return t_log_norm_ - 0.5 * (dof_ + 1.0) * std::log1p(z * z / dof_);
    case FamilyKind::uniform:
      return (z >= -0.5 && z < 0.5) ? 0.0 : -kInf;
    case FamilyKind::custom: {
      double v = density(z);
      return v > 0.0 ? std::log(v) : -kInf;
    }
  }
  return -kInf;
}

double ComponentFamily::tail_mass_bound(double z) const {
  if (!(z > 0.0)) return 1.0;
  switch (kind_) {
    case FamilyKind::normal:
      return std::erfc(z / std::numbers::sqrt2);
    case FamilyKind::student_t: {
      if (!std::isfinite(z)) return 0.0;
      boost::math::students_t dist(dof_);
      return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, z)));
    }
    case FamilyKind::uniform:
      return z >= 0.5 ? 0.0 : 1.0 - 2.0 * z;
    case FamilyKind::custom:
      break;
  }
  if (!envelope_) return kInf;
  const auto& e = *envelope_;
  return std::min(1.0, 2.0 * e.v1 * std::pow(z, 1.0 - e.beta) / (e.beta - 1.0));
}

std::vector<double> ComponentFamily::discontinuities() const {
  if (kind_ == FamilyKind::uniform) return {-0.5, 0.5};
  return {};
}

bool ComponentFamily::same_family_as(const ComponentFamily& other) const {
  if (kind_ != other.kind_) return false;
  switch (kind_) {
    case FamilyKind::student_t: return dof_ == other.dof_;
    case FamilyKind::custom: return custom_ == other.custom_;
    default: return true;
  }
}

double standardized_density(const ComponentFamily& family, double z) { return family.density(z); }

double component_density(const ComponentFamily& family, double mu, double sigma, double x) {
  if (!(sigma > 0.0)) throw ValidationError("component scale must be positive");
  return family.density((x - mu) / sigma) / sigma;
}

double component_log_density(const ComponentFamily& family, double mu, double log_sigma,
                             double x) {
  if (x == mu) return family.log_density(0.0) - log_sigma;
  // exp(-log_sigma) may overflow to inf, giving z = +-inf and log f = -inf.
  double z = (x - mu) * std::exp(-log_sigma);
  return family.log_density(z) - log_sigma;
}

Envelope derive_envelope(const ComponentFamily& family, double beta) {
  if (!(beta > 1.0) || !std::isfinite(beta)) throw ValidationError("envelope beta must exceed 1");
  auto f = [&](double z) { return family.density(z); };

  const double v0 = grid_sup(f, search_grid(64.0));
  if (!(v0 > 0.0) || !std::isfinite(v0)) {
    throw NumericalError("standardized density is not bounded or vanishes on the search grid");
  }

  auto tail = [&](double z) {
    double fz = family.density(z);
    return fz > 0.0 ? std::exp(beta * std::log(std::abs(z)) + std::log(fz)) : 0.0;
  };
  constexpr int kMaxDepth = 24;
  double previous = -1.0;
  double v1 = -1.0;
  for (int depth = 0; depth <= kMaxDepth; ++depth) {
    double reach = 8.0 * std::ldexp(1.0, depth);
    v1 = grid_sup(tail, search_grid(reach));
    if (depth > 0 && std::abs(v1 - previous) <= 1e-9 * v1) break;
    if (depth == kMaxDepth) {
      throw NumericalError("tail supremum of |z|^beta f(z) did not stabilize; beta is too large "
                           "for this family's tail");
    }
    previous = v1;
  }
  return Envelope{v0 * (1.0 + kEnvelopeSafetyMargin), v1 * (1.0 + kEnvelopeSafetyMargin), beta};
}

std::vector<double> GridSpec::points() const {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> xs(count);
  for (std::size_t i = 0; i < count; ++i) {
    xs[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return xs;
}

EnvelopeReport check_envelope(const ComponentFamily& family, const GridSpec& grid) {
  const Envelope& env = family.envelope();
  EnvelopeReport report;
  report.worst_margin = -kInf;
  for (double x : grid.points()) {
    double bound = x == 0.0 ? env.v0 : std::min(env.v0, env.v1 * std::pow(std::abs(x), -env.beta));
    double margin = family.density(x) - bound;
    if (margin > report.worst_margin) {
      report.worst_margin = margin;
      report.worst_x = x;
    }
  }
  report.holds = report.worst_margin <= 0.0;
  return report;
}

RegularityReport check_regularity(const ComponentFamily& family,
                                  const std::vector<std::pair<double, double>>& param_grid,
                                  const std::vector<double>& radii) {
  if (param_grid.empty()) throw ValidationError("regularity check needs at least one (mu, sigma)");
  if (radii.empty()) throw ValidationError("regularity check needs at least one radius");
  for (std::size_t k = 0; k < radii.size(); ++k) {
    if (!(radii[k] >= 1e-8)) throw ValidationError("perturbation radii must be >= 1e-8");
    if (k > 0 && !(radii[k] < radii[k - 1])) {
      throw ValidationError("perturbation radii must be strictly decreasing");
    }
  }

  // Unit-disk cloud: center, the four axis points, then Halton fill.
  std::vector<std::pair<double, double>> disk;
  disk.reserve(kRegularityBallPoints);
  disk.emplace_back(0.0, 0.0);
  disk.emplace_back(1.0, 0.0);
  disk.emplace_back(-1.0, 0.0);
  disk.emplace_back(0.0, 1.0);
  disk.emplace_back(0.0, -1.0);
  for (std::size_t i = 1; disk.size() < kRegularityBallPoints; ++i) {
    double r = std::sqrt(lowdisc::radical_inverse(i, 2));
    double angle = 2.0 * std::numbers::pi * lowdisc::radical_inverse(i, 3);
    disk.emplace_back(r * std::cos(angle), r * std::sin(angle));
  }

  static constexpr double kOffsets[] = {-2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0};
  const auto jumps = family.discontinuities();

  RegularityReport report;
  for (auto [mu, sigma] : param_grid) {
    if (!(sigma > 0.0)) throw ValidationError("regularity grid scales must be positive");
    std::vector<double> offsets(std::begin(kOffsets), std::end(kOffsets));
    offsets.insert(offsets.end(), jumps.begin(), jumps.end());
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());

    for (double offset : offsets) {
      RegularityPoint pt;
      pt.mu = mu;
      pt.sigma = sigma;
      pt.x = mu + sigma * offset;
      pt.density = component_density(family, mu, sigma, pt.x);
      pt.at_known_discontinuity =
          std::any_of(jumps.begin(), jumps.end(), [&](double j) { return std::abs(j - offset) < 1e-12; });

      // Cumulative from the smallest ball outward: every sampled point of a
      // smaller ball also lies in the larger one.
      pt.ball_sup.assign(radii.size(), pt.density);
      double running = pt.density;
      for (std::size_t k = radii.size(); k-- > 0;) {
        for (auto [dm, ds] : disk) {
          double s = std::max(sigma + radii[k] * ds, 1e-12);
          running = std::max(running, component_density(family, mu + radii[k] * dm, s, pt.x));
        }
        pt.ball_sup[k] = running;
      }
      for (std::size_t k = 1; k < radii.size(); ++k) {
        if (pt.ball_sup[k] > pt.ball_sup[k - 1] + 1e-10) pt.monotone = false;
      }
      double gap_first = pt.ball_sup.front() - pt.density;
      double gap_last = pt.ball_sup.back() - pt.density;
      double tol = 1e-9 * std::max(1.0, pt.density);
      if (radii.size() > 1) {
        pt.converges = gap_last <= tol || gap_last <= gap_first * std::sqrt(radii.back() / radii.front());
      }
      report.comparisons += radii.size();
      bool ok = pt.monotone && pt.converges;
      if (!ok) {
        ++report.failures;
        if (!pt.at_known_discontinuity) report.passes = false;
      }
      report.points.push_back(std::move(pt));
    }
  }
  return report;
}

}  // namespace sievemix
