#include "sievemix/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "sievemix/errors.hpp"
#include "sievemix/lowdisc.hpp"

namespace sievemix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_components(const std::vector<Component>& comps) {
  for (std::size_t m = 0; m < comps.size(); ++m) {
    const auto& c = comps[m];
    if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) {
      throw ValidationError("component " + std::to_string(m) + " has invalid weight");
    }
    if (!std::isfinite(c.mu)) throw ValidationError("component " + std::to_string(m) + " has non-finite location");
    if (!std::isfinite(c.log_sigma)) {
      throw ValidationError("component " + std::to_string(m) + " has invalid scale");
    }
  }
}

double weighted_component(const Component& c, double x) {
  if (c.alpha == 0.0) return 0.0;
  if (c.sigma > 0.0) return c.alpha * c.family.density((x - c.mu) / c.sigma) / c.sigma;
  return c.alpha * std::exp(component_log_density(c.family, c.mu, c.log_sigma, x));
}

}  // namespace

Component Component::make(double alpha, ComponentFamily family, double mu, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("component scale must be positive");
  return Component{alpha, std::move(family), mu, sigma, std::log(sigma)};
}

Component Component::with_log_scale(double alpha, ComponentFamily family, double mu, double log_sigma) {
  if (!std::isfinite(log_sigma)) throw ValidationError("log scale must be finite");
  return Component{alpha, std::move(family), mu, std::exp(log_sigma), log_sigma};
}

MixtureParams MixtureParams::full(std::vector<Component> components) {
  if (components.empty()) throw ValidationError("a full mixture needs at least one component");
  validate_components(components);
  double total = 0.0;
  for (const auto& c : components) total += c.alpha;
  if (std::abs(total - 1.0) > kWeightTolerance) {
    throw ValidationError("mixture weights sum to " + std::to_string(total) + ", not 1");
  }
  if (total != 1.0) {
    for (auto& c : components) c.alpha /= total;
  }
  MixtureParams p;
  p.components_ = std::move(components);
  return p;
}

MixtureParams MixtureParams::sub_probability(std::vector<Component> components) {
  validate_components(components);
  double total = 0.0;
  for (const auto& c : components) total += c.alpha;
  if (total > 1.0 + kWeightTolerance) {
    throw ValidationError("sub-probability weights sum to " + std::to_string(total) + " > 1");
  }
  MixtureParams p;
  p.components_ = std::move(components);
  p.sub_probability_ = true;
  return p;
}

double MixtureParams::weight_sum() const {
  double total = 0.0;
  for (const auto& c : components_) total += c.alpha;
  return total;
}

MixtureParams MixtureParams::with_component(std::size_t m, const Component& c) const {
  if (m >= components_.size()) throw ValidationError("component index out of range");
  auto comps = components_;
  comps[m] = c;
  return sub_probability_ ? sub_probability(std::move(comps)) : full(std::move(comps));
}

SubMixtureSelector::SubMixtureSelector(std::vector<std::size_t> indices, std::size_t mixture_size)
    : indices_(std::move(indices)) {
  if (indices_.empty()) throw ValidationError("selector must be nonempty");
  auto sorted = indices_;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ValidationError("selector has duplicate indices");
  }
  if (sorted.back() >= mixture_size) throw ValidationError("selector index out of range");
}

SubMixtureSelector SubMixtureSelector::all(std::size_t mixture_size) {
  std::vector<std::size_t> idx(mixture_size);
  std::iota(idx.begin(), idx.end(), 0);
  return SubMixtureSelector(std::move(idx), mixture_size);
}

double mix_density(const MixtureParams& theta, double x) {
  double total = 0.0;
  for (const auto& c : theta.components()) total += weighted_component(c, x);
  return total;
}

double mix_log_density(const MixtureParams& theta, double x) {
  double terms[64];
  std::vector<double> heap;
  double* t = terms;
  if (theta.size() > 64) {
    heap.resize(theta.size());
    t = heap.data();
  }
  double top = -kInf;
  std::size_t k = 0;
  for (const auto& c : theta.components()) {
    if (c.alpha <= 0.0) continue;
    double v = std::log(c.alpha) + component_log_density(c.family, c.mu, c.log_sigma, x);
    t[k++] = v;
    top = std::max(top, v);
  }
  if (top == -kInf) return -kInf;
  if (top == kInf) return kInf;
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::exp(t[i] - top);
  return top + std::log(s);
}

double log_likelihood(const MixtureParams& theta, std::span<const double> data) {
  if (data.empty()) throw ValidationError("log-likelihood needs at least one observation");
  double total = 0.0;
  for (double x : data) {
    double v = mix_log_density(theta, x);
    if (v == -kInf) return -kInf;
    total += v;
  }
  return total;
}

double sub_density(const MixtureParams& theta, const SubMixtureSelector& sel, double x) {
  double total = 0.0;
  for (std::size_t m : sel.indices()) {
    if (m >= theta.size()) throw ValidationError("selector index out of range");
    total += weighted_component(theta[m], x);
  }
  return total;
}

MixtureParams restrict_to(const MixtureParams& theta, const SubMixtureSelector& sel) {
  std::vector<Component> comps;
  for (std::size_t m : sel.indices()) {
    if (m >= theta.size()) throw ValidationError("selector index out of range");
    comps.push_back(theta[m]);
  }
  return MixtureParams::sub_probability(std::move(comps));
}

double local_sup_density(const MixtureParams& theta, double rho, double x) {
  if (!(rho > 0.0)) throw ValidationError("ball radius must be positive");
  const std::size_t m_count = theta.size();
  const std::size_t dim = 3 * m_count;
  if (dim == 0) return 0.0;

  std::vector<std::vector<double>> cloud;
  cloud.reserve(kLocalSupCloudSize);
  if (2 * dim + 1 <= kLocalSupCloudSize) {
    for (std::size_t k = 0; k < dim; ++k) {
      for (double sign : {1.0, -1.0}) {
        std::vector<double> v(dim, 0.0);
        v[k] = sign;
        cloud.push_back(std::move(v));
      }
    }
  }
  for (std::size_t i = 1; cloud.size() + 1 < kLocalSupCloudSize; ++i) {
    auto v = lowdisc::halton(i, dim);
    double norm = 0.0;
    for (auto& e : v) {
      e = 2.0 * e - 1.0;
      norm += e * e;
    }
    norm = std::sqrt(norm);
    if (norm > 1.0) {
      for (auto& e : v) e /= norm;
    }
    cloud.push_back(std::move(v));
  }

  double best = mix_density(theta, x);
  std::vector<double> alpha(m_count), mu(m_count), sigma(m_count);
  for (const auto& v : cloud) {
    double wsum = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      const auto& c = theta[m];
      alpha[m] = std::max(0.0, c.alpha + rho * v[3 * m]);
      mu[m] = c.mu + rho * v[3 * m + 1];
      sigma[m] = std::max(c.sigma + rho * v[3 * m + 2], 1e-12);
      wsum += alpha[m];
    }
    if (!theta.is_sub_probability()) {
      if (!(wsum > 0.0)) continue;
      for (auto& a : alpha) a /= wsum;
    } else if (wsum > 1.0) {
      for (auto& a : alpha) a /= wsum;
    }
    double total = 0.0;
    for (std::size_t m = 0; m < m_count; ++m) {
      if (alpha[m] > 0.0) total += alpha[m] * theta[m].family.density((x - mu[m]) / sigma[m]) / sigma[m];
    }
    best = std::max(best, total);
  }
  return best;
}

double tail_mass_outside(const MixtureParams& theta, double radius) {
  double total = 0.0;
  for (const auto& c : theta.components()) {
    if (c.alpha == 0.0) continue;
    double room = radius - std::abs(c.mu);
    if (!(room > 0.0)) {
      total += c.alpha;
      continue;
    }
    double t = c.family.tail_mass_bound(room * std::exp(-c.log_sigma));
    if (!std::isfinite(t)) {
      throw ValidationError("family '" + c.family.name() + "' has no envelope; tail cannot be certified");
    }
    total += c.alpha * t;
  }
  return total;
}

double tail_window(const MixtureParams& theta, double tail) {
  double hi = 1.0;
  for (const auto& c : theta.components()) hi = std::max(hi, std::abs(c.mu) + c.sigma);
  int doublings = 0;
  while (tail_mass_outside(theta, hi) > tail) {
    hi *= 2.0;
    if (++doublings > 400) throw NumericalError("could not certify a finite integration window");
  }
  double lo = hi / 2.0;
  if (doublings == 0) return hi;
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (lo + hi);
    if (tail_mass_outside(theta, mid) > tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

std::vector<double> mixture_breakpoints(const MixtureParams& theta, double lo, double hi) {
  std::vector<double> pts{lo, hi};
  const double span = hi - lo;
  auto add = [&](double x) {
    if (x > lo && x < hi) pts.push_back(x);
  };
  for (const auto& c : theta.components()) {
    add(c.mu);
    for (double d : c.family.discontinuities()) add(c.mu + c.sigma * d);
    if (!(c.sigma > 0.0)) continue;
    for (double k = 0.5; c.sigma * k <= 2.0 * span; k *= 2.0) {
      add(c.mu - c.sigma * k);
      add(c.mu + c.sigma * k);
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

IntegralEstimate l1_distance(const MixtureParams& a, const MixtureParams& b) {
  if (a.is_sub_probability() || b.is_sub_probability()) {
    throw ValidationError("l1_distance expects full mixtures");
  }
  constexpr double kTail = 5e-10;
  double radius = std::max(tail_window(a, kTail), tail_window(b, kTail));
  auto pa = mixture_breakpoints(a, -radius, radius);
  auto pb = mixture_breakpoints(b, -radius, radius);
  pa.insert(pa.end(), pb.begin(), pb.end());
  auto est = integrate_panels([&](double x) { return std::abs(mix_density(a, x) - mix_density(b, x)); },
                              std::move(pa));
  est.error += tail_mass_outside(a, radius) + tail_mass_outside(b, radius);
  est.value = std::clamp(est.value, 0.0, 2.0);
  return est;
}

double param_set_distance(const MixtureParams& theta_hat, std::span<const MixtureParams> true_set) {
  if (true_set.empty()) throw ValidationError("true set must contain at least one representative");
  const std::size_t m_count = theta_hat.size();
  if (m_count > 10) throw ValidationError("param_set_distance enumerates permutations; M must be <= 10");
  constexpr double kNegligible = 1e-10;

  double best = kInf;
  std::vector<std::size_t> perm(m_count);
  for (const auto& rep : true_set) {
    if (rep.size() != m_count) throw ValidationError("parameter vectors have different numbers of components");
    std::iota(perm.begin(), perm.end(), 0);
    do {
      double sq = 0.0;
      bool valid = true;
      for (std::size_t i = 0; i < m_count && valid; ++i) {
        const auto& h = theta_hat[i];
        const auto& t = rep[perm[i]];
        if (!h.family.same_family_as(t.family)) {
          valid = false;
          break;
        }
        double da = h.alpha - t.alpha;
        sq += da * da;
        if (h.alpha < kNegligible && t.alpha < kNegligible) continue;
        double dm = h.mu - t.mu;
        double ds = h.sigma - t.sigma;
        sq += dm * dm + ds * ds;
      }
      if (valid) best = std::min(best, std::sqrt(sq));
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
  return best;
}

}  // namespace sievemix
