#include "sievemix/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>

#include "sievemix/errors.hpp"

namespace sievemix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

bool all_normal(const std::vector<ComponentFamily>& spec) {
  return std::all_of(spec.begin(), spec.end(),
                     [](const ComponentFamily& f) { return f.kind() == FamilyKind::normal; });
}

FitResult finish(MixtureParams theta, double loglik, std::size_t iterations, bool converged,
                 std::size_t n, ScaleFloor floor) {
  FitResult r{std::move(theta), loglik, iterations, converged, {}, n, floor, 0, {}};
  for (std::size_t m = 0; m < r.theta_hat.size(); ++m) {
    const auto& c = r.theta_hat[m];
    r.floor_active.push_back(c.sigma - floor.value <= 1e-12);
    if (c.alpha < 1e-6) {
      r.warnings.push_back("component " + std::to_string(m) +
                           " has weight below 1e-6; the data may support fewer components");
    }
  }
  return r;
}

// EM for all-normal mixtures. The variance update is clamped at c_n^2, which
// is the exact constrained maximizer of the M-step objective in sigma.
FitResult fit_em(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                 const MixtureParams& init, ScaleFloor floor, const FitOptions& opts) {
  const std::size_t n = data.size();
  const std::size_t M = spec.size();
  const double log_sqrt_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  std::vector<double> alpha(M), mu(M), sigma(M);
  for (std::size_t m = 0; m < M; ++m) {
    alpha[m] = init[m].alpha;
    mu[m] = init[m].mu;
    sigma[m] = init[m].sigma;
  }
  std::vector<double> resp(n * M);
  std::vector<double> logw(M);
  std::vector<double> log_sigma(M);

  auto estep = [&]() {
    double ll = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
      logw[m] = alpha[m] > 0.0 ? std::log(alpha[m]) : -kInf;
      log_sigma[m] = std::log(sigma[m]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      double* r = &resp[i * M];
      double top = -kInf;
      for (std::size_t m = 0; m < M; ++m) {
        double z = (data[i] - mu[m]) / sigma[m];
        r[m] = logw[m] - 0.5 * z * z - log_sigma[m] - log_sqrt_2pi;
        top = std::max(top, r[m]);
      }
      double s = 0.0;
      for (std::size_t m = 0; m < M; ++m) {
        r[m] = std::exp(r[m] - top);
        s += r[m];
      }
      for (std::size_t m = 0; m < M; ++m) r[m] /= s;
      ll += top + std::log(s);
    }
    return ll;
  };
  auto snapshot = [&]() {
    std::vector<Component> comps;
    double total = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    for (std::size_t m = 0; m < M; ++m) comps.push_back(Component::make(alpha[m] / total, spec[m], mu[m], sigma[m]));
    return MixtureParams::full(std::move(comps));
  };

  double ll = estep();
  MixtureParams best = snapshot();
  double best_ll = ll;
  if (opts.observer) opts.observer(0, best, ll);

  bool converged = false;
  std::size_t it = 0;
  while (it < opts.max_iter) {
    ++it;
    for (std::size_t m = 0; m < M; ++m) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * M + m];
        sx += resp[i * M + m] * data[i];
      }
      if (!(nk > 1e-300)) {
        alpha[m] = 0.0;
        continue;
      }
      alpha[m] = nk / static_cast<double>(n);
      mu[m] = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double d = data[i] - mu[m];
        sv += resp[i * M + m] * d * d;
      }
      sigma[m] = std::max(floor.value, std::sqrt(sv / nk));
    }
    double new_ll = estep();
    double improvement = new_ll - ll;
    ll = new_ll;
    if (opts.observer || new_ll > best_ll) {
      auto current = snapshot();
      if (opts.observer) opts.observer(it, current, new_ll);
      if (new_ll > best_ll) {
        best_ll = new_ll;
        best = std::move(current);
      }
    }
    if (improvement < opts.tol * std::max(std::abs(ll), 1e-300)) {
      converged = true;
      break;
    }
  }
  return finish(std::move(best), best_ll, it, converged, n, floor);
}

// Nelder-Mead on (softmax logits, locations, s) with sigma = c_n + exp(s).
// One reported iteration is a sweep of `dim` simplex steps.
FitResult fit_generic(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                      const MixtureParams& init, ScaleFloor floor, const FitOptions& opts) {
  const std::size_t M = spec.size();
  const std::size_t dim = 3 * M;
  const double s_min = std::log(std::max(floor.value * 1e-12, 1e-300));

  auto decode = [&](const std::vector<double>& v) {
    double top = *std::max_element(v.begin(), v.begin() + M);
    std::vector<double> w(M);
    double total = 0.0;
    for (std::size_t m = 0; m < M; ++m) total += (w[m] = std::exp(v[m] - top));
    std::vector<Component> comps;
    for (std::size_t m = 0; m < M; ++m) {
      double sigma = floor.value + std::exp(std::max(v[2 * M + m], s_min));
      comps.push_back(Component::make(w[m] / total, spec[m], v[M + m], sigma));
    }
    return MixtureParams::full(std::move(comps));
  };
  auto objective = [&](const std::vector<double>& v) {
    for (double e : v) {
      if (!std::isfinite(e)) return kInf;
    }
    double ll = log_likelihood(decode(v), data);
    return std::isfinite(ll) ? -ll : kInf;
  };

  double spread = 0.0;
  {
    auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    spread = *hi - *lo;
  }
  std::vector<double> x0(dim);
  std::vector<double> step(dim);
  for (std::size_t m = 0; m < M; ++m) {
    x0[m] = init[m].alpha > 0.0 ? std::log(init[m].alpha) : -30.0;
    x0[M + m] = init[m].mu;
    x0[2 * M + m] = std::max(std::log(std::max(init[m].sigma - floor.value, 0.0)), s_min);
    step[m] = 0.5;
    step[M + m] = 0.1 * std::max(init[m].sigma, 0.05 * spread + 1e-12);
    step[2 * M + m] = 0.5;
  }

  std::vector<std::vector<double>> simplex;
  std::vector<double> values;
  auto build_simplex = [&](const std::vector<double>& center, double scale) {
    simplex.assign(1, center);
    for (std::size_t k = 0; k < dim; ++k) {
      auto v = center;
      v[k] += step[k] * scale;
      simplex.push_back(std::move(v));
    }
    values.resize(dim + 1);
    for (std::size_t k = 0; k <= dim; ++k) values[k] = objective(simplex[k]);
  };

  const double init_obj = objective(x0);
  build_simplex(x0, 1.0);
  std::vector<double> best_x = x0;
  double best_obj = init_obj;
  if (opts.observer) opts.observer(0, init, -init_obj);

  bool converged = false;
  double last_restart_obj = best_obj;
  std::size_t it = 0;
  std::vector<std::size_t> order(dim + 1);
  const std::size_t budget = opts.max_iter;
  while (it < budget && !converged) {
    ++it;
    for (std::size_t sweep = 0; sweep < dim; ++sweep) {
      std::iota(order.begin(), order.end(), 0);
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
      const std::size_t ib = order.front(), iw = order.back(), isw = order[dim - 1];
      std::vector<double> centroid(dim, 0.0);
      for (std::size_t k = 0; k <= dim; ++k) {
        if (k == iw) continue;
        for (std::size_t j = 0; j < dim; ++j) centroid[j] += simplex[k][j] / static_cast<double>(dim);
      }
      auto along = [&](double t) {
        std::vector<double> v(dim);
        for (std::size_t j = 0; j < dim; ++j) v[j] = centroid[j] + t * (simplex[iw][j] - centroid[j]);
        return v;
      };
      auto xr = along(-1.0);
      double fr = objective(xr);
      if (fr < values[ib]) {
        auto xe = along(-2.0);
        double fe = objective(xe);
        if (fe < fr) {
          simplex[iw] = std::move(xe);
          values[iw] = fe;
        } else {
          simplex[iw] = std::move(xr);
          values[iw] = fr;
        }
      } else if (fr < values[isw]) {
        simplex[iw] = std::move(xr);
        values[iw] = fr;
      } else {
        auto xc = fr < values[iw] ? along(-0.5) : along(0.5);
        double fc = objective(xc);
        if (fc < std::min(fr, values[iw])) {
          simplex[iw] = std::move(xc);
          values[iw] = fc;
        } else {
          for (std::size_t k = 0; k <= dim; ++k) {
            if (k == ib) continue;
            for (std::size_t j = 0; j < dim; ++j) simplex[k][j] = simplex[ib][j] + 0.5 * (simplex[k][j] - simplex[ib][j]);
            values[k] = objective(simplex[k]);
          }
        }
      }
    }
    std::size_t ib = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    if (values[ib] < best_obj) {
      best_obj = values[ib];
      best_x = simplex[ib];
    }
    if (opts.observer) opts.observer(it, decode(best_x), -best_obj);

    double worst = *std::max_element(values.begin(), values.end());
    double scale = std::max(std::abs(best_obj), 1e-300);
    if (std::isfinite(worst) && worst - best_obj <= opts.tol * scale) {
      // Collapsed simplex: restart around the best point and stop once a
      // restart no longer improves.
      if (last_restart_obj - best_obj <= opts.tol * scale) {
        converged = true;
      } else {
        last_restart_obj = best_obj;
        build_simplex(best_x, 0.25);
      }
    }
  }

  const double init_ll = log_likelihood(init, data);
  const bool improved = -best_obj > init_ll;
  MixtureParams theta = improved ? decode(best_x) : init;
  double ll = improved ? -best_obj : init_ll;
  return finish(std::move(theta), ll, it, converged, data.size(), floor);
}

}  // namespace

void SieveSchedule::validate() const {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw ValidationError("schedule c0 must be positive");
  if (override_exponent) {
    if (!(*override_exponent > 0.0) || !std::isfinite(*override_exponent)) {
      throw ValidationError("override exponent must be positive");
    }
  } else if (!(d > 0.0 && d < 1.0)) {
    throw ValidationError("schedule exponent d must lie in (0, 1)");
  }
}

ScaleFloor sieve_floor(const SieveSchedule& schedule, std::size_t n) {
  schedule.validate();
  if (n < 1) throw ValidationError("sample size must be at least 1");
  double log_value = std::log(schedule.c0) - std::pow(static_cast<double>(n), schedule.exponent());
  return ScaleFloor{std::exp(log_value), log_value};
}

FitResult fit(std::span<const double> data, const std::vector<ComponentFamily>& spec,
              const SieveSchedule& schedule, const MixtureParams& init, const FitOptions& opts) {
  if (spec.empty()) throw ValidationError("model family list is empty");
  if (data.size() < 2) throw ValidationError("fitting needs at least two observations");
  if (init.size() != spec.size() || init.is_sub_probability()) {
    throw ValidationError("initial parameters must be a full mixture with one component per model family");
  }
  for (std::size_t m = 0; m < spec.size(); ++m) {
    if (!init[m].family.same_family_as(spec[m])) {
      throw ValidationError("initial component " + std::to_string(m) + " has the wrong family");
    }
  }
  for (double x : data) {
    if (!std::isfinite(x)) throw ValidationError("data contains a non-finite value");
  }
  const ScaleFloor floor = sieve_floor(schedule, data.size());
  if (!(floor.value >= std::numeric_limits<double>::min())) {
    throw ValidationError("scale floor underflows double precision (log c_n = " +
                          std::to_string(floor.log_value) + ")");
  }
  for (std::size_t m = 0; m < init.size(); ++m) {
    if (init[m].sigma < floor.value) {
      throw ValidationError("initial scale of component " + std::to_string(m) + " is below the floor c_n");
    }
  }
  return all_normal(spec) ? fit_em(data, spec, init, floor, opts) : fit_generic(data, spec, init, floor, opts);
}

MixtureParams canonical_init(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                             double floor, std::size_t start, std::uint64_t seed) {
  if (data.empty()) throw ValidationError("initialization needs data");
  if (spec.empty()) throw ValidationError("model family list is empty");
  std::vector<double> sorted(data.begin(), data.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t M = spec.size();
  const double range = sorted.back() - sorted.front();
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(sorted.size() - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };

  std::vector<double> qs(M);
  if (start % 2 == 0) {
    for (std::size_t m = 0; m < M; ++m) qs[m] = (static_cast<double>(m) + 0.5) / static_cast<double>(M);
  } else {
    std::mt19937_64 rng(splitmix64(seed ^ splitmix64(start)));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& q : qs) q = u(rng);
    std::sort(qs.begin(), qs.end());
  }
  const double rung = std::ldexp(range / (2.0 * static_cast<double>(M)), -static_cast<int>(start / 2));
  const double scale = std::max(floor, rung);

  // Uniform components start as boxes over a quantile partition (cut midway
  // between neighbouring qs) so that together they cover every observation.
  std::vector<double> cuts(M + 1);
  cuts[0] = 0.0;
  cuts[M] = 1.0;
  for (std::size_t m = 1; m < M; ++m) cuts[m] = 0.5 * (qs[m - 1] + qs[m]);
  const double pad = 1e-6 * range + 1e-9;
  const bool all_uniform =
      std::all_of(spec.begin(), spec.end(), [](const ComponentFamily& f) { return f.kind() == FamilyKind::uniform; });

  if (all_uniform && start == 0 && sorted.size() >= M) {
    // Boxes between the M-1 widest gaps of the sorted sample.
    std::vector<std::size_t> gap_at(sorted.size() - 1);
    std::iota(gap_at.begin(), gap_at.end(), 0);
    std::stable_sort(gap_at.begin(), gap_at.end(), [&](std::size_t a, std::size_t b) {
      return sorted[a + 1] - sorted[a] > sorted[b + 1] - sorted[b];
    });
    std::vector<std::size_t> ends(gap_at.begin(), gap_at.begin() + static_cast<std::ptrdiff_t>(M - 1));
    std::sort(ends.begin(), ends.end());
    ends.push_back(sorted.size() - 1);
    std::vector<Component> boxes;
    std::size_t first = 0;
    for (std::size_t m = 0; m < M; ++m) {
      double lo = sorted[first] - pad;
      double hi = sorted[ends[m]] + pad;
      double weight = static_cast<double>(ends[m] - first + 1) / static_cast<double>(sorted.size());
      boxes.push_back(Component::make(weight, spec[m], 0.5 * (lo + hi), std::max(floor, hi - lo)));
      first = ends[m] + 1;
    }
    return MixtureParams::full(std::move(boxes));
  }

  std::vector<Component> comps;
  for (std::size_t m = 0; m < M; ++m) {
    double weight = all_uniform ? cuts[m + 1] - cuts[m] : 1.0 / static_cast<double>(M);
    if (spec[m].kind() == FamilyKind::uniform) {
      double lo = quantile(cuts[m]) - pad;
      double hi = quantile(cuts[m + 1]) + pad;
      comps.push_back(Component::make(weight, spec[m], 0.5 * (lo + hi), std::max(floor, hi - lo)));
    } else {
      comps.push_back(Component::make(weight, spec[m], quantile(qs[m]), scale));
    }
  }
  return MixtureParams::full(std::move(comps));
}

FitResult multi_start_fit(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                          const SieveSchedule& schedule, std::size_t starts, std::uint64_t seed,
                          const FitOptions& opts, const std::vector<MixtureParams>& extra_inits) {
  if (starts < 1) throw ValidationError("multi-start fitting needs at least one start");
  const ScaleFloor floor = sieve_floor(schedule, std::max<std::size_t>(data.size(), 1));
  std::optional<FitResult> best;
  const std::size_t total = starts + extra_inits.size();
  for (std::size_t s = 0; s < total; ++s) {
    try {
      MixtureParams init = s < starts ? canonical_init(data, spec, floor.value, s, seed) : extra_inits[s - starts];
      FitResult r = fit(data, spec, schedule, init, opts);
      r.start_index = s;
      if (!best || r.loglik > best->loglik) best = std::move(r);
    } catch (const std::exception&) {
      if (s + 1 == total && !best) throw;
    }
  }
  return std::move(*best);
}

std::vector<PathPoint> degenerate_path(std::span<const double> data, const MixtureParams& base,
                                       std::size_t m, std::span<const double> sigma_seq) {
  if (m >= base.size()) throw ValidationError("component index out of range");
  if (sigma_seq.empty()) throw ValidationError("scale sequence is empty");
  for (std::size_t k = 0; k < sigma_seq.size(); ++k) {
    if (!(sigma_seq[k] > 0.0)) throw ValidationError("scales must be positive");
    if (k > 0 && !(sigma_seq[k] < sigma_seq[k - 1])) throw ValidationError("scales must be strictly decreasing");
  }
  std::vector<PathPoint> out;
  out.reserve(sigma_seq.size());
  const Component& c = base[m];
  for (double s : sigma_seq) {
    auto theta = base.with_component(m, Component::make(c.alpha, c.family, c.mu, s));
    out.push_back({s, std::log(s), log_likelihood(theta, data)});
  }
  return out;
}

MixtureParams spike_params(std::span<const double> data, const std::vector<ComponentFamily>& spec,
                           const SieveSchedule& schedule, std::size_t n, const MixtureParams& donor) {
  if (spec.size() < 2) throw ValidationError("spike construction needs at least two components");
  if (donor.size() != spec.size()) throw ValidationError("donor must have one entry per component");
  if (data.empty()) throw ValidationError("spike construction needs data");
  if (n < 1) throw ValidationError("sample size must be at least 1");
  const ScaleFloor floor = sieve_floor(schedule, n);
  double rest = 0.0;
  for (std::size_t m = 1; m < donor.size(); ++m) rest += donor[m].alpha;
  if (!(rest > 0.0)) throw ValidationError("donor components 1..M-1 carry no weight");

  const double spike_weight = 1.0 / static_cast<double>(n);
  std::vector<Component> comps;
  comps.push_back(Component::with_log_scale(spike_weight, spec[0], data[0], floor.log_value));
  for (std::size_t m = 1; m < donor.size(); ++m) {
    Component c = donor[m];
    c.alpha = c.alpha / rest * (1.0 - spike_weight);
    comps.push_back(std::move(c));
  }
  return MixtureParams::full(std::move(comps));
}

}  // namespace sievemix
