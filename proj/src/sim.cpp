#include "sievemix/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "sievemix/errors.hpp"

namespace sievemix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double draw_custom(const ComponentFamily& family, std::mt19937_64& rng) {
  const Envelope& e = family.envelope();
  const double z_star = std::pow(e.v1 / e.v0, 1.0 / e.beta);
  const double center_mass = 2.0 * e.v0 * z_star;
  const double tail_mass = 2.0 * e.v1 * std::pow(z_star, 1.0 - e.beta) / (e.beta - 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t attempt = 0; attempt < 1000000; ++attempt) {
    double z;
    if (u01(rng) * (center_mass + tail_mass) < center_mass) {
      z = z_star * (2.0 * u01(rng) - 1.0);
    } else {
      double u = 1.0 - u01(rng);  // (0, 1]
      z = z_star * std::pow(u, -1.0 / (e.beta - 1.0));
      if (u01(rng) < 0.5) z = -z;
    }
    double env = std::abs(z) <= z_star ? e.v0 : e.v1 * std::pow(std::abs(z), -e.beta);
    if (u01(rng) * env <= family.density(z)) return z;
  }
  throw NumericalError("rejection sampler for '" + family.name() + "' did not accept");
}

double draw_standardized(const ComponentFamily& family, std::mt19937_64& rng) {
  switch (family.kind()) {
    case FamilyKind::normal:
      return std::normal_distribution<double>(0.0, 1.0)(rng);
    case FamilyKind::student_t:
      return std::student_t_distribution<double>(family.dof())(rng);
    case FamilyKind::uniform:
      return std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
    case FamilyKind::custom:
      return draw_custom(family, rng);
  }
  throw ValidationError("unknown family kind");
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

bool same_families(const MixtureParams& theta, const std::vector<ComponentFamily>& spec) {
  if (theta.size() != spec.size()) return false;
  for (std::size_t m = 0; m < spec.size(); ++m) {
    if (!theta[m].family.same_family_as(spec[m])) return false;
  }
  return true;
}

bool feasible(const MixtureParams& theta, const ScaleFloor& floor) {
  for (const auto& c : theta.components()) {
    if (c.log_sigma < floor.log_value) return false;
  }
  return true;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t schedule_id, std::uint64_t n, std::uint64_t rep) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ schedule_id);
  h = splitmix64(h ^ n);
  return splitmix64(h ^ rep);
}

std::vector<double> sample(const MixtureParams& theta, std::size_t n, std::uint64_t seed) {
  if (theta.is_sub_probability()) throw ValidationError("sampling requires a full mixture");
  std::vector<double> cumulative;
  double acc = 0.0;
  for (const auto& c : theta.components()) {
    acc += c.alpha;
    cumulative.push_back(acc);
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double u = u01(rng) * acc;
    std::size_t m = std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin();
    m = std::min(m, theta.size() - 1);
    while (theta[m].alpha <= 0.0 && m > 0) --m;
    const Component& c = theta[m];
    out.push_back(c.mu + c.sigma * draw_standardized(c.family, rng));
  }
  return out;
}

void SimConfig::validate() const {
  if (theta0.is_sub_probability()) throw ValidationError("theta0 must be a full mixture");
  if (schedules.empty()) throw ValidationError("at least one schedule is required");
  for (const auto& s : schedules) {
    s.validate();
    if (s.override_exponent) throw ValidationError("consistency studies require 0 < d < 1 without override");
  }
  if (n_grid.empty()) throw ValidationError("n_grid is empty");
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    if (n_grid[i] < 2) throw ValidationError("n_grid entries must be at least 2");
    if (i > 0 && n_grid[i] <= n_grid[i - 1]) throw ValidationError("n_grid must be strictly increasing");
  }
  if (reps < 1) throw ValidationError("reps must be at least 1");
  if (starts < 1) throw ValidationError("starts must be at least 1");
}

std::vector<MixtureParams> SimConfig::effective_true_set() const {
  return true_set.empty() ? std::vector<MixtureParams>{theta0} : true_set;
}

std::vector<ComponentFamily> SimConfig::effective_spec() const {
  if (!spec.empty()) return spec;
  std::vector<ComponentFamily> out;
  for (const auto& c : theta0.components()) out.push_back(c.family);
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty set");
  std::sort(values.begin(), values.end());
  std::size_t k = values.size() / 2;
  return values.size() % 2 == 1 ? values[k] : 0.5 * (values[k - 1] + values[k]);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("spearman inputs differ in length");
  if (a.size() < 2) return 0.0;
  auto ra = ranks(a);
  auto rb = ranks(b);
  double n = static_cast<double>(a.size());
  double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

SimReport run_consistency(const SimConfig& config) {
  config.validate();
  const auto true_set = config.effective_true_set();
  const auto spec = config.effective_spec();
  const bool inject = same_families(config.theta0, spec);

  SimReport report;
  const std::size_t total = config.schedules.size() * config.n_grid.size() * config.reps;
  for (std::size_t s = 0; s < config.schedules.size(); ++s) {
    const auto& schedule = config.schedules[s];
    for (std::size_t n : config.n_grid) {
      const ScaleFloor floor = sieve_floor(schedule, n);
      std::vector<MixtureParams> extras;
      if (inject && feasible(config.theta0, floor)) extras.push_back(config.theta0);
      for (std::size_t rep = 0; rep < config.reps; ++rep) {
        const std::uint64_t seed = stream_seed(config.seed, s, n, rep);
        try {
          auto t_start = std::chrono::steady_clock::now();
          auto data = sample(config.theta0, n, seed);
          FitResult fr = multi_start_fit(data, spec, schedule, config.starts, seed, config.fit_options, extras);
          SimRow row;
          row.schedule_id = s;
          row.n = n;
          row.rep = rep;
          row.seed = seed;
          row.param_dist = param_set_distance(fr.theta_hat, true_set);
          row.l1_dist = l1_distance(fr.theta_hat, config.theta0).value;
          row.loglik_hat = fr.loglik;
          row.loglik_true = log_likelihood(config.theta0, data);
          row.floor_active_count = static_cast<std::size_t>(std::count(fr.floor_active.begin(), fr.floor_active.end(), true));
          row.min_sigma_minus_floor = std::numeric_limits<double>::infinity();
          for (const auto& c : fr.theta_hat.components()) {
            row.min_sigma_minus_floor = std::min(row.min_sigma_minus_floor, c.sigma - floor.value);
          }
          row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
          report.rows.push_back(row);
        } catch (const std::exception& e) {
          report.failures.push_back({s, n, rep, e.what()});
        }
      }
    }
  }
  if (10 * report.failures.size() > total) {
    throw NumericalError(std::to_string(report.failures.size()) + " of " + std::to_string(total) +
                         " replications failed; first: " + report.failures.front().message);
  }

  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<double> all_l1, all_param;
  for (const auto& r : report.rows) {
    auto& g = groups[{r.schedule_id, r.n}];
    g.first.push_back(r.param_dist);
    g.second.push_back(r.l1_dist);
    all_param.push_back(r.param_dist);
    all_l1.push_back(r.l1_dist);
  }
  for (const auto& [key, g] : groups) {
    report.summary.push_back({key.first, key.second, g.first.size(), median(g.first), median(g.second)});
  }
  report.spearman_l1_param = spearman(all_l1, all_param);
  return report;
}

FailureReport run_failure_demo(const FailureDemoConfig& config) {
  if (config.theta0.is_sub_probability()) throw ValidationError("theta0 must be a full mixture");
  if (config.theta0.size() < 2) throw ValidationError("the spike construction needs M >= 2");
  config.schedule.validate();
  config.control_schedule.validate();
  if (config.control_schedule.override_exponent) throw ValidationError("control schedule must not override d");
  if (config.n_grid.empty()) throw ValidationError("n_grid is empty");
  for (std::size_t i = 0; i < config.n_grid.size(); ++i) {
    if (config.n_grid[i] < 2) throw ValidationError("n_grid entries must be at least 2");
    if (i > 0 && config.n_grid[i] <= config.n_grid[i - 1]) throw ValidationError("n_grid must be strictly increasing");
  }

  const std::vector<MixtureParams> true_set =
      config.true_set.empty() ? std::vector<MixtureParams>{config.theta0} : config.true_set;
  std::vector<ComponentFamily> spec;
  for (const auto& c : config.theta0.components()) spec.push_back(c.family);
  const std::vector<ComponentFamily> reduced_spec(spec.begin() + 1, spec.end());

  FailureReport report;
  for (std::size_t n : config.n_grid) {
    const std::uint64_t seed = stream_seed(config.seed, 0, n, 0);
    const auto data = sample(config.theta0, n, seed);

    std::vector<MixtureParams> extras;
    if (feasible(config.theta0, sieve_floor(config.control_schedule, n))) extras.push_back(config.theta0);
    FitResult reference =
        multi_start_fit(data, spec, config.control_schedule, config.starts, seed, config.fit_options, extras);
    FitResult reduced = multi_start_fit(data, reduced_spec, config.control_schedule, config.starts, seed,
                                        config.fit_options);

    std::vector<Component> donor_comps{Component::make(0.0, spec[0], 0.0, 1.0)};
    for (const auto& c : reduced.theta_hat.components()) donor_comps.push_back(c);
    MixtureParams donor = MixtureParams::full(std::move(donor_comps));
    MixtureParams spike = spike_params(data, spec, config.schedule, n, donor);

    FailureRow row;
    row.n = n;
    row.log_floor = sieve_floor(config.schedule, n).log_value;
    row.loglik_spike = log_likelihood(spike, data);
    row.loglik_reference = reference.loglik;
    row.gain = row.loglik_spike - row.loglik_reference;
    row.spike_superior = row.loglik_spike > row.loglik_reference;
    row.param_dist_spike = param_set_distance(spike, true_set);
    row.param_dist_reference = param_set_distance(reference.theta_hat, true_set);
    report.rows.push_back(row);
  }
  for (std::size_t i = report.rows.size(); i-- > 0;) {
    if (!report.rows[i].spike_superior) break;
    report.crossover_n = report.rows[i].n;
  }
  return report;
}

DegenerateDemoReport run_degenerate_demo(const DegenerateDemoConfig& config) {
  if (config.theta0.is_sub_probability()) throw ValidationError("theta0 must be a full mixture");
  if (config.theta0.size() < 2) throw ValidationError("the degenerate path needs M >= 2");
  if (config.n < 2) throw ValidationError("n must be at least 2");
  if (config.halvings < 1) throw ValidationError("halvings must be at least 1");
  if (config.sigma_start && !(*config.sigma_start > 0.0)) throw ValidationError("sigma_start must be positive");
  config.control_schedule.validate();
  const double sigma_start = config.sigma_start.value_or(sieve_floor(config.control_schedule, config.n).value);

  std::vector<ComponentFamily> spec;
  for (const auto& c : config.theta0.components()) spec.push_back(c.family);
  const std::vector<ComponentFamily> reduced_spec(spec.begin() + 1, spec.end());

  DegenerateDemoReport rep{sample(config.theta0, config.n, stream_seed(config.seed, 0, config.n, 0)),
                           config.theta0, {}, config.theta0, 0.0, 0.0};
  std::vector<MixtureParams> extras;
  if (feasible(config.theta0, sieve_floor(config.control_schedule, config.n))) extras.push_back(config.theta0);
  FitResult best = multi_start_fit(rep.data, spec, config.control_schedule, config.starts, config.seed,
                                   config.fit_options, extras);
  FitResult reduced =
      multi_start_fit(rep.data, reduced_spec, config.control_schedule, config.starts, config.seed, config.fit_options);
  rep.constrained = best.theta_hat;
  rep.constrained_loglik = best.loglik;

  const double w = 1.0 / static_cast<double>(config.n);
  std::vector<Component> comps{Component::make(w, spec[0], rep.data[0], sigma_start)};
  for (const auto& c : reduced.theta_hat.components()) {
    Component scaled = c;
    scaled.alpha = c.alpha * (1.0 - w);
    comps.push_back(scaled);
  }
  rep.base = MixtureParams::full(std::move(comps));

  std::vector<double> sigmas;
  for (std::size_t k = 1; k <= config.halvings; ++k) sigmas.push_back(std::ldexp(sigma_start, -static_cast<int>(k)));
  rep.path = degenerate_path(rep.data, rep.base, 0, sigmas);
  rep.excess = rep.path.back().loglik - rep.constrained_loglik;
  return rep;
}

}  // namespace sievemix
