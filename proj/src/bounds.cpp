#include "sievemix/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "sievemix/errors.hpp"
#include "sievemix/sim.hpp"

namespace sievemix {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  double top = std::max(a, b);
  return top + std::log1p(std::exp(-std::abs(a - b)));
}

bool within(double lhs, double rhs, double rel = 1e-12) {
  return lhs - rhs <= rel * std::abs(rhs) + 1e-300;
}

std::pair<double, double> component_interval(const Component& c, const BoundContext& ctx) {
  double half = c.sigma > 0.0 ? nu(ctx, c.sigma) : 0.0;
  return {c.mu - half, c.mu + half};
}

struct LogMarginSetup {
  double radius = 0.0;
  double tail_mass = 0.0;
  double log_integrability_tail = 0.0;
  std::vector<double> breakpoints;
};

LogMarginSetup prepare_log_margin(const MixtureParams& theta0) {
  LogMarginSetup s;
  s.radius = tail_window(theta0, 1e-12);
  s.tail_mass = tail_mass_outside(theta0, s.radius);
  s.breakpoints = mixture_breakpoints(theta0, -2.0 * s.radius, 2.0 * s.radius);

  auto abs_log = [&](double x) {
    double lf = mix_log_density(theta0, x);
    return lf == -kInf ? 0.0 : std::exp(lf) * std::abs(lf);
  };
  auto inner_pts = mixture_breakpoints(theta0, -s.radius, s.radius);
  double inner = integrate_panels(abs_log, inner_pts).value;
  double outer = integrate_panels(abs_log, s.breakpoints).value;
  if (!std::isfinite(inner) || !std::isfinite(outer) || std::abs(outer - inner) > 1e-6 * std::max(1.0, outer)) {
    throw NumericalError("integral of |log f0| f0 does not converge on doubling windows");
  }
  s.log_integrability_tail = std::abs(outer - inner);
  s.breakpoints = std::move(inner_pts);
  return s;
}

IntegralEstimate kl_margin_prepared(const MixtureParams& theta0, const MixtureParams& g, double kappa,
                                    const LogMarginSetup& setup) {
  const double log_kappa = kappa > 0.0 ? std::log(kappa) : -kInf;
  auto pts = setup.breakpoints;
  auto gp = mixture_breakpoints(g, -setup.radius, setup.radius);
  pts.insert(pts.end(), gp.begin(), gp.end());

  auto integrand = [&](double x) {
    double lf = mix_log_density(theta0, x);
    if (lf == -kInf) return 0.0;
    double lg = log_add(mix_log_density(g, x), log_kappa);
    if (lg == -kInf) {
      throw NumericalError("g vanishes where f0 has mass; kappa > 0 is required for this g");
    }
    return std::exp(lf) * (lf - lg);
  };
  IntegralEstimate est = integrate_panels(integrand, std::move(pts));

  if (kappa > 0.0) {
    double g_sup = 0.0;
    for (const auto& c : g.components()) {
      if (c.alpha > 0.0 && c.family.has_envelope()) g_sup += c.alpha * c.family.envelope().v0 * std::exp(-c.log_sigma);
    }
    double log_bound = std::max(std::abs(log_kappa), std::abs(std::log(g_sup + kappa)));
    est.error += setup.tail_mass * log_bound + setup.log_integrability_tail;
    // The |log f0| f0 tail term is estimated from nested windows, not bounded.
    est.certified = false;
  } else {
    est.error += setup.log_integrability_tail;
    est.certified = false;
  }
  return est;
}

}  // namespace

Envelope combined_envelope(const std::vector<ComponentFamily>& families) {
  if (families.empty()) throw ValidationError("no families given");
  double beta = kInf;
  for (const auto& f : families) beta = std::min(beta, f.envelope().beta);
  Envelope out{0.0, 0.0, beta};
  for (const auto& f : families) {
    const auto& e = f.envelope();
    out.v0 = std::max(out.v0, e.v0);
    double v1 = e.beta == beta ? e.v1 : derive_envelope(f, beta).v1;
    out.v1 = std::max(out.v1, v1);
  }
  return out;
}

double density_supremum(const MixtureParams& theta) {
  std::vector<double> xs;
  for (const auto& c : theta.components()) {
    if (c.alpha <= 0.0 || !(c.sigma > 0.0)) continue;
    for (int k = -4000; k <= 4000; ++k) xs.push_back(c.mu + c.sigma * (k / 500.0));
    for (double d : c.family.discontinuities()) xs.push_back(c.mu + c.sigma * d);
  }
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::size_t best = 0;
  double best_f = -1.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double v = mix_density(theta, xs[i]);
    if (v > best_f) {
      best_f = v;
      best = i;
    }
  }
  double a = xs[best == 0 ? 0 : best - 1];
  double b = xs[std::min(best + 1, xs.size() - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int i = 0; i < 200 && b - a > 1e-14 * (1.0 + std::abs(a)); ++i) {
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = mix_density(theta, c);
    double fd = mix_density(theta, d);
    best_f = std::max({best_f, fc, fd});
    if (fc >= fd) {
      b = d;
    } else {
      a = c;
    }
  }
  return best_f;
}

BoundContext derive_context(const ContextInputs& in) {
  if (!(in.kappa0 > 0.0)) throw ValidationError("kappa0 must be positive");
  if (!(in.c0 > 0.0)) throw ValidationError("c0 must be positive");
  if (in.M < 1) throw ValidationError("M must be at least 1");
  if (!(in.envelope.v0 > 0.0) || !(in.envelope.v1 > 0.0) || !(in.envelope.beta > 1.0)) {
    throw ValidationError("envelope constants must satisfy v0 > 0, v1 > 0, beta > 1");
  }
  if (!(in.A0 > 0.0) || !(in.zeta > 0.0)) throw ValidationError("A0 and zeta must be positive");

  BoundContext ctx;
  ctx.kappa0 = in.kappa0;
  ctx.c0 = in.c0;
  ctx.M = in.M;
  ctx.v0 = in.envelope.v0;
  ctx.v1 = in.envelope.v1;
  ctx.beta = in.envelope.beta;
  ctx.A0 = in.A0;
  ctx.zeta = in.zeta;

  const double Mp1 = static_cast<double>(in.M + 1);
  const double kappa_limit = ctx.v0 / (ctx.c0 * Mp1);
  if (!(ctx.kappa0 < kappa_limit)) {
    throw ValidationError("precondition kappa0 < v0/(c0 (M+1)) fails: " + std::to_string(ctx.kappa0) +
                          " >= " + std::to_string(kappa_limit));
  }

  ctx.beta_tilde = (ctx.beta - 1.0) / ctx.beta;
  ctx.nu_coefficient = std::pow(ctx.v1 / ctx.kappa0, 1.0 / ctx.beta);
  ctx.v2 = 2.0 * ctx.nu_coefficient * std::pow(ctx.v0 * Mp1, ctx.beta_tilde);
  ctx.B = ctx.v0 / ctx.kappa0;

  const double M = static_cast<double>(in.M);
  const double v0_c0 = ctx.v0 / ctx.c0;
  auto add = [&](std::string name, double lhs, double rhs, bool evaluated) {
    ctx.conditions.push_back({std::move(name), lhs, rhs, evaluated, evaluated && lhs < rhs});
  };
  add("e < (v0/c0)^beta_tilde", std::exp(1.0), std::pow(v0_c0, ctx.beta_tilde), true);

  if (in.theta0) {
    const auto& t0 = *in.theta0;
    if (t0.size() != in.M) throw ValidationError("theta0 must have M components");
    ctx.theta0 = t0;
    ctx.u0 = density_supremum(t0) * (1.0 + 1e-9);
    double mu_bar = 0.0, sigma_min = kInf, sigma_max = 0.0, weighted = 0.0;
    for (const auto& c : t0.components()) {
      mu_bar = std::max(mu_bar, std::abs(c.mu));
      sigma_min = std::min(sigma_min, c.sigma);
      sigma_max = std::max(sigma_max, c.sigma);
      weighted += c.alpha * std::pow(c.sigma, ctx.beta - 1.0);
    }
    ctx.mu_bar0 = mu_bar;
    ctx.u1 = std::max(*ctx.u0 * std::pow(2.0 * mu_bar, ctx.beta),
                      std::pow(2.0, ctx.beta) * ctx.v1 * weighted);
    add("c0 < min sigma_0m", ctx.c0, sigma_min, true);
    add("max sigma_0m < B", sigma_max, ctx.B, true);
    double lambda0 = in.lambda0.value_or(0.0);
    add("3M u0 2nu(c0) |log kappa0| < lambda0",
        3.0 * M * *ctx.u0 * 2.0 * nu(ctx, ctx.c0) * std::abs(std::log(ctx.kappa0)), lambda0,
        in.lambda0.has_value());
    add("3 2M u0 xi(v0/c0) log(v0/c0) < lambda0",
        3.0 * 2.0 * M * *ctx.u0 * xi(ctx, v0_c0) * std::log(v0_c0), lambda0, in.lambda0.has_value());
  } else {
    add("c0 < min sigma_0m", ctx.c0, 0.0, false);
    add("max sigma_0m < B", 0.0, ctx.B, false);
    add("3M u0 2nu(c0) |log kappa0| < lambda0", 0.0, 0.0, false);
    add("3 2M u0 xi(v0/c0) log(v0/c0) < lambda0", 0.0, 0.0, false);
  }
  add("kappa0 < v0/(c0 (M+1))", ctx.kappa0, kappa_limit, true);
  return ctx;
}

double nu(const BoundContext& ctx, double y) {
  if (!(y > 0.0)) throw ValidationError("nu requires y > 0");
  return ctx.nu_coefficient * std::pow(y, ctx.beta_tilde);
}

double xi(const BoundContext& ctx, double y) {
  if (!(y > 0.0)) throw ValidationError("xi requires y > 0");
  return ctx.v2 * std::pow(y, -ctx.beta_tilde);
}

double log_c_n_prime(const BoundContext& ctx, std::size_t n) {
  if (n < 1) throw ValidationError("n must be at least 1");
  return std::log(ctx.c0) - std::pow(static_cast<double>(n), 0.25);
}

double step_height_at(const MixtureParams& theta, const BoundContext& ctx, double x) {
  double h = ctx.kappa0;
  for (const auto& c : theta.components()) {
    auto [lo, hi] = component_interval(c, ctx);
    if (x >= lo && x < hi) h += ctx.v0 / c.sigma;
  }
  return h;
}

StepEnvelope step_envelope(const MixtureParams& theta, const BoundContext& ctx, std::optional<std::size_t> n) {
  StepEnvelope env;
  std::vector<std::pair<double, double>> small;
  std::vector<double> cuts;
  for (const auto& c : theta.components()) {
    auto iv = component_interval(c, ctx);
    if (!(iv.second > iv.first)) continue;
    cuts.push_back(iv.first);
    cuts.push_back(iv.second);
    if (c.sigma <= ctx.c0) small.push_back(iv);
  }
  std::sort(small.begin(), small.end());
  for (const auto& iv : small) {
    if (!env.union_intervals.empty() && iv.first <= env.union_intervals.back().second) {
      env.union_intervals.back().second = std::max(env.union_intervals.back().second, iv.second);
    } else {
      env.union_intervals.push_back(iv);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::optional<double> log_threshold;
  if (n) log_threshold = std::log(static_cast<double>(ctx.M) * ctx.v0) - log_c_n_prime(ctx, *n);

  for (auto [lo, hi] : env.union_intervals) {
    std::vector<double> edges{lo};
    for (double c : cuts) {
      if (c > lo && c < hi) edges.push_back(c);
    }
    edges.push_back(hi);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
      StepPiece p;
      p.lo = edges[k];
      p.hi = edges[k + 1];
      p.height = step_height_at(theta, ctx, 0.5 * (p.lo + p.hi));
      if (log_threshold) p.in_tau = std::log(p.height) <= *log_threshold;
      env.pieces.push_back(p);
    }
  }
  return env;
}

StepBoundReport verify_step_bound(const MixtureParams& theta, const BoundContext& ctx, const GridSpec& grid,
                                  std::size_t points_per_piece) {
  StepBoundReport rep;
  const StepEnvelope env = step_envelope(theta, ctx);
  rep.T = env.T();
  rep.count_ok = rep.T <= 2 * theta.size();
  rep.worst_density_margin = -kInf;
  rep.worst_width_margin = -kInf;

  for (std::size_t t = 0; t < env.pieces.size(); ++t) {
    const auto& p = env.pieces[t];
    double w = p.hi - p.lo;
    double bound = xi(ctx, p.height);
    rep.width_rows.push_back({static_cast<double>(t), w, bound, w - bound});
    rep.worst_width_margin = std::max(rep.worst_width_margin, w - bound);
    if (!within(w, bound)) rep.width_ok = false;
  }

  std::vector<double> xs;
  for (double x : grid.points()) {
    for (auto [lo, hi] : env.union_intervals) {
      if (x >= lo && x < hi) {
        xs.push_back(x);
        break;
      }
    }
  }
  for (const auto& p : env.pieces) {
    for (std::size_t k = 0; k < points_per_piece; ++k) {
      xs.push_back(p.lo + (p.hi - p.lo) * static_cast<double>(k) / static_cast<double>(points_per_piece));
    }
  }
  std::sort(xs.begin(), xs.end());
  for (double x : xs) {
    double lhs = mix_density(theta, x);
    double rhs = step_height_at(theta, ctx, x);
    rep.density_rows.push_back({x, lhs, rhs, lhs - rhs});
    if (lhs - rhs > rep.worst_density_margin) {
      rep.worst_density_margin = lhs - rhs;
      rep.worst_x = x;
    }
    if (!within(lhs, rhs)) rep.density_ok = false;
  }
  rep.points_checked = xs.size();
  if (xs.empty()) rep.worst_density_margin = 0.0;
  if (env.pieces.empty()) rep.worst_width_margin = 0.0;
  return rep;
}

SweepReport verify_component_step(const ComponentFamily& family, double mu, double sigma, const BoundContext& ctx,
                                  const GridSpec& grid) {
  SweepReport rep;
  rep.worst_margin = -kInf;
  const double half = nu(ctx, sigma);
  for (double x : grid.points()) {
    double lhs = component_density(family, mu, sigma, x);
    double rhs = ((x >= mu - half && x < mu + half) ? ctx.v0 / sigma : 0.0) + ctx.kappa0;
    rep.rows.push_back({x, lhs, rhs, lhs - rhs});
    if (lhs - rhs > rep.worst_margin) {
      rep.worst_margin = lhs - rhs;
      rep.worst_x = x;
    }
    if (!within(lhs, rhs)) rep.holds = false;
  }
  return rep;
}

SweepReport verify_true_tail(const MixtureParams& theta0, const BoundContext& ctx, const GridSpec& grid) {
  if (!ctx.u0 || !ctx.u1) throw ValidationError("context was built without theta0");
  SweepReport rep;
  rep.worst_margin = -kInf;
  for (double x : grid.points()) {
    double lhs = mix_density(theta0, x);
    double rhs = x == 0.0 ? *ctx.u0 : std::min(*ctx.u0, *ctx.u1 * std::pow(std::abs(x), -ctx.beta));
    rep.rows.push_back({x, lhs, rhs, lhs - rhs});
    if (lhs - rhs > rep.worst_margin) {
      rep.worst_margin = lhs - rhs;
      rep.worst_x = x;
    }
    if (!within(lhs, rhs)) rep.holds = false;
  }
  return rep;
}

double extreme_radius(const BoundContext& ctx, std::size_t n) {
  if (n < 1) throw ValidationError("n must be at least 1");
  return ctx.A0 * std::pow(static_cast<double>(n), (2.0 + ctx.zeta) / (ctx.beta - 1.0));
}

double extreme_exceedance_mc(const MixtureParams& theta0, const BoundContext& ctx, std::size_t n, std::size_t reps,
                             std::uint64_t seed) {
  if (reps < 1) throw ValidationError("reps must be at least 1");
  const double radius = extreme_radius(ctx, n);
  std::size_t hits = 0;
  for (std::size_t r = 0; r < reps; ++r) {
    auto xs = sample(theta0, n, stream_seed(seed, 0, n, r));
    auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*lo < -radius || *hi > radius) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(reps);
}

OkamotoResult okamoto_bound(std::size_t n, double p, double eps) {
  if (n < 1) throw ValidationError("n must be at least 1");
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("p must lie in [0, 1]");
  if (!(eps > 0.0)) throw ValidationError("eps must be positive");
  OkamotoResult out;
  const double nd = static_cast<double>(n);
  out.bound = std::exp(-2.0 * nd * eps * eps);
  if (p == 0.0 || p == 1.0) return out;  // X/n - p is identically 0

  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_nfact = std::lgamma(nd + 1.0);
  double acc = -kInf;
  for (std::size_t k = n + 1; k-- > 0;) {
    // Differences within a few ulps of eps count as ties, so decimal inputs
    // such as p = 0.3, eps = 0.7 give the impossible event its zero mass.
    long double excess = static_cast<long double>(k) / static_cast<long double>(n) - static_cast<long double>(p);
    if (!(excess - static_cast<long double>(eps) > 8.0L * std::numeric_limits<double>::epsilon())) break;
    double kd = static_cast<double>(k);
    double term = log_nfact - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) + kd * log_p + (nd - kd) * log_q;
    acc = log_add(acc, term);
  }
  out.exact_tail = std::min(1.0, std::exp(acc));
  return out;
}

IntegralEstimate kl_margin(const MixtureParams& theta0, const MixtureParams& g, double kappa) {
  if (!(kappa >= 0.0)) throw ValidationError("kappa must be nonnegative");
  if (theta0.is_sub_probability()) throw ValidationError("theta0 must be a full mixture");
  return kl_margin_prepared(theta0, g, kappa, prepare_log_margin(theta0));
}

CandidateGrid CandidateGrid::around(const MixtureParams& theta0, std::size_t target) {
  CandidateGrid g;
  double lo = kInf, hi = -kInf, smin = kInf, smax = 0.0;
  for (const auto& c : theta0.components()) {
    lo = std::min(lo, c.mu - 3.0 * c.sigma);
    hi = std::max(hi, c.mu + 3.0 * c.sigma);
    smin = std::min(smin, c.sigma);
    smax = std::max(smax, c.sigma);
  }
  for (int k = 1; k <= 10; ++k) g.weights.push_back(k / 10.0);
  g.scale_count = 20;
  g.loc_count = std::max<std::size_t>(2, (target + 199) / 200);
  g.loc_lo = lo;
  g.loc_hi = hi;
  g.log_scale_lo = std::log(0.05 * smin);
  g.log_scale_hi = std::log(5.0 * (smax + (hi - lo) / 2.0));
  return g;
}

std::vector<MixtureParams> margin_candidates(const MixtureParams& theta0, const CandidateGrid& grid,
                                             std::uint64_t seed) {
  if (theta0.size() < 1) throw ValidationError("theta0 is empty");
  const std::size_t K = theta0.size() - 1;
  if (K == 0) return {MixtureParams::sub_probability({})};

  struct Option {
    double w, mu, log_sigma;
  };
  std::vector<double> locs = GridSpec{grid.loc_lo, grid.loc_hi, grid.loc_count}.points();
  std::vector<double> log_scales = GridSpec{grid.log_scale_lo, grid.log_scale_hi, grid.scale_count}.points();
  if (grid.include_extremes) {
    log_scales.push_back(grid.log_scale_lo + std::log(1e-5));  // near-degenerate
    log_scales.push_back(grid.log_scale_hi + std::log(1e3));   // near-flat
  }
  std::vector<Option> options;
  for (double w : grid.weights) {
    for (double mu : locs) {
      for (double ls : log_scales) options.push_back({w, mu, ls});
    }
  }
  if (options.empty()) throw ValidationError("candidate grid is empty");

  auto build = [&](const std::vector<std::size_t>& pick) -> std::optional<MixtureParams> {
    double total = 0.0;
    for (std::size_t k : pick) total += options[k].w;
    if (total > 1.0 + kWeightTolerance) return std::nullopt;
    std::vector<Component> comps;
    for (std::size_t j = 0; j < K; ++j) {
      const auto& o = options[pick[j]];
      comps.push_back(Component::with_log_scale(o.w, theta0[j].family, o.mu, o.log_sigma));
    }
    return MixtureParams::sub_probability(std::move(comps));
  };

  std::vector<MixtureParams> out;
  const double product = std::pow(static_cast<double>(options.size()), static_cast<double>(K));
  std::vector<std::size_t> pick(K, 0);
  if (product <= static_cast<double>(grid.max_candidates)) {
    while (true) {
      if (auto c = build(pick)) out.push_back(std::move(*c));
      std::size_t j = 0;
      while (j < K && ++pick[j] == options.size()) pick[j++] = 0;
      if (j == K) break;
    }
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> u(0, options.size() - 1);
    std::size_t attempts = 0;
    while (out.size() < grid.max_candidates && attempts < 100 * grid.max_candidates) {
      ++attempts;
      for (auto& k : pick) k = u(rng);
      if (auto c = build(pick)) out.push_back(std::move(*c));
    }
  }
  return out;
}

MarginScanReport margin_scan(const MixtureParams& theta0, double kappa, const std::vector<MixtureParams>& candidates) {
  if (!(kappa >= 0.0)) throw ValidationError("kappa must be nonnegative");
  if (candidates.empty()) throw ValidationError("no candidates to scan");
  const LogMarginSetup setup = prepare_log_margin(theta0);
  MarginScanReport rep;
  rep.min_margin = kInf;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double m = kl_margin_prepared(theta0, candidates[i], kappa, setup).value;
    if (m < rep.min_margin) {
      rep.min_margin = m;
      rep.argmin_index = i;
    }
  }
  rep.argmin = candidates[rep.argmin_index];
  rep.candidates = candidates.size();
  rep.label = "empirical margin over " + std::to_string(candidates.size()) + " candidates";
  return rep;
}

MarginScanReport margin_scan(const MixtureParams& theta0, double kappa, const CandidateGrid& grid,
                             std::uint64_t seed) {
  return margin_scan(theta0, kappa, margin_candidates(theta0, grid, seed));
}

}  // namespace sievemix
