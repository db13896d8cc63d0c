#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>

#include <CLI11.hpp>

#include "sievemix/bounds.hpp"
#include "sievemix/errors.hpp"
#include "sievemix/estimator.hpp"
#include "sievemix/io.hpp"
#include "sievemix/sim.hpp"

namespace sievemix::cli {

namespace fs = std::filesystem;
using io::fixed17;

namespace {

struct Invocation {
  std::string command;
  std::string config;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  bool verify_all = false;
  bool n_auto = false;
  bool quiet = false;
  bool record_timing = false;
  std::string data;
};

class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& text) {
    io::write_text(dir_ / name, text);
    files_.push_back(name);
  }
  const fs::path& dir() const { return dir_; }

  void manifest(const Invocation& inv, const io::Config& cfg, std::uint64_t seed,
                std::optional<std::uint64_t> data_hash) {
    std::vector<std::string> files = files_;
    std::sort(files.begin(), files.end());
    YAML::Node list(YAML::NodeType::Sequence);
    for (const auto& f : files) list.push_back(f);
    io::Record r;
    r.add("subcommand", inv.command)
        .add("version", SIEVEMIX_VERSION)
        .add("seed", std::to_string(seed))
        .add("config", cfg.path.string())
        .add("config_hash", "fnv1a64:" + io::hex64(cfg.hash));
    if (data_hash) r.add("data_hash", "fnv1a64:" + io::hex64(*data_hash));
    r.add("record_timing", inv.record_timing).add_node("outputs", list);
    io::write_text(dir_ / "manifest.yaml", r.to_yaml());
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::uint64_t resolve_seed(const Invocation& inv, const io::Config& cfg) {
  if (inv.seed) return *inv.seed;
  if (cfg.root["seed"]) return io::parse_u64(cfg.root["seed"].Scalar(), "seed");
  return 1;
}

YAML::Node section(const io::Config& cfg, const std::string& name) {
  YAML::Node n = cfg.root[name];
  return n ? n : YAML::Node(YAML::NodeType::Map);
}

MixtureParams require_mixture(const io::Config& cfg, const std::string& key = "mixture") {
  if (!cfg.root[key]) throw ValidationError("config needs a '" + key + "' section");
  return io::parse_mixture(cfg.root[key]);
}

std::vector<MixtureParams> true_set_of(const io::Config& cfg) {
  std::vector<MixtureParams> out;
  if (!cfg.root["true_set"]) return out;
  for (const auto& m : cfg.root["true_set"]) out.push_back(io::parse_mixture(m));
  return out;
}

std::vector<ComponentFamily> families_of(const MixtureParams& theta) {
  std::vector<ComponentFamily> out;
  for (const auto& c : theta.components()) out.push_back(c.family);
  return out;
}

std::vector<std::size_t> count_list(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsSequence() || node.size() == 0) throw ValidationError(what + " must be a nonempty list");
  std::vector<std::size_t> out;
  for (const auto& v : node) out.push_back(static_cast<std::size_t>(io::parse_u64(v.Scalar(), what)));
  return out;
}

std::vector<double> decimal_list(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsSequence()) throw ValidationError(what + " must be a list");
  std::vector<double> out;
  for (const auto& v : node) out.push_back(io::parse_decimal(v, what));
  return out;
}

FitOptions fit_options_of(const YAML::Node& node) {
  FitOptions o;
  o.max_iter = io::count_or(node, "max_iter", o.max_iter);
  o.tol = io::decimal_or(node, "tol", o.tol);
  return o;
}

SieveSchedule control_schedule_of(const io::Config& cfg) {
  if (cfg.root["control_schedule"]) return io::parse_schedule(cfg.root["control_schedule"]);
  SieveSchedule s;
  if (cfg.root["schedule"]) s.c0 = io::decimal_or(cfg.root["schedule"], "c0", 1.0);
  return s;
}

std::string yaml_of_mixture(const MixtureParams& theta) { return io::mixture_to_yaml(theta); }

YAML::Node mixture_node(const MixtureParams& theta) { return YAML::Load(yaml_of_mixture(theta)); }

std::string csv_sweep(const std::vector<SweepRow>& rows, const std::string& at_name) {
  io::CsvTable t({at_name, "lhs", "rhs", "margin"});
  for (const auto& r : rows) t.row({fixed17(r.at), fixed17(r.lhs), fixed17(r.rhs), fixed17(r.margin)});
  return t.str();
}

// ---- fit ------------------------------------------------------------------

int cmd_fit(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node fit_sec = section(cfg, "fit");
  const auto spec = io::parse_spec(cfg.root["spec"]);
  if (!cfg.root["schedule"]) throw ValidationError("config needs a 'schedule' section");
  const SieveSchedule schedule = io::parse_schedule(cfg.root["schedule"]);

  std::vector<double> data;
  std::optional<std::uint64_t> data_hash;
  if (!inv.data.empty()) {
    data = io::read_data_file(inv.data);
    std::string joined;
    for (double x : data) joined += io::shortest(x) + "\n";
    data_hash = io::fnv1a64(joined);
  } else if (fit_sec["data"]) {
    data = decimal_list(fit_sec["data"], "fit.data");
  } else {
    throw ValidationError("no data: pass --data or set fit.data");
  }

  const std::size_t n = data.size();
  if (!inv.n_auto) {
    if (!fit_sec["n"]) throw ValidationError("sample size not given: pass --n-auto or set fit.n");
    const std::size_t declared = io::count_or(fit_sec, "n", 0);
    if (declared != n) {
      throw ValidationError("fit.n = " + std::to_string(declared) + " but the data has " + std::to_string(n) +
                            " points; the floor must use the actual sample size (see --n-auto)");
    }
  }
  const std::uint64_t seed = resolve_seed(inv, cfg);
  const std::size_t starts = io::count_or(fit_sec, "starts", 8);
  const FitResult fr = multi_start_fit(data, spec, schedule, starts, seed, fit_options_of(fit_sec));

  Outputs o(inv.out);
  io::Record r;
  r.add("n", n)
      .add("c0", schedule.c0)
      .add("exponent", schedule.exponent())
      .add("floor", fr.floor.value)
      .add("log_floor", fr.floor.log_value)
      .add("loglik", fr.loglik)
      .add("iterations", fr.iterations)
      .add("converged", fr.converged)
      .add("start_index", fr.start_index)
      .add("seed", std::to_string(seed));
  YAML::Node warnings(YAML::NodeType::Sequence);
  for (const auto& w : fr.warnings) warnings.push_back(w);
  r.add_node("warnings", warnings).add_node("theta_hat", mixture_node(fr.theta_hat));
  o.write("fit.yaml", r.to_yaml());

  io::CsvTable t({"m", "kind", "dof", "alpha", "mu", "sigma", "floor_active"});
  for (std::size_t m = 0; m < fr.theta_hat.size(); ++m) {
    const auto& c = fr.theta_hat[m];
    t.row({std::to_string(m), to_string(c.family.kind()),
           c.family.kind() == FamilyKind::student_t ? fixed17(c.family.dof()) : "", fixed17(c.alpha), fixed17(c.mu),
           fixed17(c.sigma), fr.floor_active[m] ? "1" : "0"});
  }
  o.write("components.csv", t.str());
  o.manifest(inv, cfg, seed, data_hash);
  if (!inv.quiet) out << "fit: n=" << n << " loglik=" << fixed17(fr.loglik) << " floor=" << fixed17(fr.floor.value) << "\n";
  return kOk;
}

// ---- simulate -------------------------------------------------------------

int cmd_simulate(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node study = section(cfg, "study");
  SimConfig sc;
  sc.theta0 = require_mixture(cfg);
  sc.true_set = true_set_of(cfg);
  if (cfg.root["spec"]) sc.spec = io::parse_spec(cfg.root["spec"]);
  if (cfg.root["schedules"]) {
    for (const auto& s : cfg.root["schedules"]) sc.schedules.push_back(io::parse_schedule(s));
  } else if (cfg.root["schedule"]) {
    sc.schedules.push_back(io::parse_schedule(cfg.root["schedule"]));
  }
  sc.n_grid = count_list(study["n_grid"], "study.n_grid");
  sc.reps = io::count_or(study, "reps", 1);
  sc.starts = io::count_or(study, "starts", 8);
  sc.seed = resolve_seed(inv, cfg);
  sc.fit_options = fit_options_of(study);

  SimReport rep = run_consistency(sc);

  Outputs o(inv.out);
  io::CsvTable t({"schedule_id", "n", "rep", "seed", "param_dist", "l1_dist", "loglik_hat", "loglik_true",
                  "floor_active_count", "wall_ms"});
  for (const auto& r : rep.rows) {
    t.row({std::to_string(r.schedule_id), std::to_string(r.n), std::to_string(r.rep), std::to_string(r.seed),
           fixed17(r.param_dist), fixed17(r.l1_dist), fixed17(r.loglik_hat), fixed17(r.loglik_true),
           std::to_string(r.floor_active_count), fixed17(inv.record_timing ? r.wall_ms : 0.0)});
  }
  o.write("report.csv", t.str());

  io::CsvTable s({"schedule_id", "n", "count", "median_param_dist", "median_l1_dist"});
  YAML::Node medians(YAML::NodeType::Sequence);
  for (const auto& row : rep.summary) {
    s.row({std::to_string(row.schedule_id), std::to_string(row.n), std::to_string(row.count),
           fixed17(row.median_param_dist), fixed17(row.median_l1_dist)});
    YAML::Node m;
    m["schedule_id"] = std::to_string(row.schedule_id);
    m["n"] = std::to_string(row.n);
    m["count"] = std::to_string(row.count);
    m["median_param_dist"] = fixed17(row.median_param_dist);
    m["median_l1_dist"] = fixed17(row.median_l1_dist);
    medians.push_back(m);
  }
  o.write("summary.csv", s.str());

  YAML::Node failures(YAML::NodeType::Sequence);
  for (const auto& f : rep.failures) {
    YAML::Node m;
    m["schedule_id"] = std::to_string(f.schedule_id);
    m["n"] = std::to_string(f.n);
    m["rep"] = std::to_string(f.rep);
    m["message"] = f.message;
    failures.push_back(m);
  }
  io::Record sum;
  sum.add("rows", rep.rows.size())
      .add("failed_reps", rep.failures.size())
      .add("spearman_l1_param", rep.spearman_l1_param)
      .add_node("medians", medians)
      .add_node("failures", failures);
  o.write("summary.yaml", sum.to_yaml());

  std::vector<io::Series> series;
  for (std::size_t k = 0; k < sc.schedules.size(); ++k) {
    io::Series p{"param s" + std::to_string(k), {}}, l{"L1 s" + std::to_string(k), {}};
    for (const auto& row : rep.summary) {
      if (row.schedule_id != k) continue;
      p.points.emplace_back(static_cast<double>(row.n), row.median_param_dist);
      l.points.emplace_back(static_cast<double>(row.n), row.median_l1_dist);
    }
    series.push_back(p);
    series.push_back(l);
  }
  o.write("dist_vs_n.svg", io::svg_line_chart("median distance vs n", "n (log scale)", "median distance", series));
  o.manifest(inv, cfg, sc.seed, std::nullopt);
  if (!inv.quiet) {
    for (const auto& row : rep.summary) {
      out << "schedule " << row.schedule_id << " n=" << row.n << " median param_dist=" << fixed17(row.median_param_dist)
          << " median l1=" << fixed17(row.median_l1_dist) << "\n";
    }
  }
  return kOk;
}

// ---- failure-demo ---------------------------------------------------------

int cmd_failure_demo(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node study = section(cfg, "study");
  FailureDemoConfig fc;
  fc.theta0 = require_mixture(cfg);
  fc.true_set = true_set_of(cfg);
  if (!cfg.root["schedule"]) throw ValidationError("config needs a 'schedule' section");
  fc.schedule = io::parse_schedule(cfg.root["schedule"]);
  fc.control_schedule = control_schedule_of(cfg);
  fc.n_grid = count_list(study["n_grid"], "study.n_grid");
  fc.starts = io::count_or(study, "starts", 8);
  fc.seed = resolve_seed(inv, cfg);
  fc.fit_options = fit_options_of(study);

  FailureReport rep = run_failure_demo(fc);

  Outputs o(inv.out);
  io::CsvTable t({"n", "log_floor", "loglik_spike", "loglik_reference", "gain", "spike_superior", "param_dist_spike",
                  "param_dist_reference"});
  for (const auto& r : rep.rows) {
    t.row({std::to_string(r.n), fixed17(r.log_floor), fixed17(r.loglik_spike), fixed17(r.loglik_reference),
           fixed17(r.gain), r.spike_superior ? "1" : "0", fixed17(r.param_dist_spike),
           fixed17(r.param_dist_reference)});
  }
  o.write("failure.csv", t.str());
  io::Record r;
  r.add("exponent", fc.schedule.exponent())
      .add("control_exponent", fc.control_schedule.exponent())
      .add("comparisons", rep.rows.size())
      .add("crossover_n", rep.crossover_n ? std::to_string(*rep.crossover_n) : std::string("none"));
  o.write("failure.yaml", r.to_yaml());
  o.manifest(inv, cfg, fc.seed, std::nullopt);
  if (!inv.quiet) {
    for (const auto& row : rep.rows) {
      out << "n=" << row.n << " gain=" << fixed17(row.gain) << (row.spike_superior ? " spike superior" : "") << "\n";
    }
    out << "crossover: " << (rep.crossover_n ? std::to_string(*rep.crossover_n) : "none") << "\n";
  }
  return kOk;
}

// ---- degenerate-demo ------------------------------------------------------

int cmd_degenerate_demo(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node sec = section(cfg, "degenerate");
  DegenerateDemoConfig dc;
  dc.theta0 = require_mixture(cfg);
  dc.control_schedule = cfg.root["schedule"] ? io::parse_schedule(cfg.root["schedule"]) : SieveSchedule{};
  dc.n = io::count_or(sec, "n", dc.n);
  dc.halvings = io::count_or(sec, "halvings", dc.halvings);
  if (sec["sigma_start"]) dc.sigma_start = io::parse_decimal(sec["sigma_start"], "degenerate.sigma_start");
  dc.starts = io::count_or(sec, "starts", dc.starts);
  dc.seed = resolve_seed(inv, cfg);
  dc.fit_options = fit_options_of(sec);

  DegenerateDemoReport rep = run_degenerate_demo(dc);

  Outputs o(inv.out);
  io::CsvTable t({"step", "sigma", "log_sigma", "loglik", "increment"});
  for (std::size_t k = 0; k < rep.path.size(); ++k) {
    double inc = k == 0 ? std::nan("") : rep.path[k].loglik - rep.path[k - 1].loglik;
    t.row({std::to_string(k + 1), fixed17(rep.path[k].sigma), fixed17(rep.path[k].log_sigma),
           fixed17(rep.path[k].loglik), fixed17(inc)});
  }
  o.write("path.csv", t.str());
  io::Record r;
  r.add("n", dc.n)
      .add("x1", rep.data.front())
      .add("halvings", dc.halvings)
      .add("constrained_loglik", rep.constrained_loglik)
      .add("final_loglik", rep.path.back().loglik)
      .add("excess", rep.excess)
      .add_node("constrained", mixture_node(rep.constrained))
      .add_node("base", mixture_node(rep.base));
  o.write("degenerate.yaml", r.to_yaml());
  o.manifest(inv, cfg, dc.seed, std::nullopt);
  if (!inv.quiet) out << "excess over constrained optimum: " << fixed17(rep.excess) << " nats\n";
  return kOk;
}

// ---- bounds ---------------------------------------------------------------

int cmd_bounds(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node sec = section(cfg, "bounds");
  const MixtureParams theta0 = require_mixture(cfg);
  const std::uint64_t seed = resolve_seed(inv, cfg);

  ContextInputs in;
  in.kappa0 = io::parse_decimal(sec["kappa0"], "bounds.kappa0");
  in.c0 = io::parse_decimal(sec["c0"], "bounds.c0");
  in.M = theta0.size();
  in.envelope = combined_envelope(families_of(theta0));
  if (sec["envelope"]) {
    const auto& e = sec["envelope"];
    in.envelope = Envelope{io::parse_decimal(e["v0"], "envelope.v0"), io::parse_decimal(e["v1"], "envelope.v1"),
                           io::parse_decimal(e["beta"], "envelope.beta")};
  }
  in.theta0 = theta0;
  in.A0 = io::decimal_or(sec, "A0", 1.0);
  in.zeta = io::decimal_or(sec, "zeta", 1.0);
  if (sec["lambda0"]) in.lambda0 = io::parse_decimal(sec["lambda0"], "bounds.lambda0");
  const BoundContext ctx = derive_context(in);

  io::Record r;
  r.add("kappa0", ctx.kappa0)
      .add("c0", ctx.c0)
      .add("M", ctx.M)
      .add("v0", ctx.v0)
      .add("v1", ctx.v1)
      .add("beta", ctx.beta)
      .add("beta_tilde", ctx.beta_tilde)
      .add("nu_coefficient", ctx.nu_coefficient)
      .add("v2", ctx.v2)
      .add("B", ctx.B)
      .add("A0", ctx.A0)
      .add("zeta", ctx.zeta)
      .add("u0", *ctx.u0)
      .add("u1", *ctx.u1)
      .add("mu_bar0", *ctx.mu_bar0);
  YAML::Node conds(YAML::NodeType::Sequence);
  for (const auto& c : ctx.conditions) {
    YAML::Node m;
    m["name"] = c.name;
    m["lhs"] = fixed17(c.lhs);
    m["rhs"] = fixed17(c.rhs);
    m["evaluated"] = c.evaluated ? "true" : "false";
    m["holds"] = c.holds ? "true" : "false";
    conds.push_back(m);
  }
  r.add_node("conditions", conds);

  Outputs o(inv.out);
  bool all_ok = true;
  if (inv.verify_all) {
    const GridSpec grid = io::parse_grid(sec["grid"], GridSpec{-20.0, 20.0, 4001});
    MixtureParams probe = theta0;
    if (cfg.root["probe"]) {
      probe = io::parse_mixture(cfg.root["probe"]);
    } else {
      std::vector<Component> comps;
      for (const auto& c : theta0.components()) comps.push_back(Component::make(c.alpha, c.family, c.mu, ctx.c0 / 2.0));
      probe = MixtureParams::full(std::move(comps));
    }
    if (probe.size() != ctx.M) throw ValidationError("probe must have M components");

    const auto& c0 = probe[0];
    SweepReport l1 = verify_component_step(c0.family, c0.mu, c0.sigma, ctx, grid);
    o.write("lemma1.csv", csv_sweep(l1.rows, "x"));

    StepBoundReport sb = verify_step_bound(probe, ctx, grid);
    o.write("lemma2.csv", csv_sweep(sb.density_rows, "x"));
    o.write("lemma3.csv", csv_sweep(sb.width_rows, "t"));

    SweepReport tail = verify_true_tail(theta0, ctx, grid);
    o.write("lemma4.csv", csv_sweep(tail.rows, "x"));

    // Observed exceedance frequency against the union bound n P(|X| > A_n).
    std::vector<std::size_t> ns =
        sec["extreme_n"] ? count_list(sec["extreme_n"], "bounds.extreme_n") : std::vector<std::size_t>{25, 100, 400};
    const std::size_t reps = io::count_or(sec, "extreme_reps", 2000);
    std::vector<SweepRow> ev;
    bool ev_ok = true;
    for (std::size_t n : ns) {
      double freq = extreme_exceedance_mc(theta0, ctx, n, reps, seed);
      double bound = std::min(1.0, static_cast<double>(n) * tail_mass_outside(theta0, extreme_radius(ctx, n)));
      ev.push_back({static_cast<double>(n), freq, bound, freq - bound});
    }
    for (std::size_t i = 1; i < ev.size(); ++i) ev_ok = ev_ok && ev[i].lhs <= ev[i - 1].lhs;
    o.write("lemma5.csv", csv_sweep(ev, "n"));

    const std::size_t n_max = io::count_or(sec, "okamoto_n_max", 200);
    io::CsvTable ok({"n", "p", "eps", "exact", "bound", "margin"});
    bool okamoto_ok = true;
    for (std::size_t n = 1; n <= n_max; ++n) {
      for (int pi = 0; pi <= 10; ++pi) {
        for (int ei = 1; ei <= 10; ++ei) {
          const double p = pi / 10.0, eps = ei * 0.05;
          OkamotoResult res = okamoto_bound(n, p, eps);
          okamoto_ok = okamoto_ok && res.exact_tail <= res.bound;
          ok.row({std::to_string(n), fixed17(p), fixed17(eps), fixed17(res.exact_tail), fixed17(res.bound),
                  fixed17(res.exact_tail - res.bound)});
        }
      }
    }
    o.write("okamoto.csv", ok.str());

    r.add("component_step_holds", l1.holds)
        .add("step_density_holds", sb.density_ok)
        .add("step_width_holds", sb.width_ok)
        .add("T", sb.T)
        .add("T_within_2M", sb.count_ok)
        .add("true_tail_holds", tail.holds)
        .add("exceedance_nonincreasing", ev_ok)
        .add("okamoto_holds", okamoto_ok)
        .add("worst_density_margin", sb.worst_density_margin)
        .add("worst_width_margin", sb.worst_width_margin)
        .add("worst_tail_margin", tail.worst_margin);
    all_ok = l1.holds && sb.passes() && tail.holds && okamoto_ok;
  }
  o.write("bounds.yaml", r.to_yaml());
  o.manifest(inv, cfg, seed, std::nullopt);
  if (!inv.quiet) {
    for (const auto& c : ctx.conditions) {
      out << (c.evaluated ? (c.holds ? "holds   " : "FAILS   ") : "skipped ") << c.name << "\n";
    }
    if (inv.verify_all) out << "verification sweeps: " << (all_ok ? "all hold" : "violations found") << "\n";
  }
  return kOk;
}

// ---- margin ---------------------------------------------------------------

int cmd_margin(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node sec = section(cfg, "margin");
  const MixtureParams theta0 = require_mixture(cfg);
  const double kappa = io::parse_decimal(sec["kappa"], "margin.kappa");
  const std::size_t target = io::count_or(sec, "candidates", 5000);
  const std::uint64_t seed = resolve_seed(inv, cfg);

  CandidateGrid grid = CandidateGrid::around(theta0, target);
  if (sec["include_extremes"]) grid.include_extremes = sec["include_extremes"].as<bool>();
  MarginScanReport rep = margin_scan(theta0, kappa, grid, seed);
  IntegralEstimate self = kl_margin(theta0, theta0, 0.0);

  Outputs o(inv.out);
  io::Record r;
  r.add("kappa", kappa)
      .add("min_margin", rep.min_margin)
      .add("candidates", rep.candidates)
      .add("label", rep.label)
      .add("self_margin", self.value)
      .add("self_margin_error", self.error);
  if (rep.argmin) r.add_node("argmin", mixture_node(*rep.argmin));
  o.write("margin.yaml", r.to_yaml());
  o.manifest(inv, cfg, seed, std::nullopt);
  if (!inv.quiet) out << rep.label << ": min margin " << fixed17(rep.min_margin) << " at kappa " << fixed17(kappa) << "\n";
  return kOk;
}

// ---- check-family ---------------------------------------------------------

int cmd_check_family(const Invocation& inv, std::ostream& out) {
  io::Config cfg = io::load_config(inv.config);
  const YAML::Node sec = section(cfg, "check");
  const ComponentFamily family = io::parse_family(cfg.root["family"]);
  const GridSpec grid = io::parse_grid(sec["grid"]);
  const std::uint64_t seed = resolve_seed(inv, cfg);

  EnvelopeReport env = check_envelope(family, grid);
  std::vector<std::pair<double, double>> params{{0.0, 1.0}, {1.0, 0.5}, {-2.0, 2.0}};
  if (sec["param_grid"]) {
    params.clear();
    for (const auto& p : sec["param_grid"]) {
      if (!p.IsSequence() || p.size() != 2) throw ValidationError("param_grid entries are [mu, sigma] pairs");
      params.emplace_back(io::parse_decimal(p[0], "mu"), io::parse_decimal(p[1], "sigma"));
    }
  }
  std::vector<double> radii{0.1, 0.01, 0.001};
  if (sec["radii"]) radii = decimal_list(sec["radii"], "check.radii");
  RegularityReport reg = check_regularity(family, params, radii);

  Outputs o(inv.out);
  const Envelope& e = family.envelope();
  io::CsvTable sweep({"x", "lhs", "rhs", "margin"});
  for (double x : grid.points()) {
    double f = family.density(x);
    double bound = x == 0.0 ? e.v0 : std::min(e.v0, e.v1 * std::pow(std::abs(x), -e.beta));
    sweep.row({fixed17(x), fixed17(f), fixed17(bound), fixed17(f - bound)});
  }
  o.write("envelope.csv", sweep.str());

  io::CsvTable rt({"mu", "sigma", "x", "density", "sup_largest_ball", "sup_smallest_ball", "monotone", "converges",
                   "at_known_discontinuity"});
  for (const auto& p : reg.points) {
    rt.row({fixed17(p.mu), fixed17(p.sigma), fixed17(p.x), fixed17(p.density), fixed17(p.ball_sup.front()),
            fixed17(p.ball_sup.back()), p.monotone ? "1" : "0", p.converges ? "1" : "0",
            p.at_known_discontinuity ? "1" : "0"});
  }
  o.write("regularity.csv", rt.str());

  const char* origin = family.envelope_origin() == EnvelopeOrigin::exact       ? "exact"
                       : family.envelope_origin() == EnvelopeOrigin::numerical ? "numerical"
                                                                               : "user_supplied";
  io::Record r;
  r.add("kind", to_string(family.kind()))
      .add("v0", e.v0)
      .add("v1", e.v1)
      .add("beta", e.beta)
      .add("envelope_origin", origin)
      .add("envelope_holds", env.holds)
      .add("worst_margin", env.worst_margin)
      .add("worst_x", env.worst_x)
      .add("regularity_comparisons", reg.comparisons)
      .add("regularity_failures", reg.failures)
      .add("regularity_passes", reg.passes)
      .add("measurability", reg.measurability);
  o.write("family.yaml", r.to_yaml());
  o.manifest(inv, cfg, seed, std::nullopt);
  if (!inv.quiet) {
    out << to_string(family.kind()) << ": envelope " << (env.holds ? "holds" : "VIOLATED") << ", regularity "
        << (reg.passes ? "passes" : "fails") << "\n";
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sieve maximum likelihood for location-scale mixtures", "sievemix"};
  app.require_subcommand(1);
  Invocation inv;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", inv.config, "config file")->check(CLI::ExistingFile);
    if (config_required) c->required();
    sub->add_option("--out", inv.out, "output directory")->capture_default_str();
    sub->add_option("--seed", inv.seed, "seed override");
    sub->add_flag("--quiet", inv.quiet, "suppress the console summary");
  };

  auto* fit = app.add_subcommand("fit", "sieve MLE on a data file");
  add_common(fit, false);
  fit->add_option("--spec", inv.config, "fit config (spec, schedule, fit section)")->check(CLI::ExistingFile);
  fit->add_option("--data", inv.data, "newline-delimited data file")->check(CLI::ExistingFile);
  fit->add_flag("--n-auto", inv.n_auto, "take n from the data file");

  auto* simulate = app.add_subcommand("simulate", "consistency study");
  add_common(simulate, true);
  simulate->add_flag("--record-timing", inv.record_timing, "write measured wall_ms instead of 0");

  auto* failure = app.add_subcommand("failure-demo", "spike versus best nondegenerate fit");
  add_common(failure, true);
  auto* degenerate = app.add_subcommand("degenerate-demo", "likelihood along a shrinking scale");
  add_common(degenerate, true);
  auto* bounds = app.add_subcommand("bounds", "bound constants and verification sweeps");
  add_common(bounds, true);
  bounds->add_flag("--verify-all", inv.verify_all, "write all verification sweeps");
  auto* margin = app.add_subcommand("margin", "separation margin scan");
  add_common(margin, true);
  auto* check = app.add_subcommand("check-family", "envelope and regularity checks for a family");
  add_common(check, true);

  const std::vector<std::string> known{"fit", "simulate", "failure-demo", "degenerate-demo", "bounds", "margin",
                                      "check-family"};
  if (!args.empty() && !args.front().empty() && args.front().front() != '-' &&
      std::find(known.begin(), known.end(), args.front()) == known.end()) {
    err << "error: unknown subcommand '" << args.front() << "'\n" << app.help();
    return kUsage;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  inv.command = chosen->get_name();
  if (inv.command == "fit" && inv.config.empty()) {
    err << "error: fit needs --spec or --config\n" << chosen->help();
    return kUsage;
  }

  try {
    if (inv.command == "fit") return cmd_fit(inv, out);
    if (inv.command == "simulate") return cmd_simulate(inv, out);
    if (inv.command == "failure-demo") return cmd_failure_demo(inv, out);
    if (inv.command == "degenerate-demo") return cmd_degenerate_demo(inv, out);
    if (inv.command == "bounds") return cmd_bounds(inv, out);
    if (inv.command == "margin") return cmd_margin(inv, out);
    if (inv.command == "check-family") return cmd_check_family(inv, out);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const YAML::Exception& e) {
    err << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
  err << "error: unknown subcommand\n" << app.help();
  return kUsage;
}

}  // namespace sievemix::cli
