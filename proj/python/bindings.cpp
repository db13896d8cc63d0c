#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sievemix/bounds.hpp"
#include "sievemix/errors.hpp"
#include "sievemix/estimator.hpp"
#include "sievemix/mixture.hpp"
#include "sievemix/sim.hpp"

namespace py = pybind11;
using namespace sievemix;

namespace {

std::vector<ComponentFamily> families_of(const MixtureParams& theta) {
  std::vector<ComponentFamily> out;
  for (const auto& c : theta.components()) out.push_back(c.family);
  return out;
}

}  // namespace

PYBIND11_MODULE(_sievemix, m) {
  m.doc() = "Sieve maximum likelihood for location-scale mixtures";

  static py::exception<ValidationError> validation(m, "ValidationError", PyExc_ValueError);
  static py::exception<NumericalError> numerical(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      validation(e.what());
    } catch (const NumericalError& e) {
      numerical(e.what());
    }
  });

  py::class_<Envelope>(m, "Envelope")
      .def_readonly("v0", &Envelope::v0)
      .def_readonly("v1", &Envelope::v1)
      .def_readonly("beta", &Envelope::beta);

  py::class_<ComponentFamily>(m, "Family")
      .def_static("normal", &ComponentFamily::normal, py::arg("beta") = 2.0)
      .def_static("student_t", &ComponentFamily::student_t, py::arg("dof"), py::arg("beta") = py::none())
      .def_static("uniform", &ComponentFamily::uniform, py::arg("beta") = 2.0)
      .def_property_readonly("kind", [](const ComponentFamily& f) { return to_string(f.kind()); })
      .def_property_readonly("dof", &ComponentFamily::dof)
      .def_property_readonly("envelope", &ComponentFamily::envelope)
      .def("density", &ComponentFamily::density)
      .def("__repr__", [](const ComponentFamily& f) { return "Family(" + to_string(f.kind()) + ")"; });

  py::class_<Component>(m, "Component")
      .def(py::init([](double alpha, const ComponentFamily& f, double mu, double sigma) {
             return Component::make(alpha, f, mu, sigma);
           }),
           py::arg("alpha"), py::arg("family"), py::arg("mu"), py::arg("sigma"))
      .def_readonly("alpha", &Component::alpha)
      .def_readonly("family", &Component::family)
      .def_readonly("mu", &Component::mu)
      .def_readonly("sigma", &Component::sigma)
      .def_readonly("log_sigma", &Component::log_sigma);

  py::class_<MixtureParams>(m, "Mixture")
      .def(py::init([](std::vector<Component> comps, bool sub) {
             return sub ? MixtureParams::sub_probability(std::move(comps)) : MixtureParams::full(std::move(comps));
           }),
           py::arg("components"), py::arg("sub_probability") = false)
      .def_property_readonly("components", &MixtureParams::components)
      .def("__len__", &MixtureParams::size)
      .def("density", [](const MixtureParams& t, double x) { return mix_density(t, x); })
      .def("log_density", [](const MixtureParams& t, double x) { return mix_log_density(t, x); });

  m.def("log_likelihood", [](const MixtureParams& t, const std::vector<double>& d) { return log_likelihood(t, d); });
  m.def("l1_distance", [](const MixtureParams& a, const MixtureParams& b) { return l1_distance(a, b).value; });
  m.def("param_set_distance", [](const MixtureParams& t, const std::vector<MixtureParams>& set) {
    return param_set_distance(t, set);
  });

  py::class_<SieveSchedule>(m, "Schedule")
      .def(py::init([](double c0, double d, std::optional<double> override_exponent) {
             SieveSchedule s{c0, d, override_exponent};
             s.validate();
             return s;
           }),
           py::arg("c0") = 1.0, py::arg("d") = 0.5, py::arg("override_exponent") = py::none())
      .def_readonly("c0", &SieveSchedule::c0)
      .def_readonly("d", &SieveSchedule::d)
      .def_readonly("override_exponent", &SieveSchedule::override_exponent);

  m.def("sieve_floor", [](const SieveSchedule& s, std::size_t n) {
    ScaleFloor f = sieve_floor(s, n);
    return py::make_tuple(f.value, f.log_value);
  });

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("theta_hat", &FitResult::theta_hat)
      .def_readonly("loglik", &FitResult::loglik)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("floor_active", &FitResult::floor_active)
      .def_readonly("n", &FitResult::n)
      .def_property_readonly("floor", [](const FitResult& r) { return r.floor.value; })
      .def_readonly("start_index", &FitResult::start_index);

  m.def(
      "fit",
      [](const std::vector<double>& data, const std::vector<ComponentFamily>& spec, const SieveSchedule& schedule,
         std::size_t starts, std::uint64_t seed, std::optional<MixtureParams> init) {
        std::vector<MixtureParams> extra;
        if (init) extra.push_back(*init);
        return multi_start_fit(data, spec, schedule, starts, seed, {}, extra);
      },
      py::arg("data"), py::arg("spec"), py::arg("schedule") = SieveSchedule{}, py::arg("starts") = 8,
      py::arg("seed") = 1, py::arg("init") = py::none());

  m.def("sample", &sample, py::arg("theta"), py::arg("n"), py::arg("seed"));

  m.def(
      "kl_margin",
      [](const MixtureParams& theta0, const MixtureParams& g, double kappa) {
        return kl_margin(theta0, g, kappa).value;
      },
      py::arg("theta0"), py::arg("g"), py::arg("kappa"));

  m.def(
      "margin_scan",
      [](const MixtureParams& theta0, double kappa, std::size_t candidates, std::uint64_t seed) {
        auto r = margin_scan(theta0, kappa, CandidateGrid::around(theta0, candidates), seed);
        return py::make_tuple(r.min_margin, r.argmin, r.candidates);
      },
      py::arg("theta0"), py::arg("kappa"), py::arg("candidates") = 5000, py::arg("seed") = 1);

  m.def(
      "okamoto_bound",
      [](std::size_t n, double p, double eps) {
        auto r = okamoto_bound(n, p, eps);
        return py::make_tuple(r.exact_tail, r.bound);
      },
      py::arg("n"), py::arg("p"), py::arg("eps"));

  m.def(
      "bound_constants",
      [](const MixtureParams& theta0, double kappa0, double c0) {
        ContextInputs in;
        in.kappa0 = kappa0;
        in.c0 = c0;
        in.M = theta0.size();
        in.envelope = combined_envelope(families_of(theta0));
        in.theta0 = theta0;
        BoundContext ctx = derive_context(in);
        py::dict d;
        d["beta_tilde"] = ctx.beta_tilde;
        d["v0"] = ctx.v0;
        d["v1"] = ctx.v1;
        d["v2"] = ctx.v2;
        d["B"] = ctx.B;
        d["u0"] = *ctx.u0;
        d["u1"] = *ctx.u1;
        return d;
      },
      py::arg("theta0"), py::arg("kappa0"), py::arg("c0"));

  m.def(
      "consistency_medians",
      [](const MixtureParams& theta0, const SieveSchedule& schedule, std::vector<std::size_t> n_grid,
         std::size_t reps, std::uint64_t seed, std::size_t starts) {
        SimConfig c;
        c.theta0 = theta0;
        c.schedules = {schedule};
        c.n_grid = std::move(n_grid);
        c.reps = reps;
        c.seed = seed;
        c.starts = starts;
        SimReport r = run_consistency(c);
        py::list out;
        for (const auto& s : r.summary) out.append(py::make_tuple(s.n, s.median_param_dist, s.median_l1_dist));
        return out;
      },
      py::arg("theta0"), py::arg("schedule"), py::arg("n_grid"), py::arg("reps") = 5, py::arg("seed") = 1,
      py::arg("starts") = 4);

  m.attr("__version__") = SIEVEMIX_VERSION;
}
