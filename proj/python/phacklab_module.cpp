#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "phacklab/diagnostics.hpp"
#include "phacklab/errors.hpp"
#include "phacklab/experiments.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace phacklab;

namespace {

/// nlohmann::json to Python objects through the json module.
py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

}  // namespace

PYBIND11_MODULE(_phacklab, m) {
  m.doc() = "Belief dynamics under p-hacking: models, optimizer, simulation and diagnostics";
  m.attr("__version__") = kVersion;

  py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
  py::register_exception<SaturationError>(m, "SaturationError", PyExc_OverflowError);
  py::register_exception<ModelError>(m, "ModelError", PyExc_ValueError);
  py::register_exception<OverflowError>(m, "PayoffOverflowError", PyExc_OverflowError);
  py::register_exception<BracketError>(m, "BracketError", PyExc_RuntimeError);
  py::register_exception<DiagnosticsError>(m, "DiagnosticsError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<BeliefState>(m, "BeliefState")
      .def_static("from_log_ratio", &BeliefState::from_log_ratio, "lam"_a)
      .def_static("from_weight", &BeliefState::from_weight, "u"_a)
      .def_property_readonly("lam", &BeliefState::lambda)
      .def_property_readonly("u", &BeliefState::u)
      .def_property_readonly("v", &BeliefState::v)
      .def("__repr__", [](const BeliefState& b) {
        return "BeliefState(lam=" + format_double(b.lambda()) + ", u=" + format_double(b.u()) + ")";
      });

  py::class_<SuccessModel>(m, "SuccessModel")
      .def(py::init([](double alpha, double beta, double kappa) { return SuccessModel{alpha, beta, kappa}; }),
           "alpha"_a = 2.0, "beta"_a = 3.0, "kappa"_a = 8.0)
      .def_readwrite("alpha", &SuccessModel::alpha)
      .def_readwrite("beta", &SuccessModel::beta)
      .def_readwrite("kappa", &SuccessModel::kappa);

  m.def("success_probs", [](const SuccessModel& sm, double l) {
    const auto p = success_probs(sm, l);
    return py::make_tuple(p.pA, p.pB);
  }, "sm"_a, "l"_a, "(p_A(l), p_B(l))");
  m.def("peaks", [](const SuccessModel& sm) {
    const auto p = peaks(sm);
    return py::make_tuple(p.l_a, p.l_b);
  }, "sm"_a);
  m.def("validate_model", [](const SuccessModel& sm, double p, double eps) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& v : validate(sm, p, eps).violations) out.emplace_back(v.field, v.message);
    return out;
  }, "sm"_a, "p"_a, "eps"_a, "List of (field, message) violations; empty when valid.");

  m.def("information", [](double u, double l) { return information(u, l).nats; }, "u"_a, "l"_a);
  m.def("information_derivative", py::overload_cast<double, double>(&information_derivative), "u"_a, "l"_a);
  m.def("information_sup", [](double u) {
    const auto s = information_sup(u);
    return py::make_tuple(s.sup_low, s.sup_high, s.max);
  }, "u"_a);
  m.def("update_on_success", &update_on_success, "b"_a, "l"_a);
  m.def("update_on_failure", &update_on_failure, "b"_a, "l"_a, "p"_a, "sm"_a);

  py::enum_<PayoffKind>(m, "PayoffKind")
      .value("BoundedExp", PayoffKind::BoundedExp)
      .value("FastReciprocal", PayoffKind::FastReciprocal);

  py::class_<PayoffSpec>(m, "PayoffSpec")
      .def_static("bounded_exp", &PayoffSpec::bounded_exp, "c"_a = 1.0, "gamma"_a = 4.6)
      .def_static("fast_reciprocal", &PayoffSpec::fast_reciprocal, "c"_a = 1.0, "d"_a = 2.0,
                  "sm"_a = SuccessModel{})
      .def_readonly("kind", &PayoffSpec::kind)
      .def_readonly("c", &PayoffSpec::c)
      .def_readonly("gamma", &PayoffSpec::gamma)
      .def_readonly("d", &PayoffSpec::d);

  m.def("eval_payoff", [](const PayoffSpec& ps, double i) { return eval_payoff(ps, {i}); }, "ps"_a, "i"_a);
  m.def("expected_payoff", py::overload_cast<const PayoffSpec&, const SuccessModel&, double, double>(&expected_payoff),
        "ps"_a, "sm"_a, "u"_a, "l"_a);
  m.def("growth_compare", [](const PayoffSpec& a, const PayoffSpec& b) {
    const auto g = growth_compare(a, b);
    return py::dict("order"_a = to_string(g.order), "ratios"_a = std::vector<double>(g.ratios.begin(), g.ratios.end()),
                    "limit_estimate"_a = g.limit_estimate, "note"_a = g.note);
  }, "a"_a, "b"_a);

  py::class_<PolicyPoint>(m, "PolicyPoint")
      .def_readonly("u", &PolicyPoint::u)
      .def_readonly("lam", &PolicyPoint::lambda)
      .def_readonly("l_star", &PolicyPoint::l_star)
      .def_readonly("ep_star", &PolicyPoint::ep_star)
      .def_readonly("foc", &PolicyPoint::foc)
      .def_readonly("interior", &PolicyPoint::interior)
      .def_property_readonly("bracket", [](const PolicyPoint& p) {
        return py::make_tuple(p.bracket.l_lo, p.bracket.l_hi);
      });

  m.def("optimal_project", py::overload_cast<const PayoffSpec&, const SuccessModel&, double>(&optimal_project),
        "ps"_a, "sm"_a, "u"_a, py::call_guard<py::gil_scoped_release>());
  m.def("optimal_project_lam", [](const PayoffSpec& ps, const SuccessModel& sm, double lam) {
    return optimal_project(ps, sm, BeliefState::from_log_ratio(lam));
  }, "ps"_a, "sm"_a, "lam"_a, py::call_guard<py::gil_scoped_release>());
  m.def("foc_residual", [](const PayoffSpec& ps, const SuccessModel& sm, double u, double l) {
    return foc_residual(ps, sm, u, l).relative();
  }, "ps"_a, "sm"_a, "u"_a, "l"_a);

  m.def("drift", [](const SuccessModel& sm, double p, double eps, double l) {
    const auto d = drift(sm, p, eps, l);
    return py::make_tuple(d.base, d.distortion, d.total);
  }, "sm"_a, "p"_a, "eps"_a, "l"_a, "(base, distortion, total)");
  m.def("sigma_sq", [](const SuccessModel& sm, double p, double eps, double l) { return sigma_sq(sm, p, eps, l); },
        "sm"_a, "p"_a, "eps"_a, "l"_a);

  m.def("simulate", [](const PayoffSpec& ps, double p, double eps, std::int64_t horizon, std::uint64_t seed,
                       std::uint64_t stream, double lambda0, const SuccessModel& sm) {
    ScenarioConfig cfg;
    cfg.ps = ps;
    cfg.sm = sm;
    cfg.p = p;
    cfg.eps = eps;
    cfg.horizon = horizon;
    cfg.seed = seed;
    cfg.lambda0 = lambda0;
    Trajectory tr;
    {
      py::gil_scoped_release release;
      tr = Simulator(cfg).simulate(stream);
    }
    std::vector<double> lam, l_star, drift_total, sig;
    std::vector<bool> success;
    lam.push_back(tr.lambda0);
    for (const auto& r : tr.steps) {
      lam.push_back(r.lambda_next);
      l_star.push_back(r.l_star);
      success.push_back(r.outcome == Outcome::Success);
      drift_total.push_back(r.drift_base + r.drift_distortion);
      sig.push_back(r.sigma_sq);
    }
    return py::dict("lam"_a = lam, "l_star"_a = l_star, "success"_a = success, "drift"_a = drift_total,
                    "sigma_sq"_a = sig, "saturated"_a = tr.saturated,
                    "label"_a = to_string(classify_convergence(tr).label));
  }, "ps"_a, "p"_a = 0.5, "eps"_a = 0.0, "horizon"_a = 1000, "seed"_a = 0, "stream"_a = 0, "lambda0"_a = 0.0,
     "sm"_a = SuccessModel{},
     "One trajectory; lam has horizon + 1 entries, the per-period lists horizon entries.");

  m.def("epsilon_threshold", [](const PayoffSpec& ps, const SuccessModel& sm, double p, double delta) {
    const auto range = empirical_policy_range(ps, sm);
    const double base = max_base_drift_magnitude(sm, p, range);
    const double d = delta > 0.0 ? delta : base / 2.0;
    const auto et = epsilon_threshold(sm, p, range, d);
    return py::dict("eps_bar"_a = et.eps_bar, "ok"_a = et.ok, "delta"_a = d, "diagnostic"_a = et.diagnostic,
                    "policy_min"_a = range.min(), "policy_max"_a = range.max());
  }, "ps"_a, "sm"_a = SuccessModel{}, "p"_a = 0.5, "delta"_a = 0.0,
     "Threshold over the empirical policy range; delta = 0 uses half the largest base drift.");
  m.def("escape_threshold", [](const PayoffSpec& ps, const SuccessModel& sm, double p, double eps, double delta) {
    const auto es = escape_threshold(ps, sm, p, eps, delta);
    return py::dict("ok"_a = es.ok, "lambda_bar"_a = es.lambda_bar, "l_bar"_a = es.l_bar,
                    "min_drift_below"_a = es.min_drift_below, "diagnostic"_a = es.diagnostic);
  }, "ps"_a, "sm"_a = SuccessModel{}, "p"_a = 0.5, "eps"_a = 0.05, "delta"_a = 0.01);

  m.def("load_config", [](const std::string& path) { return to_python(to_json(load_config(path))); }, "path"_a,
        "Parsed and validated config with every default filled in.");
  m.def("run_scenario", [](const std::string& path, const std::string& out, unsigned workers, bool write_files) {
    const auto cfg = load_config(path);
    RunOptions o;
    o.out_base = out;
    o.workers = workers;
    o.write_files = write_files;
    RunResult res;
    {
      py::gil_scoped_release release;
      res = run_scenario(cfg, o);
    }
    py::dict d = to_python(res.manifest);
    d["dir"] = res.dir.string();
    return d;
  }, "config_path"_a, "out"_a = "out", "workers"_a = 1, "write_files"_a = true,
     "Runs a scenario file and returns its manifest (plus the output dir).");
}
