#include "stifflab/cli_io.hpp"
#include "stifflab/convergence_lab.hpp"
#include "stifflab/errors.hpp"
#include "stifflab/evolve.hpp"
#include "stifflab/snapping_mc.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace stifflab;

namespace {

// Scenarios cross the boundary as JSON text; the Python side passes json.dumps(dict).
Scenario scenario_from(const std::string& text)
{
    return parse_scenario(Json::parse(text));
}

const char* side_name(Side s)
{
    switch (s) {
    case Side::Minus:
        return "-";
    case Side::Plus:
        return "+";
    default:
        return "0";
    }
}

py::dict form_dict(const DiscreteForm& form)
{
    std::vector<std::string> sides;
    for (std::size_t i = 0; i < form.size(); ++i)
        sides.emplace_back(side_name(form.grid().side(i)));
    py::dict d;
    d["x"] = form.grid().nodes();
    d["side"] = sides;
    d["mass"] = form.mass();
    d["conductance"] = form.conductance();
    d["killing"] = form.killing();
    d["phase"] = static_cast<int>(form.tag().kind);
    return d;
}

py::dict assemble_py(const std::string& scenario)
{
    return form_dict(assemble(scenario_from(scenario)));
}

py::dict resolvent_py(const std::string& scenario, double alpha, const std::string& f)
{
    DiscreteForm form = assemble(scenario_from(scenario));
    auto rhs = sample_for(form, probes::by_name(f).f);
    ResolventSolve r = resolvent(form, alpha, rhs);
    py::dict d = form_dict(form);
    d["f"] = r.rhs;
    d["u"] = r.solution;
    d["residual"] = r.residual;
    return d;
}

py::dict sweep_py(const std::string& config)
{
    SweepReport r = run_phase_sweep(parse_sweep(Json::parse(config)));
    py::list rows;
    for (const auto& row : r.rows) {
        py::dict d;
        d["n"] = row.n;
        d["eps"] = row.eps;
        d["gamma_bar_n"] = row.gamma_bar_n;
        d["hypothesis_qty"] = row.hypothesis_qty;
        d["f_id"] = row.f_id;
        d["alpha"] = row.alpha;
        d["l2_error"] = row.l2_error;
        d["jump"] = row.jump;
        rows.append(d);
    }
    py::dict out;
    out["run_id"] = r.run_id;
    out["target_phase"] = r.target_phase;
    out["target_gamma_bar"] = r.target_gamma_bar;
    out["rows"] = rows;
    out["hypothesis_flagged"] = r.hypothesis_flagged;
    out["pass"] = r.pass();
    return out;
}

py::dict identity_py(const std::string& scenario, double kappa, double alpha, const std::string& f)
{
    IdentityCheck c = check_resolvent_identity(scenario_from(scenario), kappa, alpha, probes::by_name(f).f);
    py::dict d;
    d["max_abs_error"] = c.max_abs_error;
    d["denominator"] = c.denominator;
    d["uam_gap"] = c.uam_gap;
    return d;
}

py::tuple snob_minus_fraction(double kappa, double h, double T, std::size_t n_paths, std::uint64_t seed, const std::string& start_side)
{
    McOptions opt;
    opt.snapshot_times = {T};
    opt.record_events = false;
    GPoint x0{start_side == "-" ? Side::Minus : Side::Plus, 0.0, false};
    PathEnsemble e;
    {
        py::gil_scoped_release release;
        e = run_snob(x0, kappa, h, T, n_paths, seed, opt);
    }
    Estimate est = estimate(e, functional::MeanAt{T, probes::minus_side().f});
    return py::make_tuple(est.value, est.std_error);
}

} // namespace

PYBIND11_MODULE(_stifflab, m)
{
    m.doc() = "Discrete Dirichlet forms for the one-dimensional stiff problem";
    m.attr("__version__") = STIFFLAB_VERSION;

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    m.def("assemble_json", &assemble_py, py::arg("scenario"),
          "Assemble the scenario (JSON text) and return nodes, sides, masses, conductances and killing.");
    m.def("resolvent_json", &resolvent_py, py::arg("scenario"), py::arg("alpha"), py::arg("f") = "gauss",
          "Solve (alpha M + A) u = M f for a named probe f.");
    m.def("sweep_json", &sweep_py, py::arg("config"), "Run a barrier sweep from a full config (JSON text).");
    m.def("resolvent_identity_json", &identity_py, py::arg("scenario"), py::arg("kappa"), py::arg("alpha"), py::arg("f") = "gauss");
    m.def("snob_minus_fraction", &snob_minus_fraction, py::arg("kappa"), py::arg("h"), py::arg("T"), py::arg("n_paths"),
          py::arg("seed") = 1, py::arg("start_side") = "+",
          "Monte Carlo estimate (mean, std error) of P(Y_T on the minus side) for snapping-out Brownian motion from 0+ or 0-.");
}
