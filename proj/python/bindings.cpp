#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "doedr/admm.hpp"
#include "doedr/error.hpp"
#include "doedr/geometry.hpp"
#include "doedr/study.hpp"

namespace py = pybind11;
using namespace doedr;

namespace {

using Point = std::pair<double, double>;

std::vector<PQ> to_points(const std::vector<Point>& pts) {
    std::vector<PQ> out;
    out.reserve(pts.size());
    for (const auto& [p, q] : pts) out.push_back({p, q});
    return out;
}

py::dict power_flow(const FeederModel& feeder, const std::vector<std::tuple<std::string, std::string, double, double>>& rows) {
    const auto adm = assemble_admittance(feeder);
    auto inj = InjectionSet::zeros(feeder.buses().size());
    for (const auto& [bus, phase, p, q] : rows) {
        if (phase.size() != 1 || phase[0] < 'a' || phase[0] > 'c') throw InputError("phase must be a, b or c");
        inj.add(feeder.bus_index(bus), static_cast<std::size_t>(phase[0] - 'a'), p, q);
    }
    const auto sol = solve_power_flow(adm, inj);
    py::dict magnitudes;
    for (std::size_t b = 0; b < feeder.buses().size(); ++b) {
        magnitudes[py::str(feeder.buses()[b])] = std::vector<double>{sol.magnitude(b, 0), sol.magnitude(b, 1), sol.magnitude(b, 2)};
    }
    py::dict out;
    out["magnitude_pu"] = magnitudes;
    out["iterations"] = sol.iterations;
    out["max_mismatch_pu"] = sol.max_mismatch_pu;
    return out;
}

std::string run_study_json(const std::filesystem::path& config, std::optional<std::filesystem::path> out,
                           std::optional<std::uint64_t> seed, std::optional<std::size_t> scenarios) {
    StudyConfig cfg = load_study(config);
    if (seed) cfg.seed = *seed;
    if (scenarios) cfg.scenarios = *scenarios;
    RunOptions opt;
    opt.out_dir = std::move(out);
    RunArtifacts art;
    {
        py::gil_scoped_release release;
        art = run_study(cfg, opt);
    }
    return to_json(art.summary).dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Operating-envelope demand response core";

    static py::exception<Error> base(m, "DoedrError");
    static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
    static py::exception<InputError> input_error(m, "InputError", base.ptr());
    static py::exception<ConvergenceError> convergence_error(m, "ConvergenceError", base.ptr());
    static py::exception<EnvelopeError> envelope_error(m, "EnvelopeError", base.ptr());
    static py::exception<IoError> io_error(m, "IoError", base.ptr());
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const ConfigError& e) {
            py::set_error(config_error, e.what());
        } catch (const InputError& e) {
            py::set_error(input_error, e.what());
        } catch (const ConvergenceError& e) {
            py::set_error(convergence_error, e.what());
        } catch (const EnvelopeError& e) {
            py::set_error(envelope_error, e.what());
        } catch (const IoError& e) {
            py::set_error(io_error, e.what());
        } catch (const Error& e) {
            py::set_error(base, e.what());
        }
    });

    py::class_<FeederModel>(m, "Feeder")
        .def_property_readonly("buses", &FeederModel::buses)
        .def_property_readonly("slack_bus", &FeederModel::slack_bus)
        .def_property_readonly("line_count", [](const FeederModel& f) { return f.lines().size(); })
        .def_property_readonly("households", [](const FeederModel& f) {
            std::vector<std::tuple<std::string, std::string, std::string>> out;
            for (const auto& h : f.households()) out.emplace_back(h.household, h.bus, std::string(1, phase_letter(h.phase)));
            return out;
        });

    m.def("load_feeder", &load_feeder, py::arg("path"));
    m.def("solve_power_flow", &power_flow, py::arg("feeder"), py::arg("injections") = py::list(),
          "Injections are (bus, phase, p_kw, q_kvar) rows, export positive.");

    m.def(
        "injection_limits",
        [](const std::string& cls, double ac_rating_kw, double pv_kw, double ul_kw) {
            HouseholdSpec h;
            h.id = "py";
            h.cls = household_class_from_string(cls);
            h.ac_rating_kw = h.cls == HouseholdClass::Doe ? ac_rating_kw : 0.0;
            h.pv_rating_kw = h.cls == HouseholdClass::Passive ? 0.0 : pv_kw;
            const auto lim = injection_limits(h, pv_kw, ul_kw);
            return py::dict(py::arg("p_min") = lim.p_min, py::arg("p_max") = lim.p_max, py::arg("q_min") = lim.q_min,
                            py::arg("q_max") = lim.q_max);
        },
        py::arg("household_class"), py::arg("ac_rating_kw"), py::arg("pv_kw"), py::arg("ul_kw"));

    m.def(
        "convex_hull",
        [](const std::vector<Point>& pts) {
            std::vector<Point> out;
            for (const auto& v : convex_hull(to_points(pts))) out.emplace_back(v.p, v.q);
            return out;
        },
        py::arg("points"));
    m.def(
        "halfspace",
        [](const std::vector<Point>& pts) {
            const auto pq = to_points(pts);
            const auto h = halfspace_rep(convex_hull(pq));
            return py::make_tuple(h.a, h.b, h.degenerate);
        },
        py::arg("points"), "A, b and the degenerate flag of the hull of the points.");

    m.def(
        "comfort_interval",
        [](double t_in, double t_out, double p_max, double resistance, double capacitance, double cop, double dt_h,
           double lo, double hi) -> std::optional<Point> {
            ThermalParams p{resistance, capacitance, cop, dt_h};
            p.validate();
            const auto iv = comfort_power_interval({t_in}, p, t_out, {lo, hi}, p_max);
            if (!iv) return std::nullopt;
            return Point{iv->lo, iv->hi};
        },
        py::arg("t_in"), py::arg("t_out"), py::arg("p_max"), py::arg("resistance") = 2.0, py::arg("capacitance") = 2.0,
        py::arg("cop") = 2.5, py::arg("dt_h") = 5.0 / 60.0, py::arg("lo") = 22.0, py::arg("hi") = 24.0);

    m.def(
        "admm_track",
        [](const std::vector<Point>& intervals, const std::vector<double>& prices, double p_ref, double rho,
           double eps_prim, double eps_dual, int maxiter, std::optional<std::vector<double>> warm) {
            std::vector<Interval> iv;
            for (const auto& [lo, hi] : intervals) {
                if (!(lo <= hi)) throw InputError("interval lower bound exceeds upper bound");
                iv.push_back({lo, hi});
            }
            const std::vector<double> start = warm ? *warm : std::vector<double>(iv.size(), 0.0);
            const AdmmConfig cfg{rho, eps_prim, eps_dual, maxiter};
            const auto r = admm_track(iv, prices, start, p_ref, cfg);
            py::dict out;
            out["dispatch"] = r.dispatch();
            out["iterations"] = r.state.iteration;
            out["stop"] = std::string(to_string(r.stop));
            out["tracking_error"] = r.tracking_error();
            out["primal_norm"] = r.primal_norm_history;
            out["dual_norm"] = r.dual_norm_history;
            return out;
        },
        py::arg("intervals"), py::arg("prices"), py::arg("p_ref"), py::arg("rho") = 1.0, py::arg("eps_prim") = 1e-3,
        py::arg("eps_dual") = 1e-3, py::arg("maxiter") = 15, py::arg("warm_start") = py::none());

    m.def("_run_study_json", &run_study_json, py::arg("config"), py::arg("out") = py::none(),
          py::arg("seed") = py::none(), py::arg("scenarios") = py::none());
}
