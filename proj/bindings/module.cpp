#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metapinn/clustering.hpp"
#include "metapinn/discovery.hpp"
#include "metapinn/pipeline.hpp"
#include "metapinn/solver.hpp"

namespace py = pybind11;
using namespace metapinn;

namespace {

PbpkModel model_from(const std::string& drug, const std::string& route,
                     double dose_mg, double infusion_h) {
    DoseSchedule d;
    d.route = route == "oral" ? Route::Oral : Route::IV;
    d.dose_mg = dose_mg;
    d.infusion_h = infusion_h;
    return build_model(drug, d.route, d, {});
}

}  // namespace

PYBIND11_MODULE(metapinn, m) {
    m.doc() = "two-stage meta-inverse PINN for PBPK models";

    m.def(
        "state_names",
        [](const std::string& drug, const std::string& route) {
            return model_from(drug, route, 1.0, route == "iv" ? 1.0 : 0.0)
                .state_names;
        },
        py::arg("drug"), py::arg("route"));

    m.def(
        "simulate",
        [](const std::string& drug, const std::string& route, double dose_mg,
           double infusion_h, double horizon, int n) {
            PbpkModel mod = model_from(drug, route, dose_mg, infusion_h);
            VectorXd times = VectorXd::LinSpaced(n + 1, 0.0, horizon);
            Trajectory tr =
                integrate(mod, initial_state(mod), horizon, times);
            return py::make_tuple(tr.times, tr.states);
        },
        py::arg("drug"), py::arg("route"), py::arg("dose_mg"),
        py::arg("infusion_h"), py::arg("horizon"), py::arg("n") = 200);

    m.def(
        "mass_balance_error",
        [](const std::string& drug, const std::string& route, double dose_mg,
           double infusion_h, double horizon, int n) {
            PbpkModel mod = model_from(drug, route, dose_mg, infusion_h);
            VectorXd times = VectorXd::LinSpaced(n + 1, 0.0, horizon);
            Trajectory tr =
                integrate(mod, initial_state(mod), horizon, times);
            return mass_balance_error(mod, tr);
        },
        py::arg("drug"), py::arg("route"), py::arg("dose_mg"),
        py::arg("infusion_h"), py::arg("horizon"), py::arg("n") = 200);

    m.def("cluster", &cluster_trajectories, py::arg("trajectories"),
          py::arg("k"),
          "average-linkage grouping of states by correlation distance");

    m.def(
        "config_echo",
        [](const std::string& text) {
            return config_text(parse_config_text(text));
        },
        py::arg("text"), "parse a config and return the effective values");

    m.def(
        "run_pipeline",
        [](const std::string& text, const std::string& out) {
            return run_pipeline(parse_config_text(text), out);
        },
        py::arg("config_text"), py::arg("out_dir"));

    m.def(
        "power_law",
        [](const MatrixXd& rows) {
            std::vector<PiSample> samples(rows.rows());
            for (int i = 0; i < rows.rows(); ++i) {
                samples[size_t(i)].PIy = rows(i, 0);
                samples[size_t(i)].PI1 = rows(i, 1);
                samples[size_t(i)].PI2 = rows(i, 2);
            }
            PowerLawFit f = power_law_regress(samples);
            return py::make_tuple(f.c, f.a, f.b, f.r2);
        },
        py::arg("pi_rows"),
        "fit PIy = c * PI1^a * PI2^b from columns [PIy, PI1, PI2]");

    py::register_exception<ValidationError>(m, "ValidationError");
    py::register_exception<NumericError>(m, "NumericError");
}
