#include "opf/diagnostics.hpp"
#include "opf/harness/config.hpp"
#include "opf/harness/experiment.hpp"
#include "opf/kalman.hpp"
#include "opf/predictor.hpp"
#include "opf/sysmodel.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace opf;

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows of a (N, m) array are the samples.
Series to_series(const Eigen::Ref<const RowMajor>& rows) {
    Series out(rows.rows());
    for (Eigen::Index k = 0; k < rows.rows(); ++k) out[k] = rows.row(k).transpose();
    return out;
}

RowMajor to_rows(const Series& s) {
    if (s.empty()) return RowMajor(0, 0);
    RowMajor out(s.size(), s.front().size());
    for (std::size_t k = 0; k < s.size(); ++k) out.row(k) = s[k].transpose();
    return out;
}

SystemModel make_model(Matrix A, Matrix C, Matrix Q, Matrix R) {
    return SystemModel{std::move(A), std::move(C), std::move(Q), std::move(R)};
}

py::dict run_to_dict(const OpfRun& run) {
    py::dict d;
    d["first_step"] = run.first_step;
    d["predictions"] = to_rows(run.predictions);
    d["horizon"] = run.horizon;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Online prediction with forgetting: core bindings";

    auto base = py::register_exception<Error>(m, "OpfError");
    py::register_exception<StructuralError>(m, "StructuralError", base.ptr());
    py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
    py::register_exception<NumericalError>(m, "NumericalError", base.ptr());
    py::register_exception<UsageError>(m, "UsageError", base.ptr());
    py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

    py::class_<SystemModel>(m, "SystemModel")
        .def(py::init(&make_model), py::arg("A"), py::arg("C"), py::arg("Q"), py::arg("R"))
        .def_readwrite("A", &SystemModel::A)
        .def_readwrite("C", &SystemModel::C)
        .def_readwrite("Q", &SystemModel::Q)
        .def_readwrite("R", &SystemModel::R)
        .def("validate", [](const SystemModel& s) { return validate_model(s).failures; });

    py::class_<SteadyFilter>(m, "SteadyFilter")
        .def_readonly("P", &SteadyFilter::P)
        .def_readonly("L", &SteadyFilter::L)
        .def_readonly("Rbar", &SteadyFilter::Rbar)
        .def_readonly("iterations", &SteadyFilter::iterations)
        .def_readonly("residual", &SteadyFilter::residual);

    m.def("solve_dare", &solve_dare, py::arg("model"), py::arg("tol") = kDareTolerance,
          py::arg("max_iter") = kDareMaxIterations);

    m.def(
        "simulate",
        [](const SystemModel& model, std::size_t horizon, std::uint64_t seed, std::optional<Vector> x0,
           std::uint64_t replicate) {
            const auto tr = simulate(model, horizon, seed, x0, replicate);
            return py::make_tuple(to_rows(tr.states), to_rows(tr.observations));
        },
        py::arg("model"), py::arg("horizon"), py::arg("seed"), py::arg("x0") = py::none(), py::arg("replicate") = 0,
        "Returns (states, observations) as (N+1, n) and (N+1, m) arrays.");

    m.def(
        "kalman_predictions",
        [](const SteadyFilter& f, const SystemModel& model, const Eigen::Ref<const RowMajor>& y) {
            const auto out = run_steady_predictor(f, model, to_series(y));
            return py::make_tuple(to_rows(out.predictions), to_rows(out.innovations));
        },
        py::arg("filter"), py::arg("model"), py::arg("observations"));

    m.def("spectral_radius_closed_loop", [](const SystemModel& model, const SteadyFilter& f) {
        return spectral_info(model, f).rho_closed;
    });

    py::class_<OpfParams>(m, "OpfParams")
        .def(py::init([](double beta, double lambda, double gamma, std::size_t T_init, int N_E, bool direct) {
                 OpfParams p;
                 p.beta = beta;
                 p.lambda = lambda;
                 p.gamma = gamma;
                 p.T_init = T_init;
                 p.N_E = N_E;
                 p.init = direct ? EpochInit::Direct : EpochInit::Iterative;
                 return p;
             }),
             py::arg("beta") = 2.5, py::arg("lambda_") = 1.0, py::arg("gamma") = 1.0, py::arg("T_init") = 60,
             py::arg("N_E") = 7, py::arg("direct_init") = false)
        .def_readwrite("beta", &OpfParams::beta)
        .def_readwrite("lambda_", &OpfParams::lambda)
        .def_readwrite("gamma", &OpfParams::gamma)
        .def_readwrite("T_init", &OpfParams::T_init)
        .def_readwrite("N_E", &OpfParams::N_E);

    m.def(
        "epoch_schedule",
        [](const OpfParams& p) {
            std::vector<std::tuple<int, std::size_t, int>> out;
            for (const auto& e : epoch_schedule(p).epochs) out.emplace_back(e.index, e.T, e.p);
            return out;
        },
        "List of (index, T, p) per epoch.");

    m.def(
        "run_opf", [](const Eigen::Ref<const RowMajor>& y, const OpfParams& p) { return run_to_dict(run_opf(to_series(y), p)); },
        py::arg("observations"), py::arg("params"));
    m.def(
        "run_uniform_forgetting",
        [](const Eigen::Ref<const RowMajor>& y, const OpfParams& p, double alpha) {
            return run_to_dict(run_uniform_forgetting(to_series(y), p, alpha));
        },
        py::arg("observations"), py::arg("params"), py::arg("alpha"));

    m.def(
        "regret_series",
        [](const Eigen::Ref<const RowMajor>& y, const Eigen::Ref<const RowMajor>& online,
           const Eigen::Ref<const RowMajor>& kalman, std::size_t first_step) {
            const auto r = regret_series(to_series(y), to_series(online), to_series(kalman), first_step);
            py::dict d;
            d["first_step"] = r.first_step;
            d["online_loss"] = r.online_loss;
            d["kalman_loss"] = r.kalman_loss;
            d["cum_regret"] = r.cum_regret;
            d["cum_gap"] = r.cum_gap;
            d["cum_martingale"] = r.cum_martingale;
            d["identity_defect"] = r.identity_defect();
            return d;
        },
        py::arg("y"), py::arg("online"), py::arg("kalman"), py::arg("first_step") = 0);

    m.def("builtin_names", &harness::builtin_names);
    m.def("builtin_text", &harness::builtin_text, py::arg("name"));

    m.def(
        "run_experiment",
        [](const std::string& config, std::optional<int> seeds, std::optional<std::string> out, int workers) {
            auto c = harness::load_config(config);
            if (seeds) c.seeds = *seeds;
            c.workers = workers;
            harness::ExperimentResult res;
            {
                py::gil_scoped_release release;
                res = harness::run_experiment(c);
            }
            if (out) harness::write_outputs(res, *out);
            py::list runs;
            for (const auto& r : res.runs) {
                py::dict d;
                d["seed"] = r.seed;
                d["method"] = r.label;
                d["status"] = r.status;
                d["final_regret"] = r.ok() ? r.regret.final_regret() : std::numeric_limits<double>::quiet_NaN();
                d["identity_defect"] = r.identity_defect;
                runs.append(d);
            }
            py::dict d;
            d["name"] = res.config.name;
            d["config_hash"] = harness::hash_hex(res.hash);
            d["gamma_auto"] = res.gamma_auto;
            d["runs"] = runs;
            return d;
        },
        py::arg("config"), py::arg("seeds") = py::none(), py::arg("out") = py::none(), py::arg("workers") = 1,
        "Runs a builtin name or config path; writes the CSV outputs when out is given.");
}
