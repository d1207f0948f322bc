#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>

#include "temv/backtest.hpp"
#include "temv/expansion.hpp"
#include "temv/montecarlo.hpp"

namespace py = pybind11;
using namespace temv;

namespace {

ReferenceKind ref_kind(const std::string& name) {
    return reference_kind_from_string(name);
}

std::shared_ptr<const RiccatiSolution> solve_shared(const MarketModel& m,
                                                    const PenaltySpec& spec,
                                                    int steps) {
    return std::make_shared<const RiccatiSolution>(
        solve_riccati(m, spec, TimeGrid(steps, spec.T)));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Mean-variance allocation with tracking-error penalization";

    py::register_exception<Error>(m, "TemvError");

    py::class_<MarketModel>(m, "MarketModel")
        .def(py::init<Eigen::VectorXd, Eigen::MatrixXd>(), py::arg("b"),
             py::arg("sigma"))
        .def_property_readonly("n_assets", &MarketModel::n_assets)
        .def_property_readonly("b", &MarketModel::b)
        .def_property_readonly("sigma", &MarketModel::sigma)
        .def_property_readonly("Sigma", &MarketModel::Sigma)
        .def_property_readonly("delta_floor", &MarketModel::delta_floor)
        .def_property_readonly("rho", &MarketModel::rho);

    py::class_<PenaltySpec>(m, "PenaltySpec")
        .def_static("scalar", &PenaltySpec::scalar, py::arg("gamma"),
                    py::arg("w_r"), py::arg("mu"), py::arg("T"), py::arg("x0"))
        .def_readwrite("gamma_matrix", &PenaltySpec::gamma_matrix)
        .def_readwrite("w_r", &PenaltySpec::w_r)
        .def_readwrite("mu", &PenaltySpec::mu)
        .def_readwrite("T", &PenaltySpec::T)
        .def_readwrite("x0", &PenaltySpec::x0);

    py::class_<TimeGrid>(m, "TimeGrid")
        .def(py::init<int, double>(), py::arg("n_steps"), py::arg("T"))
        .def_property_readonly("n_steps", &TimeGrid::n_steps)
        .def_property_readonly("dt", &TimeGrid::dt)
        .def("nodes", &TimeGrid::nodes);

    py::class_<RiccatiSolution, std::shared_ptr<RiccatiSolution>>(
        m, "RiccatiSolution")
        .def_readonly("K", &RiccatiSolution::K)
        .def_readonly("Lambda", &RiccatiSolution::Lambda)
        .def_readonly("Y", &RiccatiSolution::Y)
        .def_readonly("R", &RiccatiSolution::R)
        .def_readonly("C_origin", &RiccatiSolution::C_origin)
        .def_readonly("H", &RiccatiSolution::H)
        .def("nodes", [](const RiccatiSolution& s) { return s.grid.nodes(); })
        .def("mean_wealth_at", &RiccatiSolution::mean_wealth_at, py::arg("t"),
             py::arg("x0"));

    m.def("build_market", &build_market, py::arg("b"), py::arg("sigma"));
    m.def("covariance_from_vols_corr", &covariance_from_vols_corr,
          py::arg("vols"), py::arg("corr"));
    m.def(
        "reference_weights",
        [](const std::string& kind, const MarketModel& model, double tol) {
            return reference_weights(ref_kind(kind), model, tol);
        },
        py::arg("kind"), py::arg("model"), py::arg("tol") = 1e-10);
    m.def("estimate_params", &estimate_params, py::arg("returns"),
          py::arg("periods_per_year") = 252);
    m.def("study_market", &study_market);

    m.def(
        "solve_riccati",
        [](const MarketModel& model, const PenaltySpec& spec, int steps) {
            return std::make_shared<RiccatiSolution>(
                solve_riccati(model, spec, TimeGrid(steps, spec.T)));
        },
        py::arg("model"), py::arg("spec"), py::arg("steps") = 2520);
    m.def("value_at_zero", &value_at_zero, py::arg("sol"), py::arg("x0"));
    m.def("transition_factor", &transition_factor, py::arg("sol"), py::arg("s"),
          py::arg("t"));
    m.def(
        "gamma_sensitivity",
        [](const MarketModel& model, const PenaltySpec& spec,
           const RiccatiSolution& sol) {
            GammaSensitivity s = gamma_sensitivity(model, spec, sol);
            return py::make_tuple(s.psi, s.phi);
        },
        py::arg("model"), py::arg("spec"), py::arg("sol"));

    m.def(
        "control_mkv",
        [](const MarketModel& model, const PenaltySpec& spec,
           const RiccatiSolution& sol, double t, double x, double x_bar) {
            return control_mkv(model, spec, sol, {t, x, x_bar});
        },
        py::arg("model"), py::arg("spec"), py::arg("sol"), py::arg("t"),
        py::arg("x"), py::arg("x_bar"));
    m.def("control_feedback_x0", &control_feedback_x0, py::arg("model"),
          py::arg("spec"), py::arg("sol"), py::arg("t"), py::arg("x"));
    m.def("control_classical", &control_classical, py::arg("model"),
          py::arg("mu"), py::arg("T"), py::arg("x0"), py::arg("t"), py::arg("x"));
    m.def("control_reference", &control_reference, py::arg("w_r"), py::arg("x"));

    m.def(
        "expansion_terms_arrays",
        [](const MarketModel& model, const PenaltySpec& spec, int steps) {
            ExpansionTerms t = expansion_terms(model, spec, TimeGrid(steps, spec.T));
            py::dict d;
            d["t"] = t.grid.nodes();
            d["K0"] = t.K0;
            d["K1"] = t.K1;
            d["Lambda1"] = t.Lambda1;
            d["C1_origin"] = t.C1_origin;
            d["C1_toT"] = t.C1_toT;
            d["H0"] = t.H0;
            d["H1"] = t.H1;
            d["rho"] = t.rho;
            d["zeta"] = t.zeta;
            return d;
        },
        py::arg("model"), py::arg("spec"), py::arg("steps") = 2520);
    m.def(
        "control_expansion",
        [](const MarketModel& model, const PenaltySpec& spec, int steps,
           double t, double x) {
            ExpansionTerms tm = expansion_terms(model, spec, TimeGrid(steps, spec.T));
            ControlExpansion ce = control_expansion(tm, t, x);
            return py::make_tuple(ce.base, ce.correction);
        },
        py::arg("model"), py::arg("spec"), py::arg("steps"), py::arg("t"),
        py::arg("x"));
    m.def(
        "efficient_frontier_expanded",
        [](const MarketModel& model, const PenaltySpec& spec, int steps) {
            ExpansionTerms tm = expansion_terms(model, spec, TimeGrid(steps, spec.T));
            FrontierExpansion fr = efficient_frontier_expanded(tm);
            return py::make_tuple(fr.var0, fr.var1);
        },
        py::arg("model"), py::arg("spec"), py::arg("steps") = 2520);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("n_paths", &SimConfig::n_paths)
        .def_readwrite("steps_per_year", &SimConfig::steps_per_year)
        .def_readwrite("T", &SimConfig::T)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("antithetic", &SimConfig::antithetic)
        .def_readwrite("x0", &SimConfig::x0);

    py::class_<Strategy, std::shared_ptr<Strategy>>(m, "Strategy")
        .def("allocation", &Strategy::allocation, py::arg("t"), py::arg("x"))
        .def_property_readonly("name", &Strategy::name);

    m.def(
        "classical_strategy",
        [](const MarketModel& model, double mu, double T, double x0)
            -> std::shared_ptr<Strategy> {
            return std::make_shared<ClassicalStrategy>(model, mu, T, x0);
        },
        py::arg("model"), py::arg("mu"), py::arg("T"), py::arg("x0"));
    m.def(
        "reference_strategy",
        [](const Eigen::VectorXd& w_r, double T) -> std::shared_ptr<Strategy> {
            return std::make_shared<ReferenceStrategy>(w_r, T);
        },
        py::arg("w_r"), py::arg("T"));
    m.def(
        "penalized_strategy",
        [](const MarketModel& model, const PenaltySpec& spec, int steps)
            -> std::shared_ptr<Strategy> {
            return std::make_shared<PenalizedStrategy>(
                model, spec, solve_shared(model, spec, steps));
        },
        py::arg("model"), py::arg("spec"), py::arg("steps") = 2520);

    m.def("simulate_wealth", &simulate_wealth, py::arg("model_real"),
          py::arg("strategy"), py::arg("cfg"), py::arg("n_threads") = 0);
    m.def("sharpe", &sharpe, py::arg("returns"));
    m.def(
        "mu_for_target_return",
        [](const MarketModel& model, double target, double T, double x0) {
            return resolve_mu(MuPolicy::target_return(target), model, T, x0);
        },
        py::arg("model"), py::arg("target"), py::arg("T") = 1.0,
        py::arg("x0") = 1.0);

    m.def(
        "misspecification_study",
        [](const MarketModel& model, const std::vector<double>& epsilons,
           int n_scenarios, std::uint64_t seed, const std::string& reference,
           double target_return, double gamma_over_mu,
           const std::string& noise_target, int n_threads) {
            MisspecConfig cfg;
            cfg.epsilon_grid = epsilons;
            cfg.n_scenarios = n_scenarios;
            cfg.noise_seed = seed;
            cfg.noise_target = noise_target == "covariance"
                                   ? NoiseTarget::Covariance
                                   : NoiseTarget::VolFactor;
            SimConfig sim;
            sim.seed = seed;
            StudyResult res = misspecification_study(
                model, cfg, sim, ref_kind(reference),
                MuPolicy::target_return(target_return),
                GammaPolicy::ratio_of_mu(gamma_over_mu), n_threads);
            return study_to_json(res);
        },
        py::arg("model"), py::arg("epsilons"), py::arg("n_scenarios") = 2000,
        py::arg("seed") = 7, py::arg("reference") = "equal-weights",
        py::arg("target_return") = 0.20, py::arg("gamma_over_mu") = 0.01,
        py::arg("noise_target") = "vol-factor", py::arg("n_threads") = 0);

    m.def(
        "run_backtest_csv",
        [](const std::string& csv_text, const std::string& reference,
           double target_return, const std::vector<double>& gamma_over_mu,
           double x0) {
            std::istringstream in(csv_text);
            PriceSeries series = load_prices(in);
            BacktestConfig cfg;
            cfg.reference = ref_kind(reference);
            cfg.target_return = target_return;
            if (!gamma_over_mu.empty()) cfg.gamma_over_mu = gamma_over_mu;
            cfg.x0 = x0;
            return report_to_csv(run_backtest(series, cfg));
        },
        py::arg("csv_text"), py::arg("reference") = "equal-weights",
        py::arg("target_return") = 0.25,
        py::arg("gamma_over_mu") = std::vector<double>{1.0, 0.01},
        py::arg("x0") = 1.0);
}
