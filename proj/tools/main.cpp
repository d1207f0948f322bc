// temv - mean-variance portfolio allocation with tracking-error penalization.
//
// Subcommands: solve, frontier, simulate, study, backtest, verify.
// Exit codes: 0 success, 1 validation error, 2 numerical fault.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "temv/backtest.hpp"
#include "temv/expansion.hpp"
#include "temv/montecarlo.hpp"

using nlohmann::json;

namespace {

struct CommonOpts {
    std::string model_file;
    std::string config_file;
    std::string reference = "equal-weights";
    std::optional<double> mu;
    std::optional<double> gamma;
    std::optional<double> gamma_over_mu;
    double target_return = 0.20;
    double T = 1.0;
    double x0 = 1.0;
    int steps = 2520;
    long long paths = 100000;
    int scenarios = 2000;
    std::string epsilons = "0:1:0.1";
    unsigned long long seed = 7;
    std::string out;
    std::string out_csv;
    bool json_errors = false;
    int threads = 0;
    std::string noise_target = "vol-factor";
    std::string mu_policy = "target-return";
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--model", o.model_file, "model JSON file (b + sigma, or b + vols + corr)");
    cmd->add_option("--config", o.config_file, "JSON config file (flags override it)");
    cmd->add_option("--reference", o.reference,
                    "reference portfolio: equal-weights|min-var|erc|zero");
    cmd->add_option("--mu", o.mu, "risk aversion (overrides --target-return)");
    cmd->add_option("--gamma", o.gamma, "penalty gamma (absolute)");
    cmd->add_option("--gamma-over-mu", o.gamma_over_mu, "penalty as a multiple of mu");
    cmd->add_option("--target-return", o.target_return, "annual target return for the mu policy");
    cmd->add_option("--mu-policy", o.mu_policy, "target-return|paper-literal");
    cmd->add_option("--T", o.T, "horizon in years");
    cmd->add_option("--x0", o.x0, "initial wealth");
    cmd->add_option("--steps", o.steps, "Riccati grid steps");
    cmd->add_option("--paths", o.paths, "Monte Carlo paths");
    cmd->add_option("--scenarios", o.scenarios, "misspecification scenarios");
    cmd->add_option("--epsilons", o.epsilons, "noise grid A:B:STEP");
    cmd->add_option("--seed", o.seed, "RNG seed");
    cmd->add_option("--out", o.out, "output file (default stdout)");
    cmd->add_option("--csv", o.out_csv, "also write flat CSV here (study)");
    cmd->add_option("--threads", o.threads,
                    "worker threads (0 = TE_MEANVAR_THREADS or hardware)");
    cmd->add_option("--noise-target", o.noise_target, "vol-factor|covariance");
    cmd->add_flag("--json-errors", o.json_errors, "machine-readable errors on stderr");
}

// flags > config file > defaults: apply file values only where the flag was
// not given on the command line.
void apply_config_file(const CLI::App& cmd, CommonOpts& o) {
    if (o.config_file.empty()) return;
    std::ifstream in(o.config_file);
    if (!in) throw temv::ParseError("cannot open config '" + o.config_file + "'");
    json j = json::parse(in, nullptr, true, true);
    auto unset = [&](const std::string& flag) {
        auto* opt = cmd.get_option(flag);
        return opt != nullptr && opt->count() == 0;
    };
    if (j.contains("model") && unset("--model")) o.model_file = j["model"];
    if (j.contains("reference") && unset("--reference")) o.reference = j["reference"];
    if (j.contains("mu") && unset("--mu")) o.mu = j["mu"].get<double>();
    if (j.contains("gamma") && unset("--gamma")) o.gamma = j["gamma"].get<double>();
    if (j.contains("gamma_over_mu") && unset("--gamma-over-mu"))
        o.gamma_over_mu = j["gamma_over_mu"].get<double>();
    if (j.contains("target_return") && unset("--target-return"))
        o.target_return = j["target_return"];
    if (j.contains("mu_policy") && unset("--mu-policy")) o.mu_policy = j["mu_policy"];
    if (j.contains("T") && unset("--T")) o.T = j["T"];
    if (j.contains("x0") && unset("--x0")) o.x0 = j["x0"];
    if (j.contains("steps") && unset("--steps")) o.steps = j["steps"];
    if (j.contains("paths") && unset("--paths")) o.paths = j["paths"].get<long long>();
    if (j.contains("scenarios") && unset("--scenarios")) o.scenarios = j["scenarios"];
    if (j.contains("epsilons") && unset("--epsilons")) o.epsilons = j["epsilons"];
    if (j.contains("seed") && unset("--seed")) o.seed = j["seed"].get<unsigned long long>();
    if (j.contains("threads") && unset("--threads")) o.threads = j["threads"];
    if (j.contains("noise_target") && unset("--noise-target"))
        o.noise_target = j["noise_target"];
}

temv::MarketModel load_model(const CommonOpts& o) {
    if (o.model_file.empty()) return temv::study_market();
    std::ifstream in(o.model_file);
    if (!in) throw temv::ParseError("cannot open model file '" + o.model_file + "'");
    json j = json::parse(in, nullptr, true, true);
    if (!j.contains("b")) throw temv::ParseError("model file needs a 'b' array");
    Eigen::VectorXd b(j["b"].size());
    for (std::size_t i = 0; i < j["b"].size(); ++i) b[i] = j["b"][i];
    const auto d = b.size();
    Eigen::MatrixXd sigma(d, d);
    if (j.contains("sigma")) {
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index k = 0; k < d; ++k) sigma(i, k) = j["sigma"][i][k];
        return temv::build_market(b, sigma);
    }
    if (j.contains("vols") && j.contains("corr")) {
        Eigen::VectorXd v(d);
        for (Eigen::Index i = 0; i < d; ++i) v[i] = j["vols"][i];
        Eigen::MatrixXd C(d, d);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index k = 0; k < d; ++k) C(i, k) = j["corr"][i][k];
        Eigen::MatrixXd Sigma = temv::covariance_from_vols_corr(v, C);
        Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
        if (llt.info() != Eigen::Success)
            throw temv::DegenerateCovariance("vols/corr covariance not PD");
        return temv::build_market(b, Eigen::MatrixXd(llt.matrixL()));
    }
    throw temv::ParseError("model file needs 'sigma' or 'vols'+'corr'");
}

std::vector<double> parse_epsilons(const std::string& s) {
    double a = 0, b = 0, step = 0;
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &a, &b, &step) != 3 || step <= 0)
        throw temv::ParseError("--epsilons expects A:B:STEP with STEP > 0");
    std::vector<double> out;
    const int n = static_cast<int>(std::llround((b - a) / step));
    for (int i = 0; i <= n; ++i) out.push_back(a + i * step);
    return out;
}

double resolve_mu_opts(const CommonOpts& o, const temv::MarketModel& model) {
    if (o.mu) return *o.mu;
    temv::MuPolicy pol = o.mu_policy == "paper-literal"
                             ? temv::MuPolicy::paper_literal(o.target_return)
                             : temv::MuPolicy::target_return(o.target_return);
    return temv::resolve_mu(pol, model, o.T, o.x0);
}

double resolve_gamma_opts(const CommonOpts& o, double mu) {
    if (o.gamma) return *o.gamma;
    if (o.gamma_over_mu) return *o.gamma_over_mu * mu;
    return mu / 100.0;
}

json config_echo(const CommonOpts& o, double mu, double gamma) {
    return json{{"model", o.model_file.empty() ? "builtin-4asset" : o.model_file},
                {"reference", o.reference},
                {"mu", mu},
                {"gamma", gamma},
                {"mu_policy", o.mu_policy},
                {"target_return", o.target_return},
                {"T", o.T},
                {"x0", o.x0},
                {"steps", o.steps},
                {"paths", o.paths},
                {"scenarios", o.scenarios},
                {"epsilons", o.epsilons},
                {"seed", o.seed},
                {"threads", o.threads},
                {"noise_target", o.noise_target}};
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw temv::ParseError("cannot open output '" + path + "'");
    out << text;
}

int cmd_solve(const CommonOpts& o) {
    temv::MarketModel model = load_model(o);
    const double mu = resolve_mu_opts(o, model);
    const double gamma = resolve_gamma_opts(o, mu);
    Eigen::VectorXd w_r = temv::reference_weights(
        temv::reference_kind_from_string(o.reference), model);
    temv::PenaltySpec spec = temv::PenaltySpec::scalar(gamma, w_r, mu, o.T, o.x0);
    temv::TimeGrid grid(o.steps, o.T);
    temv::RiccatiSolution sol = temv::solve_riccati(model, spec, grid);

    std::string text = "# config " + config_echo(o, mu, gamma).dump() + "\n";
    text += "t,K,Lambda,Y,R,C0t,H\n";
    char buf[256];
    for (int k = 0; k <= grid.n_steps(); ++k) {
        std::snprintf(buf, sizeof(buf),
                      "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", grid.t(k),
                      sol.K[k], sol.Lambda[k], sol.Y[k], sol.R[k],
                      sol.C_origin[k], sol.H[k]);
        text += buf;
    }
    std::snprintf(buf, sizeof(buf), "# V0 = %.17g\n",
                  temv::value_at_zero(sol, o.x0));
    text += buf;
    write_text(o.out, text);
    return 0;
}

int cmd_frontier(const CommonOpts& o) {
    temv::MarketModel model = load_model(o);
    const double mu = resolve_mu_opts(o, model);
    Eigen::VectorXd w_r = temv::reference_weights(
        temv::reference_kind_from_string(o.reference), model);
    temv::TimeGrid grid(o.steps, o.T);
    temv::PenaltySpec spec0 =
        temv::PenaltySpec::scalar(0.0, w_r, mu, o.T, o.x0);
    temv::ExpansionTerms terms = temv::expansion_terms(model, spec0, grid);
    temv::FrontierExpansion fr = temv::efficient_frontier_expanded(terms);

    json j;
    j["config"] = config_echo(o, mu, 0.0);
    j["var0"] = fr.var0;
    j["var1"] = fr.var1;
    Eigen::VectorXd xbar0 = temv::mean_wealth_path_zeroth(terms);
    j["mean0_T"] = xbar0[grid.n_steps()];
    json sweep = json::array();
    std::vector<double> ratios = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    if (o.gamma_over_mu) ratios = {*o.gamma_over_mu};
    for (double r : ratios) {
        const double gamma = r * mu;
        temv::PenaltySpec spec = temv::PenaltySpec::scalar(gamma, w_r, mu, o.T, o.x0);
        auto sol = std::make_shared<const temv::RiccatiSolution>(
            temv::solve_riccati(model, spec, grid));
        temv::PenalizedStrategy strat(model, spec, sol);
        temv::MomentPaths mp = temv::wealth_moments(model, strat, grid, o.x0);
        sweep.push_back({{"gamma", gamma},
                         {"gamma_over_mu", r},
                         {"var_expanded", fr.var0 + gamma * fr.var1},
                         {"var_exact", mp.variance_at_T()},
                         {"mean_exact", mp.mean[grid.n_steps()]}});
    }
    j["sweep"] = sweep;
    write_text(o.out, j.dump(2) + "\n");
    return 0;
}

int cmd_simulate(const CommonOpts& o, const std::string& strategy_name) {
    temv::MarketModel model = load_model(o);
    const double mu = resolve_mu_opts(o, model);
    const double gamma = resolve_gamma_opts(o, mu);
    Eigen::VectorXd w_r = temv::reference_weights(
        temv::reference_kind_from_string(o.reference), model);

    std::shared_ptr<temv::Strategy> strat;
    if (strategy_name == "classical") {
        strat = std::make_shared<temv::ClassicalStrategy>(model, mu, o.T, o.x0);
    } else if (strategy_name == "reference") {
        strat = std::make_shared<temv::ReferenceStrategy>(w_r, o.T);
    } else {
        temv::PenaltySpec spec = temv::PenaltySpec::scalar(gamma, w_r, mu, o.T, o.x0);
        temv::TimeGrid grid(o.steps, o.T);
        auto sol = std::make_shared<const temv::RiccatiSolution>(
            temv::solve_riccati(model, spec, grid));
        strat = std::make_shared<temv::PenalizedStrategy>(model, spec, sol);
    }

    temv::SimConfig cfg;
    cfg.n_paths = o.paths;
    cfg.T = o.T;
    cfg.seed = o.seed;
    cfg.x0 = o.x0;
    Eigen::MatrixXd paths = temv::simulate_wealth(model, *strat, cfg, o.threads);
    Eigen::VectorXd xt = paths.col(paths.cols() - 1);
    const double mean_xt = xt.mean();
    const double var_xt =
        (xt.array() - mean_xt).square().sum() / (xt.size() - 1);
    double sharpe_sum = 0.0;
    int sharpe_n = 0;
    for (Eigen::Index p = 0; p < paths.rows(); ++p) {
        try {
            sharpe_sum += temv::sharpe(temv::path_returns(paths.row(p).transpose()));
            ++sharpe_n;
        } catch (const temv::ZeroVolatility&) {
        }
    }
    json j;
    j["config"] = config_echo(o, mu, gamma);
    j["strategy"] = strategy_name;
    j["mean_XT"] = mean_xt;
    j["var_XT"] = var_xt;
    j["se_mean_XT"] = std::sqrt(var_xt / xt.size());
    j["mean_sharpe"] = sharpe_n > 0 ? json(sharpe_sum / sharpe_n) : json(nullptr);
    j["n_paths"] = static_cast<long long>(paths.rows());
    write_text(o.out, j.dump(2) + "\n");
    return 0;
}

int cmd_study(const CommonOpts& o) {
    temv::MarketModel model = load_model(o);
    temv::MisspecConfig cfg;
    cfg.epsilon_grid = parse_epsilons(o.epsilons);
    cfg.n_scenarios = o.scenarios;
    cfg.noise_seed = o.seed;
    cfg.noise_target = o.noise_target == "covariance"
                           ? temv::NoiseTarget::Covariance
                           : temv::NoiseTarget::VolFactor;
    temv::SimConfig sim;
    sim.T = o.T;
    sim.seed = o.seed;
    temv::MuPolicy mu_pol = o.mu ? temv::MuPolicy::fixed(*o.mu)
                           : o.mu_policy == "paper-literal"
                               ? temv::MuPolicy::paper_literal(o.target_return)
                               : temv::MuPolicy::target_return(o.target_return);
    temv::GammaPolicy g_pol = o.gamma ? temv::GammaPolicy::fixed(*o.gamma)
                              : temv::GammaPolicy::ratio_of_mu(
                                    o.gamma_over_mu.value_or(0.01));
    temv::StudyResult res = temv::misspecification_study(
        model, cfg, sim, temv::reference_kind_from_string(o.reference), mu_pol,
        g_pol, o.threads);
    write_text(o.out, temv::study_to_json(res) + "\n");
    if (!o.out_csv.empty()) write_text(o.out_csv, temv::study_to_csv(res));
    return 0;
}

int cmd_backtest(const CommonOpts& o, const std::string& prices_file) {
    temv::PriceSeries series = temv::load_prices_file(prices_file);
    temv::BacktestConfig cfg;
    cfg.reference = temv::reference_kind_from_string(o.reference);
    cfg.target_return = o.target_return;
    cfg.x0 = o.x0;
    if (o.gamma_over_mu) cfg.gamma_over_mu = {*o.gamma_over_mu};
    temv::BacktestReport report = temv::run_backtest(series, cfg);
    std::string text = "# config " + config_echo(o, report.mu, 0.0).dump() + "\n";
    text += temv::report_to_csv(report);
    write_text(o.out, text);
    return 0;
}

int cmd_verify(const CommonOpts& o) {
    temv::MarketModel model = load_model(o);
    const double mu = resolve_mu_opts(o, model);
    const double gamma = resolve_gamma_opts(o, mu);
    Eigen::VectorXd w_r = temv::reference_weights(
        temv::reference_kind_from_string(o.reference), model);
    temv::PenaltySpec spec = temv::PenaltySpec::scalar(gamma, w_r, mu, o.T, o.x0);
    temv::TimeGrid grid(o.steps, o.T);
    temv::RiccatiSolution sol = temv::solve_riccati(model, spec, grid);

    temv::SimConfig sim;
    sim.n_paths = o.paths;
    sim.T = o.T;
    sim.seed = o.seed;
    sim.x0 = o.x0;
    std::vector<std::shared_ptr<const temv::Strategy>> perturbations{
        std::make_shared<temv::ClassicalStrategy>(model, mu, o.T, o.x0)};
    temv::WeakOptReport report =
        temv::verify_weak_optimality(model, spec, sol, sim, perturbations, 10,
                                     o.threads);
    std::printf("V0 (Lambda0 x0^2 + 2 Y0 x0 + R0) = %.10g\n", report.v0_formula);
    std::printf("%-12s %-10s %-10s %-12s %-8s\n", "strategy", "flat<=3SE",
                "nondecr", "rise>3SE", "rise");
    bool ok = true;
    for (const auto& c : report.curves) {
        const bool is_opt = c.name == "optimal";
        std::printf("%-12s %-10s %-10s %-12s %+.5f\n", c.name.c_str(),
                    c.flat_within_3se ? "yes" : "no",
                    c.nondecreasing_within_3se ? "yes" : "no",
                    c.increase_significant ? "yes" : "no", c.total_increase);
        if (is_opt && !c.flat_within_3se) ok = false;
        if (!is_opt && !(c.nondecreasing_within_3se && c.increase_significant))
            ok = false;
    }
    if (!o.out.empty()) {
        json j;
        j["config"] = config_echo(o, mu, gamma);
        j["v0"] = report.v0_formula;
        for (const auto& c : report.curves)
            j["curves"].push_back({{"name", c.name},
                                   {"t", c.t},
                                   {"ev", c.ev},
                                   {"se", c.se},
                                   {"flat_within_3se", c.flat_within_3se},
                                   {"nondecreasing", c.nondecreasing_within_3se},
                                   {"total_increase", c.total_increase},
                                   {"se_total", c.se_total}});
        write_text(o.out, j.dump(2) + "\n");
    }
    std::printf("%s\n", ok ? "verify: PASS" : "verify: FAIL");
    return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mean-variance allocation with tracking-error penalization"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string simulate_strategy = "penalized";
    std::string prices_file;

    CLI::App* solve = app.add_subcommand("solve", "solve the Riccati system; CSV grid of K,Lambda,Y,R,C0t,H");
    CLI::App* frontier = app.add_subcommand("frontier", "efficient-frontier expansion and gamma sweep");
    CLI::App* simulate = app.add_subcommand("simulate", "Monte Carlo wealth statistics for one strategy");
    CLI::App* study = app.add_subcommand("study", "misspecification study (JSON + optional CSV)");
    CLI::App* backtest = app.add_subcommand("backtest", "daily-rebalanced backtest on a price CSV");
    CLI::App* verify = app.add_subcommand("verify", "weak martingale optimality check");
    for (CLI::App* cmd : {solve, frontier, simulate, study, backtest, verify})
        add_common(cmd, o);
    simulate->add_option("--strategy", simulate_strategy,
                         "classical|penalized|reference");
    backtest->add_option("--prices", prices_file, "price CSV file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        apply_config_file(*cmd, o);
        if (cmd == solve) return cmd_solve(o);
        if (cmd == frontier) return cmd_frontier(o);
        if (cmd == simulate) return cmd_simulate(o, simulate_strategy);
        if (cmd == study) return cmd_study(o);
        if (cmd == backtest) return cmd_backtest(o, prices_file);
        if (cmd == verify) return cmd_verify(o);
        return 1;
    } catch (const temv::Error& e) {
        const int rc = temv::exit_code(e);
        if (o.json_errors) {
            json j{{"error", {{"type", e.type()}, {"message", e.what()}, {"exit", rc}}}};
            std::cerr << j.dump() << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return rc;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
