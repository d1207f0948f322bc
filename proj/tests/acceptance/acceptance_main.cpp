// Acceptance suite: one pass/fail line per criterion, exit code = #failures.
//
// Runs everything on the built-in four-asset market. Tolerances are fixed
// here; nothing is calibrated at run time. One known-red assertion (5d.1) is
// kept deliberately: with exactly known parameters the unpenalized strategy
// is mean-variance optimal, so the shrunk (zero-reference) portfolio cannot
// significantly beat it at epsilon = 0; the check stays as stated and reports
// its true status.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "temv/backtest.hpp"
#include "temv/expansion.hpp"
#include "temv/montecarlo.hpp"

using namespace temv;

namespace {

int g_failures = 0;

void record(const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] %s — %s\n", pass ? "PASS" : "FAIL", name.c_str(),
                detail.c_str());
    if (!pass) ++g_failures;
}

struct Timer {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    }
};

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

struct Common {
    MarketModel model = study_market();
    double T = 1.0, x0 = 1.0;
    double mu;
    Eigen::VectorXd w_ew = Eigen::VectorXd::Constant(4, 0.25);

    Common() { mu = resolve_mu(MuPolicy::target_return(0.20), model, T, x0); }

    PenaltySpec spec(double gamma, const Eigen::VectorXd& w) const {
        return PenaltySpec::scalar(gamma, w, mu, T, x0);
    }
    std::shared_ptr<const RiccatiSolution> solve(double gamma,
                                                 const Eigen::VectorXd& w,
                                                 int steps = 2520) const {
        return std::make_shared<const RiccatiSolution>(
            solve_riccati(model, spec(gamma, w), TimeGrid(steps, T)));
    }
};

void criterion1(const Common& c) {
    Timer timer;
    auto sol = c.solve(0.0, c.w_ew, 10000);
    const double rho = c.model.rho();
    double k_err = 0.0;
    for (int k = 0; k <= sol->grid.n_steps(); ++k)
        k_err = std::max(k_err, std::abs(sol->K[k] -
                                         c.mu * std::exp(-rho * (c.T - sol->grid.t(k)))));
    const double l_err = sol->Lambda.cwiseAbs().maxCoeff();
    const double y_err = (sol->Y.array() + 0.5).abs().maxCoeff();
    double a_err = 0.0;
    PenaltySpec spec = c.spec(0.0, c.w_ew);
    for (int it = 0; it <= 10; ++it)
        for (double x : {0.5, 1.0, 1.5, 2.0}) {
            const double t = c.T * it / 10.0;
            Eigen::VectorXd pen = control_feedback_x0(c.model, spec, *sol, t, x);
            Eigen::VectorXd cl = control_classical(c.model, c.mu, c.T, c.x0, t, x);
            a_err = std::max(a_err, (pen - cl).cwiseAbs().maxCoeff());
        }
    const double el = timer.seconds();
    record("criterion 1: Gamma=0 closed-form recovery",
           k_err <= 1e-8 && l_err <= 1e-12 && y_err <= 1e-12 && a_err <= 1e-7 &&
               el < 1.0,
           fmt("max|K-K*|=%.2e, max|Lambda|=%.2e, max|Y+1/2|=%.2e, "
               "max|alpha-alpha*|=%.2e, %.2fs",
               k_err, l_err, y_err, a_err, el));
}

void criterion2(const Common& c) {
    Timer timer;
    std::mt19937_64 rng(2026);
    std::uniform_real_distribution<double> ut(0.0, c.T), ux(0.3, 2.5);
    std::vector<std::pair<double, double>> states;
    for (int i = 0; i < 100; ++i) states.emplace_back(ut(rng), ux(rng));
    double prev_sup = std::numeric_limits<double>::infinity();
    bool monotone = true;
    double final_sup = 0.0;
    for (double ratio : {1.0, 1e2, 1e4, 1e6}) {
        PenaltySpec spec = c.spec(ratio * c.mu, c.w_ew);
        auto sol = c.solve(ratio * c.mu, c.w_ew);
        double sup = 0.0;
        for (auto [t, x] : states) {
            Eigen::VectorXd a = control_feedback_x0(c.model, spec, *sol, t, x);
            Eigen::VectorXd target = c.w_ew * x;
            sup = std::max(sup, (a - target).norm() /
                                    std::max(1.0, target.norm()));
        }
        if (sup >= prev_sup) monotone = false;
        prev_sup = sup;
        final_sup = sup;
    }
    const double el = timer.seconds();
    record("criterion 2: gamma->infinity reference limit",
           final_sup <= 1e-3 && monotone && el < 5.0,
           fmt("sup dist at 1e6*mu = %.2e, monotone=%s, %.2fs", final_sup,
               monotone ? "yes" : "no", el));
}

void criterion3(const Common& c) {
    Timer timer;
    TimeGrid grid(2520, c.T);
    ExpansionTerms terms = expansion_terms(c.model, c.spec(0.0, c.w_ew), grid);
    FrontierExpansion fr = efficient_frontier_expanded(terms);
    const double g = 1e-3 * c.mu;

    auto residuals = [&](double gamma) {
        auto sol = c.solve(gamma, c.w_ew);
        double rK = 0.0, rL = 0.0, rA = 0.0;
        for (int k = 0; k <= grid.n_steps(); ++k) {
            rK = std::max(rK, std::abs(sol->K[k] - (terms.K0[k] + gamma * terms.K1[k])));
            rL = std::max(rL, std::abs(sol->Lambda[k] - gamma * terms.Lambda1[k]));
        }
        PenaltySpec spec = c.spec(gamma, c.w_ew);
        for (auto [t, x] : std::vector<std::pair<double, double>>{
                 {0.0, 1.0}, {0.33, 0.7}, {0.5, 1.3}, {0.66, 1.0}, {1.0, 1.5},
                 {0.25, 2.0}}) {
            Eigen::VectorXd exact = control_feedback_x0(c.model, spec, *sol, t, x);
            ControlExpansion ce = control_expansion(terms, t, x);
            rA = std::max(rA, (exact - (ce.base + gamma * ce.correction))
                                  .cwiseAbs()
                                  .maxCoeff());
        }
        PenalizedStrategy strat(c.model, spec, sol);
        const double var = wealth_moments(c.model, strat, grid, c.x0).variance_at_T();
        const double rV = std::abs(var - (fr.var0 + gamma * fr.var1));
        return std::array<double, 4>{rK, rL, rA, rV};
    };
    auto r1 = residuals(g);
    auto r2 = residuals(g / 2);
    bool ok = true;
    std::string detail;
    const char* names[4] = {"K", "Lambda", "alpha", "Var"};
    for (int i = 0; i < 4; ++i) {
        const double ratio = r1[i] / r2[i];
        if (!(ratio >= 3.2 && ratio <= 4.8)) ok = false;
        detail += fmt("%s=%.2f ", names[i], ratio);
    }
    const double el = timer.seconds();
    record("criterion 3: first-order expansion is O(gamma^2)",
           ok && el < 10.0, detail + fmt("(band [3.2,4.8]), %.2fs", el));
}

void criterion4(const Common& c) {
    Timer timer;
    ClassicalStrategy strat(c.model, c.mu, c.T, c.x0);
    SimConfig cfg;
    cfg.n_paths = 100000;
    cfg.T = c.T;
    cfg.seed = 2027;
    cfg.x0 = c.x0;
    Eigen::VectorXd xt = simulate_terminal(c.model, strat, cfg);
    const double mean = xt.mean();
    Eigen::ArrayXd d = xt.array() - mean;
    const double var = d.square().sum() / (xt.size() - 1);
    const double m4 = d.pow(4).mean();
    const double se_mean = std::sqrt(var / xt.size());
    const double se_var = std::sqrt(std::max(0.0, m4 - var * var) / xt.size());

    TimeGrid grid(2520, c.T);
    ExpansionTerms terms = expansion_terms(c.model, c.spec(0.0, c.w_ew), grid);
    FrontierExpansion fr = efficient_frontier_expanded(terms);
    const bool var_ok = std::abs(var - fr.var0) <= 3 * se_var;
    const bool mean_ok = std::abs(mean - 1.20 * c.x0) <= 3 * se_mean;
    const double el = timer.seconds();
    record("criterion 4: classical efficient frontier by Monte Carlo",
           var_ok && mean_ok && el < 30.0,
           fmt("Var=%.5f vs var0=%.5f (3SE=%.5f); E[X_T]=%.5f vs 1.2 "
               "(3SE=%.5f); %.1fs",
               var, fr.var0, 3 * se_var, mean, 3 * se_mean, el));
}

struct StudyPack {
    StudyResult res;
    // per-eps mean paired diff and SE
    std::vector<double> diff, se;
    // per-scenario aggregates over eps subsets
    double small_mean = 0, small_se = 0, large_mean = 0, large_se = 0;
};

StudyPack run_study(const Common& c, ReferenceKind ref) {
    MisspecConfig cfg;
    for (int i = 0; i <= 10; ++i) cfg.epsilon_grid.push_back(0.1 * i);
    cfg.n_scenarios = 2000;
    cfg.noise_seed = 7;
    cfg.noise_target = NoiseTarget::VolFactor;
    SimConfig sim;
    sim.T = c.T;
    sim.seed = 7;
    StudyPack pack{misspecification_study(c.model, cfg, sim, ref,
                                          MuPolicy::target_return(0.20),
                                          GammaPolicy::ratio_of_mu(0.01), 0),
                   {}, {}};
    const auto& res = pack.res;
    const int ne = static_cast<int>(res.epsilons.size());
    const int ns = res.n_scenarios;
    for (int ie = 0; ie < ne; ++ie) {
        pack.diff.push_back(res.penalized_minus_classical[ie].mean_diff);
        pack.se.push_back(res.penalized_minus_classical[ie].se_diff);
    }
    auto aggregate = [&](double lo, double hi, double& mean, double& se) {
        std::vector<double> per_scenario(ns, 0.0);
        int count = 0;
        for (int ie = 0; ie < ne; ++ie) {
            if (res.epsilons[ie] < lo - 1e-12 || res.epsilons[ie] > hi + 1e-12)
                continue;
            ++count;
            for (int s = 0; s < ns; ++s)
                per_scenario[s] += res.scenario_sharpe[1](ie, s) -
                                   res.scenario_sharpe[0](ie, s);
        }
        double sum = 0.0, sum2 = 0.0;
        for (int s = 0; s < ns; ++s) {
            const double v = per_scenario[s] / count;
            sum += v;
            sum2 += v * v;
        }
        mean = sum / ns;
        se = std::sqrt(((sum2 - sum * sum / ns) / (ns - 1)) / ns);
    };
    aggregate(0.0, 0.1, pack.small_mean, pack.small_se);
    aggregate(0.5, 1.0, pack.large_mean, pack.large_se);
    return pack;
}

bool sign_change_in_window(const StudyPack& p, double lo, double hi) {
    const auto& eps = p.res.epsilons;
    for (std::size_t i = 0; i + 1 < eps.size(); ++i) {
        if (eps[i] < lo - 1e-12 || eps[i + 1] > hi + 1e-12) continue;
        if (p.diff[i] <= 0.0 && p.diff[i + 1] >= 0.0) return true;
    }
    return false;
}

void criterion5(const Common& c) {
    Timer timer;
    StudyPack ew = run_study(c, ReferenceKind::EqualWeights);
    StudyPack mv = run_study(c, ReferenceKind::MinimumVariance);
    StudyPack erc = run_study(c, ReferenceKind::ERC);
    StudyPack zero = run_study(c, ReferenceKind::Zero);

    // 5a: reference-portfolio anchors at eps = 0
    const double a_ew = ew.res.stats[2][0].mean_sharpe;
    const double a_mv = mv.res.stats[2][0].mean_sharpe;
    const double a_erc = erc.res.stats[2][0].mean_sharpe;
    record("criterion 5a: reference Sharpe anchors at eps=0",
           std::abs(a_ew - 0.047) <= 0.005 && std::abs(a_mv - 0.057) <= 0.005 &&
               std::abs(a_erc - 0.051) <= 0.005,
           fmt("EW=%.4f (0.047), MV=%.4f (0.057), ERC=%.4f (0.051), all +-0.005",
               a_ew, a_mv, a_erc));

    // 5b: equal-weights and ERC cross from negative to positive in [0.1,0.5]
    const std::vector<std::pair<const char*, const StudyPack*>> crossing_cases{
        {"equal-weights", &ew}, {"erc", &erc}};
    for (auto& [name, pp] : crossing_cases) {
        const StudyPack& p = *pp;
        double max_large = -1e9;
        for (std::size_t ie = 0; ie < p.res.epsilons.size(); ++ie)
            if (p.res.epsilons[ie] >= 0.3 - 1e-12)
                max_large = std::max(max_large, p.diff[ie]);
        const bool small_neg = p.small_mean < -3 * p.small_se;
        const bool crossing = sign_change_in_window(p, 0.1, 0.5);
        record(fmt("criterion 5b: pen-vs-classical sign change (%s)", name),
               small_neg && crossing && max_large > 0.0,
               fmt("small-eps diff=%.5f (3SE=%.5f), crossing in [0.1,0.5]=%s, "
                   "max diff at eps>=0.3 = %+.5f",
                   p.small_mean, 3 * p.small_se, crossing ? "yes" : "no",
                   max_large));
    }

    // 5c: min-var reference keeps classical on top across the grid
    bool never_sig_pos = true;
    for (std::size_t ie = 0; ie < mv.res.epsilons.size(); ++ie)
        if (mv.diff[ie] > 3 * mv.se[ie]) never_sig_pos = false;
    record("criterion 5c: classical stays above penalized (min-var)",
           never_sig_pos && mv.large_mean < -3 * mv.large_se,
           fmt("no significantly positive diff=%s, large-eps diff=%.5f "
               "(3SE=%.5f)",
               never_sig_pos ? "yes" : "no", mv.large_mean, 3 * mv.large_se));

    // 5d: zero reference
    bool no_sig_loss = true;
    double worst = 0.0, worst_band = 0.0;
    for (std::size_t ie = 0; ie < zero.res.epsilons.size(); ++ie)
        if (zero.diff[ie] < -3 * zero.se[ie]) {
            no_sig_loss = false;
            worst = zero.diff[ie];
            worst_band = 3 * zero.se[ie];
        }
    record("criterion 5d.1: penalized beats classical at every eps (zero ref)",
           no_sig_loss,
           no_sig_loss
               ? "no significant loss at any eps"
               : fmt("significant loss at small eps: diff=%.5f < -3SE=%.5f "
                     "(expected: the unpenalized control is optimal under "
                     "exact parameters)",
                     worst, -worst_band));
    record("criterion 5d.2: penalized beats classical for large eps (zero ref)",
           zero.large_mean > 3 * zero.large_se,
           fmt("large-eps diff=%.5f (3SE=%.5f)", zero.large_mean,
               3 * zero.large_se));

    const double el = timer.seconds();
    record("criterion 5 runtime", el < 600.0, fmt("%.1fs (< 600s)", el));
}

void criterion6(const Common& c) {
    Timer timer;
    const double gamma = c.mu / 100;
    PenaltySpec spec = c.spec(gamma, c.w_ew);
    auto sol = c.solve(gamma, c.w_ew);

    SimConfig flat_cfg;
    flat_cfg.n_paths = 100000;
    flat_cfg.T = c.T;
    flat_cfg.seed = 2028;
    flat_cfg.x0 = c.x0;
    WeakOptReport flat_rep =
        verify_weak_optimality(c.model, spec, *sol, flat_cfg, {}, 10, 0);
    const WeakOptCurve& opt = flat_rep.curves[0];
    double worst_dev = 0.0;
    for (std::size_t i = 0; i < opt.ev.size(); ++i)
        worst_dev = std::max(worst_dev,
                             std::abs(opt.ev[i] - flat_rep.v0_formula) -
                                 3 * opt.se[i]);
    const bool flat_ok = opt.flat_within_3se && worst_dev <= 0.0 &&
                         std::abs(opt.ev0 - flat_rep.v0_formula) <= 1e-12;

    SimConfig inc_cfg = flat_cfg;
    inc_cfg.n_paths = 400000;
    inc_cfg.seed = 2029;
    std::vector<std::shared_ptr<const Strategy>> perturbations{
        std::make_shared<ClassicalStrategy>(c.model, c.mu, c.T, c.x0)};
    WeakOptReport inc_rep =
        verify_weak_optimality(c.model, spec, *sol, inc_cfg, perturbations, 10, 0);
    const WeakOptCurve& cl = inc_rep.curves[1];
    const bool inc_ok = cl.nondecreasing_within_3se && cl.increase_significant;
    const bool identity_ok = opt.terminal_identity_gap <= 1e-9 &&
                             cl.terminal_identity_gap <= 1e-9;
    const double el = timer.seconds();
    record("criterion 6: weak martingale optimality",
           flat_ok && inc_ok && identity_ok && el < 60.0,
           fmt("optimal flat=%s (V0=%.5f), classical rise=%.5f (3SE=%.5f), "
               "identity gaps %.1e/%.1e, %.1fs",
               flat_ok ? "yes" : "no", flat_rep.v0_formula, cl.total_increase,
               3 * cl.se_total, opt.terminal_identity_gap,
               cl.terminal_identity_gap, el));
}

void criterion7(const Common& c) {
    Timer timer;
    const double gamma = c.mu / 100;
    TimeGrid grid(2520, c.T);
    PenaltySpec spec = c.spec(gamma, c.w_ew);
    RiccatiSolution sol = solve_riccati(c.model, spec, grid);
    GammaSensitivity sens = gamma_sensitivity(c.model, spec, sol);
    const double h = 1e-5 * gamma;
    RiccatiSolution up = solve_riccati(c.model, c.spec(gamma + h, c.w_ew), grid);
    RiccatiSolution dn = solve_riccati(c.model, c.spec(gamma - h, c.w_ew), grid);
    Eigen::VectorXd fdK = (up.K - dn.K) / (2 * h);
    Eigen::VectorXd fdL = (up.Lambda - dn.Lambda) / (2 * h);
    const double rel_psi =
        (sens.psi - fdK).cwiseAbs().maxCoeff() / fdK.cwiseAbs().maxCoeff();
    const double rel_phi =
        (sens.phi - fdL).cwiseAbs().maxCoeff() / fdL.cwiseAbs().maxCoeff();

    PenaltySpec big = c.spec(1e6 * c.mu, c.w_ew);
    RiccatiSolution bsol = solve_riccati(c.model, big, grid);
    GammaSensitivity bsens = gamma_sensitivity(c.model, big, bsol);
    const double sup_psi = bsens.psi.cwiseAbs().maxCoeff();
    const double sup_phi = bsens.phi.cwiseAbs().maxCoeff();
    const double el = timer.seconds();
    record("criterion 7: gamma-sensitivity integral solutions",
           rel_psi <= 1e-4 && rel_phi <= 1e-4 && sup_psi <= 1e-3 &&
               sup_phi <= 1e-3 && el < 5.0,
           fmt("psi FD rel=%.2e, phi FD rel=%.2e, large-gamma sup=%.1e/%.1e, "
               "%.2fs",
               rel_psi, rel_phi, sup_psi, sup_phi, el));
}

std::string gbm_csv(const Common& c, std::uint64_t seed, int n_days) {
    const int d = c.model.n_assets();
    Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(c.model.Sigma()).matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    const double dt = 1.0 / 252;
    Eigen::VectorXd logp = Eigen::VectorXd::Constant(d, std::log(100.0));
    std::string csv = "date,A,B,C,D\n";
    char buf[96];
    for (int k = 0; k <= n_days; ++k) {
        // synthetic calendar: 12 months of 28 days per year, always valid ISO
        const int r = k % 336;
        std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", 2000 + k / 336,
                      1 + r / 28, 1 + r % 28);
        csv += buf;
        for (int j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), ",%.12f", std::exp(logp[j]));
            csv += buf;
        }
        csv += "\n";
        Eigen::VectorXd z(d);
        for (int j = 0; j < d; ++j) z[j] = normal(rng);
        logp += (c.model.b() - 0.5 * c.model.Sigma().diagonal()) * dt +
                (L * z) * std::sqrt(dt);
    }
    return csv;
}

void criterion8(const Common& c) {
    Timer timer;
    int wins = 0;
    const int runs = 200;
    std::string first_csv;
    for (int i = 0; i < runs; ++i) {
        std::istringstream in(gbm_csv(c, 10000 + i, 1008));
        PriceSeries series = load_prices(in);
        BacktestConfig cfg;
        cfg.reference = ReferenceKind::Zero;
        cfg.target_return = 0.25;
        cfg.riccati_steps_per_day = 4;
        BacktestReport rep = run_backtest(series, cfg);
        // tracks: classical, reference, penalized g1, penalized g0.01
        const auto& cl = rep.tracks[0];
        const auto& pen = rep.tracks[2];
        if (pen.sharpe && cl.sharpe && *pen.sharpe >= *cl.sharpe) ++wins;
        if (i == 0) first_csv = report_to_csv(rep);
    }
    record("criterion 8a: penalized gamma=mu beats classical on synthetic data",
           wins >= 120, fmt("wins %d / %d (need >= 120)", wins, runs));

    // round-trip determinism of the report CSV
    ParsedReport parsed = parse_report_csv(first_csv);
    double worst = 0.0;
    bool ok = true;
    for (std::size_t j = 0; j < parsed.columns.size(); ++j) {
        Eigen::VectorXd w = parsed.wealth.col(j);
        Eigen::VectorXd r(w.size() - 1);
        for (Eigen::Index k = 0; k + 1 < w.size(); ++k)
            r[k] = (w[k + 1] - w[k]) / w[k];
        const double m = r.mean();
        const double sd =
            std::sqrt((r.array() - m).square().sum() / (r.size() - 1));
        if (!parsed.sharpes[j]) {
            ok = (sd == 0.0);
            continue;
        }
        worst = std::max(worst, std::abs(m / sd - *parsed.sharpes[j]));
    }
    record("criterion 8b: report CSV round trip",
           ok && worst <= 1e-12,
           fmt("max recomputed-sharpe gap = %.2e; historical Sharpe values are "
               "data-dependent and deliberately not asserted",
               worst));
    record("criterion 8 runtime", timer.seconds() < 300.0,
           fmt("%.1fs", timer.seconds()));
}

void criterion9(const Common& c) {
    Timer timer;
    // ERC gap and closed-form agreement
    Eigen::VectorXd werc = reference_weights(ReferenceKind::ERC, c.model, 1e-10);
    Eigen::VectorXd rc = werc.cwiseProduct(c.model.Sigma() * werc);
    const double gap = rc.maxCoeff() - rc.minCoeff();

    Eigen::VectorXd v(4);
    v << 0.15, 0.25, 0.35, 0.5;
    Eigen::MatrixXd C = Eigen::MatrixXd::Constant(4, 4, 0.3);
    C.diagonal().setOnes();
    Eigen::MatrixXd Sg = covariance_from_vols_corr(v, C);
    MarketModel eq(Eigen::VectorXd::Constant(4, 0.1),
                   Eigen::MatrixXd(Eigen::LLT<Eigen::MatrixXd>(Sg).matrixL()));
    Eigen::VectorXd we = reference_weights(ReferenceKind::ERC, eq, 1e-10);
    Eigen::VectorXd inv = v.cwiseInverse();
    const double closed_gap = (we - inv / inv.sum()).cwiseAbs().maxCoeff();

    // cocycle property
    const double gamma = c.mu / 100;
    auto sol = c.solve(gamma, c.w_ew);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> u(0.0, c.T);
    double cocycle = 0.0;
    for (int i = 0; i < 200; ++i) {
        double a[3] = {u(rng), u(rng), u(rng)};
        std::sort(a, a + 3);
        cocycle = std::max(cocycle,
                           std::abs(transition_factor(*sol, a[0], a[1]) *
                                        transition_factor(*sol, a[1], a[2]) -
                                    transition_factor(*sol, a[0], a[2])));
    }

    // affinity of the control in (x, x_bar)
    PenaltySpec spec = c.spec(gamma, c.w_ew);
    double affine = 0.0;
    std::uniform_real_distribution<double> ux(0.1, 2.5);
    for (int i = 0; i < 100; ++i) {
        const double t = u(rng);
        const double x1 = ux(rng), xb1 = ux(rng), x3 = ux(rng), xb3 = ux(rng);
        Eigen::VectorXd a1 = control_mkv(c.model, spec, *sol, {t, x1, xb1});
        Eigen::VectorXd a3 = control_mkv(c.model, spec, *sol, {t, x3, xb3});
        Eigen::VectorXd am = control_mkv(
            c.model, spec, *sol, {t, 0.5 * (x1 + x3), 0.5 * (xb1 + xb3)});
        affine = std::max(affine, (0.5 * (a1 + a3) - am).cwiseAbs().maxCoeff());
    }

    // bitwise seed determinism of study aggregates (and thread invariance)
    MisspecConfig mcfg;
    mcfg.epsilon_grid = {0.0, 0.3, 0.8};
    mcfg.n_scenarios = 200;
    mcfg.noise_seed = 2030;
    SimConfig sim;
    sim.T = c.T;
    sim.seed = 2030;
    auto run = [&](int threads) {
        return study_to_json(misspecification_study(
            c.model, mcfg, sim, ReferenceKind::EqualWeights,
            MuPolicy::target_return(0.20), GammaPolicy::ratio_of_mu(0.01),
            threads));
    };
    const std::string j1 = run(1), j2 = run(4), j3 = run(1);
    const bool deterministic = (j1 == j2) && (j1 == j3);

    record("criterion 9: property suites",
           gap <= 1e-10 && closed_gap <= 1e-9 && cocycle <= 1e-10 &&
               affine <= 1e-10 && deterministic,
           fmt("ERC gap=%.1e, closed-form gap=%.1e, cocycle=%.1e, "
               "affinity=%.1e, deterministic=%s, %.1fs",
               gap, closed_gap, cocycle, affine,
               deterministic ? "yes" : "no", timer.seconds()));
}

}  // namespace

int main() {
    Common c;
    std::printf("acceptance suite: four-asset study market, mu=%.6f\n", c.mu);
    criterion1(c);
    criterion2(c);
    criterion3(c);
    criterion4(c);
    criterion5(c);
    criterion6(c);
    criterion7(c);
    criterion8(c);
    criterion9(c);
    std::printf("%d criterion check(s) failed\n", g_failures);
    return g_failures > 125 ? 125 : g_failures;
}
