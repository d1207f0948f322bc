#include <doctest.h>

#include <cmath>
#include <random>

#include "temv/riccati.hpp"

using namespace temv;

namespace {

PenaltySpec ew_spec(const MarketModel& m, double gamma, double mu, double T = 1.0,
                    double x0 = 1.0) {
    return PenaltySpec::scalar(
        gamma, Eigen::VectorXd::Constant(m.n_assets(), 1.0 / m.n_assets()), mu, T,
        x0);
}

}  // namespace

TEST_CASE("Gamma=0 closed forms on the study model") {
    MarketModel m = study_market();
    const double mu = 2.0, T = 1.0;
    PenaltySpec spec = ew_spec(m, 0.0, mu);
    TimeGrid grid(10000, T);
    RiccatiSolution sol = solve_riccati(m, spec, grid);
    const double rho = m.rho();
    double k_err = 0.0, r_err = 0.0;
    for (int k = 0; k <= grid.n_steps(); ++k) {
        const double t = grid.t(k);
        k_err = std::max(k_err, std::abs(sol.K[k] - mu * std::exp(-rho * (T - t))));
        // remark form: R_t = (1/4mu)(1 - e^{rho (T-t)})
        r_err = std::max(r_err, std::abs(sol.R[k] -
                                         (1.0 - std::exp(rho * (T - t))) / (4 * mu)));
    }
    CHECK(k_err <= 1e-8);
    CHECK(sol.Lambda.cwiseAbs().maxCoeff() == 0.0);
    CHECK((sol.Y.array() + 0.5).abs().maxCoeff() == 0.0);
    CHECK(r_err <= 1e-8);
}

TEST_CASE("one-asset closed form value") {
    Eigen::VectorXd b(1);
    b << 0.1;
    Eigen::MatrixXd s(1, 1);
    s << 0.2;
    MarketModel m = build_market(b, s);
    PenaltySpec spec = PenaltySpec::scalar(0.0, Eigen::VectorXd::Zero(1), 1.0, 1.0, 1.0);
    RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(4000, 1.0));
    // rho = 0.01/0.04 = 0.25, K_0 = e^{-0.25}
    CHECK(sol.K[0] == doctest::Approx(std::exp(-0.25)).epsilon(1e-10));
}

TEST_CASE("terminal conditions hold exactly") {
    MarketModel m = study_market();
    PenaltySpec spec = ew_spec(m, 0.03, 1.7);
    RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(600, 1.0));
    const int n = sol.grid.n_steps();
    CHECK(sol.K[n] == 1.7);
    CHECK(sol.Lambda[n] == 0.0);
    CHECK(sol.Y[n] == -0.5);
    CHECK(sol.R[n] == 0.0);
    CHECK(sol.C_origin[0] == 1.0);
    CHECK(sol.H[0] == 0.0);
}

TEST_CASE("positivity and sign invariants on the grid") {
    MarketModel m = study_market();
    for (double gamma_over_mu : {0.0, 0.01, 1.0, 100.0}) {
        const double mu = 2.9;
        PenaltySpec spec = ew_spec(m, gamma_over_mu * mu, mu);
        RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(1000, 1.0));
        CHECK(sol.K.minCoeff() > 0.0);
        CHECK(sol.Lambda.minCoeff() >= -1e-14);
        CHECK(sol.Y.maxCoeff() < 0.0);
        CHECK(sol.R.maxCoeff() <= 1e-15);
        // Woodbury step: w_r' G w_r - w_r' G S^{-1} G w_r >= 0
        Eigen::VectorXd gw = spec.gamma_matrix * spec.w_r;
        for (int k = 0; k <= sol.grid.n_steps(); ++k) {
            const double lhs = spec.w_r.dot(gw) - gw.dot(sol.S_inv[k] * gw);
            CHECK(lhs >= -1e-12);
        }
    }
}

TEST_CASE("ODE residual matches RHS to second order") {
    MarketModel m = study_market();
    const double mu = 2.9;
    PenaltySpec spec = ew_spec(m, mu / 100, mu);
    TimeGrid grid(2520, 1.0);
    RiccatiSolution sol = solve_riccati(m, spec, grid);
    const double h = grid.dt();
    Eigen::VectorXd gw = spec.gamma_matrix * spec.w_r;
    const double wgw = spec.w_r.dot(gw);
    for (int k = 1; k < grid.n_steps(); k += 7) {
        const double dK = (sol.K[k + 1] - sol.K[k - 1]) / (2 * h);
        const double dL = (sol.Lambda[k + 1] - sol.Lambda[k - 1]) / (2 * h);
        Eigen::VectorXd vK = sol.K[k] * m.b() - gw;
        Eigen::VectorXd vL = sol.Lambda[k] * m.b() - gw;
        const double fK = vK.dot(sol.S_inv[k] * vK) - wgw;
        const double fL = vL.dot(sol.S_inv[k] * vL) - wgw;
        CHECK(std::abs(dK - fK) <= 50 * h * h * std::max(std::abs(fK), 1e-6));
        CHECK(std::abs(dL - fL) <= 50 * h * h * std::max(std::abs(fL), 1e-6));
    }
}

TEST_CASE("grid refinement: fourth-order convergence of K") {
    MarketModel m = study_market();
    const double mu = 2.9;
    PenaltySpec spec = ew_spec(m, mu / 10, mu);
    RiccatiSolution ref = solve_riccati(m, spec, TimeGrid(2000, 1.0));
    RiccatiSolution coarse = solve_riccati(m, spec, TimeGrid(100, 1.0));
    RiccatiSolution fine = solve_riccati(m, spec, TimeGrid(200, 1.0));
    auto max_err = [&](const RiccatiSolution& s, int stride) {
        double e = 0.0;
        for (int k = 0; k <= s.grid.n_steps(); ++k)
            e = std::max(e, std::abs(s.K[k] - ref.K[k * stride]));
        return e;
    };
    const double e_coarse = max_err(coarse, 20);
    const double e_fine = max_err(fine, 10);
    CHECK(e_coarse / e_fine >= 8.0);
}

TEST_CASE("K/gamma decreases toward zero as gamma grows") {
    MarketModel m = study_market();
    double prev = std::numeric_limits<double>::infinity();
    for (double gamma : {10.0, 100.0, 1000.0, 10000.0}) {
        PenaltySpec spec = ew_spec(m, gamma, 1.0);
        RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(800, 1.0));
        const double sup = sol.K.maxCoeff() / gamma;
        CHECK(sup > 0.0);
        CHECK(sup < prev);
        prev = sup;
    }
}

TEST_CASE("value_at_zero") {
    MarketModel m = study_market();
    const double T = 1.0, x0 = 1.3;
    SUBCASE("Gamma = 0 reduces to the classical optimum") {
        for (double mu : {0.5, 2.0, 50.0}) {
            PenaltySpec spec = ew_spec(m, 0.0, mu, T, x0);
            RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(4000, T));
            const double v0 = value_at_zero(sol, x0);
            CHECK(v0 == doctest::Approx(-x0 + sol.R[0]).epsilon(1e-13));
            const double closed = -x0 - (std::exp(m.rho() * T) - 1.0) / (4 * mu);
            CHECK(v0 == doctest::Approx(closed).epsilon(1e-7));
        }
    }
    SUBCASE("mu -> infinity tends to -x0") {
        PenaltySpec spec = ew_spec(m, 0.0, 1e9, T, x0);
        RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(2000, T));
        CHECK(value_at_zero(sol, x0) == doctest::Approx(-x0).epsilon(1e-8));
    }
}

TEST_CASE("transition factor: identity, Gamma=0, cocycle") {
    MarketModel m = study_market();
    const double mu = 2.9;
    SUBCASE("Gamma = 0 gives C == 1") {
        PenaltySpec spec = ew_spec(m, 0.0, mu);
        RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(500, 1.0));
        for (double s : {0.0, 0.3, 0.9})
            for (double t : {0.91, 1.0})
                CHECK(transition_factor(sol, s, t) == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("C_{t,t} = 1 and cocycle composition") {
        PenaltySpec spec = ew_spec(m, mu / 50, mu);
        RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(2520, 1.0));
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int i = 0; i < 200; ++i) {
            double a = u(rng), b = u(rng), c = u(rng);
            if (a > b) std::swap(a, b);
            if (b > c) std::swap(b, c);
            if (a > b) std::swap(a, b);
            CHECK(transition_factor(sol, a, a) == 1.0);
            const double lhs =
                transition_factor(sol, a, b) * transition_factor(sol, b, c);
            CHECK(std::abs(lhs - transition_factor(sol, a, c)) <= 1e-10);
        }
        CHECK_THROWS_AS(transition_factor(sol, 0.5, 0.2), OutOfRange);
        CHECK_THROWS_AS(transition_factor(sol, -0.1, 0.2), OutOfRange);
    }
}

TEST_CASE("gamma sensitivities match finite differences") {
    MarketModel m = study_market();
    const double mu = 2.9, gamma = mu / 100;
    PenaltySpec spec = ew_spec(m, gamma, mu);
    TimeGrid grid(2520, 1.0);
    RiccatiSolution sol = solve_riccati(m, spec, grid);
    GammaSensitivity sens = gamma_sensitivity(m, spec, sol);
    const int n = grid.n_steps();
    CHECK(sens.psi[n] == 0.0);
    CHECK(sens.phi[n] == 0.0);
    CHECK(sens.psi.minCoeff() >= 0.0);

    const double h = 1e-5 * gamma;
    RiccatiSolution up = solve_riccati(m, ew_spec(m, gamma + h, mu), grid);
    RiccatiSolution dn = solve_riccati(m, ew_spec(m, gamma - h, mu), grid);
    Eigen::VectorXd fdK = (up.K - dn.K) / (2 * h);
    Eigen::VectorXd fdL = (up.Lambda - dn.Lambda) / (2 * h);
    CHECK((sens.psi - fdK).cwiseAbs().maxCoeff() / fdK.cwiseAbs().maxCoeff() <= 1e-4);
    CHECK((sens.phi - fdL).cwiseAbs().maxCoeff() / fdL.cwiseAbs().maxCoeff() <= 1e-4);

    PenaltySpec big = ew_spec(m, 1e6 * mu, mu);
    RiccatiSolution bsol = solve_riccati(m, big, grid);
    GammaSensitivity bs = gamma_sensitivity(m, big, bsol);
    CHECK(bs.psi.cwiseAbs().maxCoeff() <= 1e-3);
    CHECK(bs.phi.cwiseAbs().maxCoeff() <= 1e-3);
}

TEST_CASE("guards") {
    MarketModel m = study_market();
    // mu below the positivity floor trips the K > 0 guard immediately
    PenaltySpec tiny = ew_spec(m, 0.0, 1e-15);
    CHECK_THROWS_AS(solve_riccati(m, tiny, TimeGrid(10, 1.0)), NonPositiveK);
    // non-scalar penalty rejected by the sensitivity op
    PenaltySpec spec = ew_spec(m, 0.5, 1.0);
    RiccatiSolution sol = solve_riccati(m, spec, TimeGrid(50, 1.0));
    PenaltySpec nonscalar = spec;
    nonscalar.gamma_matrix(0, 1) = nonscalar.gamma_matrix(1, 0) = 0.01;
    CHECK_THROWS_AS(gamma_sensitivity(m, nonscalar, sol), InvalidSpec);
}
