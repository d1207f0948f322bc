#include "temv/expansion.hpp"

#include <cmath>

namespace temv {

namespace {

// (1 - e^{-rho tau}) / rho, safe as rho -> 0.
double em_ratio(double rho, double tau) {
    if (std::abs(rho * tau) < 1e-12) return tau;
    return -std::expm1(-rho * tau) / rho;
}

}  // namespace

double ExpansionTerms::alpha11(int k) const {
    const double t = grid.t(k);
    return wnorm2 * (T - t) * (x0 + 0.5 * H0[k]) / K0[k] + x0 * C1_origin[k] +
           0.5 * H1[k] + 0.5 * K1[k] / (K0[k] * K0[k]) +
           0.5 * C1_toT[k] / K0[k];
}

double ExpansionTerms::alpha12(int k, double x) const {
    return (x0 - x) / K0[k] + 0.5 * H0[k] / K0[k] + 0.5 / (K0[k] * K0[k]);
}

double ExpansionTerms::alpha11_at(double t) const {
    auto loc = grid.locate(t);
    return (1.0 - loc.w) * alpha11(loc.k) + loc.w * alpha11(loc.k + 1);
}

double ExpansionTerms::alpha12_at(double t, double x) const {
    auto loc = grid.locate(t);
    return (1.0 - loc.w) * alpha12(loc.k, x) + loc.w * alpha12(loc.k + 1, x);
}

ExpansionTerms expansion_terms(const MarketModel& model, const PenaltySpec& spec,
                               const TimeGrid& grid) {
    spec.validate(model.n_assets());
    if (!spec.scalar_gamma())
        throw InvalidSpec("expansion requires a scalar penalty Gamma = gamma I");
    const int n = grid.n_steps();
    const double h = grid.dt();
    const double T = grid.horizon();

    ExpansionTerms tm{grid, {}, {}, {}, {}, {}, {}, {}, 0.0, 0.0,
                      {}, {}, {}, {}, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    for (Eigen::VectorXd* v : {&tm.K0, &tm.K1, &tm.Lambda1, &tm.C1_origin,
                               &tm.C1_toT, &tm.H0, &tm.H1})
        v->resize(n + 1);
    tm.w_r = spec.w_r;
    tm.sib = model.sigma_solve(model.b());
    tm.s2b = model.sigma_solve(tm.sib);
    tm.siw = model.sigma_solve(spec.w_r);
    tm.rho = model.rho();
    tm.c1 = model.b().dot(tm.siw);
    tm.q = model.b().dot(tm.s2b);
    tm.wnorm2 = spec.w_r.squaredNorm();
    tm.mu = spec.mu;
    tm.x0 = spec.x0;
    tm.T = T;
    tm.zeta = spec.x0 + std::exp(tm.rho * T) / (2.0 * spec.mu);

    const double knorm2 = (spec.w_r + tm.sib).squaredNorm();
    for (int k = 0; k <= n; ++k) {
        const double tau = T - grid.t(k);
        tm.K0[k] = spec.mu * std::exp(-tm.rho * tau);
        tm.K1[k] = knorm2 * em_ratio(tm.rho, tau);
        tm.Lambda1[k] = tm.wnorm2 * tau;
        tm.H0[k] = std::exp(tm.rho * T) / spec.mu * (-std::expm1(-tm.rho * grid.t(k)));
    }

    // C1_{s,t} = (1/mu) int_s^t e^{rho(T-u)} (rho ||w_r||^2 (T-u) - c1) du;
    // accumulate the antiderivative so both C1_{0,t} and C1_{t,T} fall out.
    Eigen::VectorXd cint(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double tau = T - grid.t(k);
        cint[k] = std::exp(tm.rho * tau) * (tm.rho * tm.wnorm2 * tau - tm.c1) / spec.mu;
    }
    Eigen::VectorXd P = cumtrapz(cint, h);
    tm.C1_origin = P;
    tm.C1_toT = Eigen::VectorXd::Constant(n + 1, P[n]) - P;

    // H1_k = (P_k + P_n) H0_k - 2 int_0^{t_k} P rho/K0 ds
    //        + int_0^{t_k} (rho K1 + q)/K0^2 ds,
    // folding C1_{s,t_k} = P_k - P_s into running integrals.
    Eigen::VectorXd vint(n + 1), uint_(n + 1);
    for (int k = 0; k <= n; ++k) {
        vint[k] = P[k] * tm.rho / tm.K0[k];
        uint_[k] = (tm.rho * tm.K1[k] + tm.q) / (tm.K0[k] * tm.K0[k]);
    }
    Eigen::VectorXd V = cumtrapz(vint, h);
    Eigen::VectorXd U = cumtrapz(uint_, h);
    for (int k = 0; k <= n; ++k)
        tm.H1[k] = (P[k] + P[n]) * tm.H0[k] - 2.0 * V[k] + U[k];
    return tm;
}

ControlExpansion control_expansion(const ExpansionTerms& terms, double t, double x) {
    auto loc = terms.grid.locate(t);
    auto blend = [&](auto&& f) { return (1.0 - loc.w) * f(loc.k) + loc.w * f(loc.k + 1); };
    const double a13 = blend([&](int k) { return terms.alpha13(k, x); });
    const double a12 = blend([&](int k) { return terms.alpha12(k, x); });
    const double a11 = blend([&](int k) { return terms.alpha11(k); });
    ControlExpansion out;
    out.base = terms.sib * (terms.zeta - x);
    out.correction = terms.siw * a13 - terms.s2b * a12 - terms.sib * a11;
    return out;
}

FrontierExpansion efficient_frontier_expanded(const ExpansionTerms& terms) {
    const double rho = terms.rho, T = terms.T, mu = terms.mu, x0 = terms.x0;
    const double u = std::exp(-rho * T);
    const double dz = terms.zeta - x0;
    FrontierExpansion out;
    out.var0 = u * (1.0 - u) * dz * dz;

    // var1 = (c1/mu^2) J - (1/mu) int_0^T (rho a11 + q a12(s, Xbar0_s)) e^{-rho(T-s)} ds,
    // J = zeta T - e^{rho T}/(2 mu) (1 - e^{-rho T})/rho.
    const double J = terms.zeta * T -
                     std::exp(rho * T) / (2.0 * mu) * em_ratio(rho, T);
    const int n = terms.grid.n_steps();
    Eigen::VectorXd integrand(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = terms.grid.t(k);
        const double xbar0 = x0 * std::exp(-rho * t) +
                             terms.zeta * (1.0 - std::exp(-rho * t));
        integrand[k] = (rho * terms.alpha11(k) + terms.q * terms.alpha12(k, xbar0)) *
                       std::exp(-rho * (T - t));
    }
    const double I = cumtrapz(integrand, terms.grid.dt())[n];
    out.var1 = terms.c1 / (mu * mu) * J - I / mu;
    return out;
}

Eigen::VectorXd mean_wealth_path_zeroth(const ExpansionTerms& terms) {
    const int n = terms.grid.n_steps();
    Eigen::VectorXd out(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double t = terms.grid.t(k);
        out[k] = terms.x0 * std::exp(-terms.rho * t) +
                 terms.zeta * (1.0 - std::exp(-terms.rho * t));
    }
    return out;
}

Eigen::VectorXd mean_wealth_path_first_order(const ExpansionTerms& terms,
                                             double gamma) {
    const int n = terms.grid.n_steps();
    const double h = terms.grid.dt();
    Eigen::VectorXd xbar(n + 1);
    xbar[0] = terms.x0;
    auto f = [&](int k, double xb) {
        return terms.rho * (terms.zeta - xb) +
               gamma * (terms.c1 * xb / terms.K0[k] -
                        terms.q * terms.alpha12(k, xb) -
                        terms.rho * terms.alpha11(k));
    };
    for (int k = 0; k < n; ++k) {  // Heun
        const double f1 = f(k, xbar[k]);
        const double pred = xbar[k] + h * f1;
        const double f2 = f(k + 1, pred);
        xbar[k + 1] = xbar[k] + 0.5 * h * (f1 + f2);
    }
    return xbar;
}

MomentPaths wealth_moments(const MarketModel& model_real, const Strategy& strategy,
                           const TimeGrid& grid, double x0) {
    const int n = grid.n_steps();
    const double h = grid.dt();
    Eigen::VectorXd ab(n + 1), cb(n + 1), aSa(n + 1), aSc(n + 1), cSc(n + 1);
    Eigen::VectorXd a, c;
    for (int k = 0; k <= n; ++k) {
        strategy.affine_at(grid.t(k), a, c);
        ab[k] = a.dot(model_real.b());
        cb[k] = c.dot(model_real.b());
        Eigen::VectorXd Sa = model_real.Sigma() * a;
        Eigen::VectorXd Sc = model_real.Sigma() * c;
        aSa[k] = a.dot(Sa);
        aSc[k] = a.dot(Sc);
        cSc[k] = c.dot(Sc);
    }
    MomentPaths mp{grid, Eigen::VectorXd(n + 1), Eigen::VectorXd(n + 1)};
    mp.mean[0] = x0;
    mp.second_moment[0] = x0 * x0;
    auto f = [&](int k, double xb, double m, double& dx, double& dm) {
        dx = ab[k] + cb[k] * xb;
        dm = aSa[k] + (2.0 * ab[k] + 2.0 * aSc[k]) * xb + (2.0 * cb[k] + cSc[k]) * m;
    };
    for (int k = 0; k < n; ++k) {
        double d1x, d1m, d2x, d2m;
        f(k, mp.mean[k], mp.second_moment[k], d1x, d1m);
        f(k + 1, mp.mean[k] + h * d1x, mp.second_moment[k] + h * d1m, d2x, d2m);
        mp.mean[k + 1] = mp.mean[k] + 0.5 * h * (d1x + d2x);
        mp.second_moment[k + 1] = mp.second_moment[k] + 0.5 * h * (d1m + d2m);
    }
    return mp;
}

}  // namespace temv
