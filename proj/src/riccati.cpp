#include "temv/riccati.hpp"

#include <cmath>

namespace temv {

namespace {

constexpr double kPositivityFloor = 1e-14;

struct RhsContext {
    const Eigen::VectorXd& b;
    const Eigen::MatrixXd& Sigma;
    const Eigen::MatrixXd& Gamma;
    const Eigen::VectorXd& gw;  // Gamma w_r
    double wgw;                 // w_r' Gamma w_r
};

// Right-hand side of the (K, Lambda) system. S depends on K only; the Lambda
// equation shares it.
void rhs(const RhsContext& c, double K, double L, double& fK, double& fL) {
    const auto d = c.b.size();
    if (!(K > kPositivityFloor))
        throw NonPositiveK("K = " + std::to_string(K) +
                           " at positivity floor; refine the grid or check inputs");
    Eigen::MatrixXd S = K * c.Sigma + c.Gamma;
    Eigen::LLT<Eigen::MatrixXd> llt(S);
    if (llt.info() != Eigen::Success)
        throw SingularS("S_t = K Sigma + Gamma not positive definite");
    Eigen::VectorXd vK = K * c.b - c.gw;
    Eigen::VectorXd vL = L * c.b - c.gw;
    fK = vK.dot(llt.solve(vK)) - c.wgw;
    fL = vL.dot(llt.solve(vL)) - c.wgw;
    (void)d;
}

}  // namespace

RiccatiSolution solve_riccati(const MarketModel& model, const PenaltySpec& spec,
                              const TimeGrid& grid) {
    const int d = model.n_assets();
    spec.validate(d);
    if (std::abs(grid.horizon() - spec.T) > 1e-12 * std::max(1.0, spec.T))
        throw InvalidSpec("grid horizon differs from spec.T");

    const int n = grid.n_steps();
    const double h = grid.dt();
    Eigen::VectorXd gw = spec.gamma_matrix * spec.w_r;
    RhsContext ctx{model.b(), model.Sigma(), spec.gamma_matrix, gw,
                   spec.w_r.dot(gw)};

    RiccatiSolution sol{grid,
                        Eigen::VectorXd(n + 1), Eigen::VectorXd(n + 1),
                        Eigen::VectorXd(n + 1), Eigen::VectorXd(n + 1),
                        Eigen::VectorXd(n + 1), Eigen::VectorXd(n + 1),
                        Eigen::VectorXd(n + 1), Eigen::VectorXd(n + 1),
                        {}};
    sol.K[n] = spec.mu;
    sol.Lambda[n] = 0.0;

    // Classical RK4, marching backward from the terminal condition.
    double f1K, f1L, f2K, f2L, f3K, f3L, f4K, f4L;
    for (int k = n; k > 0; --k) {
        const double K = sol.K[k], L = sol.Lambda[k];
        rhs(ctx, K, L, f1K, f1L);
        rhs(ctx, K - 0.5 * h * f1K, L - 0.5 * h * f1L, f2K, f2L);
        rhs(ctx, K - 0.5 * h * f2K, L - 0.5 * h * f2L, f3K, f3L);
        rhs(ctx, K - h * f3K, L - h * f3L, f4K, f4L);
        sol.K[k - 1] = K - h / 6.0 * (f1K + 2.0 * f2K + 2.0 * f3K + f4K);
        sol.Lambda[k - 1] = L - h / 6.0 * (f1L + 2.0 * f2L + 2.0 * f3L + f4L);
        if (!(sol.K[k - 1] > kPositivityFloor))
            throw NonPositiveK("K crossed the positivity floor at node " +
                               std::to_string(k - 1));
    }

    sol.S_inv.resize(n + 1);
    Eigen::VectorXd g(n + 1);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(d, d);
    for (int k = 0; k <= n; ++k) {
        Eigen::MatrixXd S = sol.K[k] * model.Sigma() + spec.gamma_matrix;
        Eigen::LLT<Eigen::MatrixXd> llt(S);
        if (llt.info() != Eigen::Success)
            throw SingularS("S_t inversion failed at node " + std::to_string(k));
        sol.S_inv[k] = llt.solve(I);
        sol.rho_tilde[k] = model.b().dot(sol.S_inv[k] * model.b());
        g[k] = model.b().dot(sol.S_inv[k] * (sol.Lambda[k] * model.b() - gw));
    }

    // Antiderivative of the Y/C integrand; every C_{s,t} is a difference of it.
    sol.g_accum = cumtrapz(g, h);
    const double GT = sol.g_accum[n];
    for (int k = 0; k <= n; ++k) {
        sol.C_origin[k] = std::exp(-sol.g_accum[k]);
        sol.Y[k] = -0.5 * std::exp(-(GT - sol.g_accum[k]));  // -(1/2) C_{t,T}
    }

    // R' = Y^2 rho~, R_T = 0.
    Eigen::VectorXd q = sol.Y.array().square() * sol.rho_tilde.array();
    Eigen::VectorXd Q = cumtrapz(q, h);
    for (int k = 0; k <= n; ++k) sol.R[k] = -(Q[n] - Q[k]);

    // H_t = C_{t,T} e^{-2 G_t} int_0^t e^{2 G_s} rho~_s ds.
    Eigen::VectorXd w = (2.0 * sol.g_accum.array()).exp() * sol.rho_tilde.array();
    Eigen::VectorXd W = cumtrapz(w, h);
    for (int k = 0; k <= n; ++k) {
        const double CtT = std::exp(-(GT - sol.g_accum[k]));
        sol.H[k] = CtT * std::exp(-2.0 * sol.g_accum[k]) * W[k];
    }
    return sol;
}

double value_at_zero(const RiccatiSolution& sol, double x0) {
    return sol.Lambda[0] * x0 * x0 + 2.0 * sol.Y[0] * x0 + sol.R[0];
}

double transition_factor(const RiccatiSolution& sol, double s, double t) {
    const double T = sol.grid.horizon();
    const double slack = 1e-9 * T;
    if (s < -slack || t > T + slack || s > t + slack)
        throw OutOfRange("need 0 <= s <= t <= T");
    const double Gs = lerp(sol.g_accum, sol.grid.locate(s));
    const double Gt = lerp(sol.g_accum, sol.grid.locate(t));
    return std::exp(-(Gt - Gs));
}

GammaSensitivity gamma_sensitivity(const MarketModel& model,
                                   const PenaltySpec& spec,
                                   const RiccatiSolution& sol) {
    auto gamma = spec.scalar_gamma();
    if (!gamma)
        throw InvalidSpec("gamma_sensitivity requires a scalar penalty Gamma = gamma I");
    const int n = sol.grid.n_steps();
    const double h = sol.grid.dt();
    const Eigen::VectorXd& b = model.b();
    const Eigen::MatrixXd& Sg = model.Sigma();
    const Eigen::VectorXd& wr = spec.w_r;

    Eigen::VectorXd A(n + 1), B(n + 1), C(n + 1), D(n + 1);
    std::vector<Eigen::VectorXd> u2s(n + 1);
    for (int k = 0; k <= n; ++k) {
        Eigen::VectorXd u1 = sol.S_inv[k] * (sol.K[k] * b - *gamma * wr);
        Eigen::VectorXd u2 = sol.S_inv[k] * (sol.Lambda[k] * b - *gamma * wr);
        A[k] = (wr + u1).squaredNorm();
        B[k] = 2.0 * b.dot(u1) - u1.dot(Sg * u1);
        D[k] = 2.0 * b.dot(u2);
        u2s[k] = std::move(u2);
    }

    // psi_t = e^{beta_t} int_t^T A_s e^{-beta_s} ds with beta' = B.
    auto backward_integral = [&](const Eigen::VectorXd& coeff,
                                 const Eigen::VectorXd& integrand) {
        Eigen::VectorXd acc = cumtrapz(coeff, h);
        Eigen::VectorXd f(n + 1);
        for (int k = 0; k <= n; ++k) f[k] = integrand[k] * std::exp(-acc[k]);
        Eigen::VectorXd F = cumtrapz(f, h);
        Eigen::VectorXd out(n + 1);
        for (int k = 0; k <= n; ++k)
            out[k] = std::exp(acc[k]) * (F[n] - F[k]);
        return out;
    };

    GammaSensitivity sens{sol.grid, backward_integral(B, A), Eigen::VectorXd()};
    for (int k = 0; k <= n; ++k)
        C[k] = (wr + u2s[k]).squaredNorm() +
               sens.psi[k] * u2s[k].dot(Sg * u2s[k]);
    sens.phi = backward_integral(D, C);
    return sens;
}

}  // namespace temv
