#pragma once

#include <Eigen/Dense>
#include <vector>

#include "temv/grid.hpp"
#include "temv/market.hpp"

namespace temv {

/// Backward solution of the coupled scalar system
///   dK = {(Kb - G w_r)' S^{-1} (Kb - G w_r) - w_r' G w_r} dt,  K_T = mu
///   dL = {(Lb - G w_r)' S^{-1} (Lb - G w_r) - w_r' G w_r} dt,  L_T = 0
/// with S_t = K_t Sigma + G, plus the integrated quantities
///   Y_t = -(1/2) C_{t,T},
///   R_t = -(1/4) int_t^T rho~_s C_{s,T}^2 ds              (dR = Y^2 rho~ dt),
///   C_{s,t} = exp(-int_s^t b' S_u^{-1} (L_u b - G w_r) du),
///   H_t = C_{t,T} int_0^t C_{s,t}^2 b' S_s^{-1} b ds.
/// The mean wealth of the optimally controlled state is x0 C_{0,t} + H_t / 2.
struct RiccatiSolution {
    TimeGrid grid;
    Eigen::VectorXd K;          // 1/wealth
    Eigen::VectorXd Lambda;     // 1/wealth
    Eigen::VectorXd Y;          // dimensionless, Y < 0
    Eigen::VectorXd R;          // wealth, R <= 0, R_T = 0
    Eigen::VectorXd C_origin;   // C_{0, t_k}
    Eigen::VectorXd H;          // H_{t_k}
    Eigen::VectorXd rho_tilde;  // b' S_k^{-1} b
    Eigen::VectorXd g_accum;    // G_k = int_0^{t_k} b' S^{-1} (Lambda b - G w_r) du
    std::vector<Eigen::MatrixXd> S_inv;  // per-node (K_k Sigma + Gamma)^{-1}

    double K_at(double t) const { return lerp(K, grid.locate(t)); }
    double Lambda_at(double t) const { return lerp(Lambda, grid.locate(t)); }
    double Y_at(double t) const { return lerp(Y, grid.locate(t)); }
    double C_origin_at(double t) const { return lerp(C_origin, grid.locate(t)); }
    double H_at(double t) const { return lerp(H, grid.locate(t)); }
    /// Deterministic mean-wealth path of the optimal state, x0 C_{0,t} + H_t/2.
    double mean_wealth_at(double t, double x0) const {
        return x0 * C_origin_at(t) + 0.5 * H_at(t);
    }
};

/// Sensitivities psi = dK/dgamma, phi = dLambda/dgamma for a scalar penalty
/// Gamma = gamma I, from the explicit integral solutions
///   psi_t = int_t^T A_s exp(-int_t^s B_u du) ds,
///   phi_t = int_t^T C_s exp(-int_t^s D_u du) ds.
struct GammaSensitivity {
    TimeGrid grid;
    Eigen::VectorXd psi;
    Eigen::VectorXd phi;
};

RiccatiSolution solve_riccati(const MarketModel& model, const PenaltySpec& spec,
                              const TimeGrid& grid);

/// V0 = Lambda_0 x0^2 + 2 Y_0 x0 + R_0, the optimal objective value.
double value_at_zero(const RiccatiSolution& sol, double x0);

/// C_{s,t} for 0 <= s <= t <= T, multiplicative over adjacent intervals.
double transition_factor(const RiccatiSolution& sol, double s, double t);

GammaSensitivity gamma_sensitivity(const MarketModel& model,
                                   const PenaltySpec& spec,
                                   const RiccatiSolution& sol);

}  // namespace temv
