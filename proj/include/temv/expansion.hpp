#pragma once

#include <Eigen/Dense>

#include "temv/control.hpp"
#include "temv/riccati.hpp"

namespace temv {

/// First-order small-gamma asymptotics for a scalar penalty Gamma = gamma I:
///   K^g = K0 + g K1 + O(g^2),  K0 = mu e^{-rho(T-t)},
///   K1 = ||w_r + Sigma^{-1}b||^2 (1 - e^{-rho(T-t)})/rho,
///   Lambda^g = g ||w_r||^2 (T-t) + O(g^2),
///   C^g_{s,t} = 1 - g C1_{s,t} + O(g^2),  Y^g = -1/2 + (g/2) C1_{t,T},
///   H^g = H0 - g H1 + O(g^2).
/// C1 and H1 are trapezoid quadratures of their defining integrals on the grid.
struct ExpansionTerms {
    TimeGrid grid;
    Eigen::VectorXd K0, K1;
    Eigen::VectorXd Lambda1;
    Eigen::VectorXd C1_origin;  // C1_{0, t_k}
    Eigen::VectorXd C1_toT;     // C1_{t_k, T}
    Eigen::VectorXd H0, H1;
    double rho = 0.0;   // b' Sigma^{-1} b
    double zeta = 0.0;  // x0 + e^{rho T}/(2 mu)

    // problem data carried along so the control/frontier assembly is self-contained
    Eigen::VectorXd w_r;
    Eigen::VectorXd sib;  // Sigma^{-1} b
    Eigen::VectorXd s2b;  // Sigma^{-2} b
    Eigen::VectorXd siw;  // Sigma^{-1} w_r
    double c1 = 0.0;      // b' Sigma^{-1} w_r
    double q = 0.0;       // b' Sigma^{-2} b
    double wnorm2 = 0.0;  // ||w_r||^2
    double mu = 0.0, x0 = 0.0, T = 0.0;

    /// Coefficients of the correction legs
    ///   alpha^g = Sigma^{-1}b a0 + g (Sigma^{-1}w_r a13 - Sigma^{-2}b a12
    ///             - Sigma^{-1}b a11) + O(g^2).
    double alpha11(int k) const;
    double alpha12(int k, double x) const;
    double alpha13(int k, double x) const { return x / K0[k]; }
    double alpha11_at(double t) const;
    double alpha12_at(double t, double x) const;
};

ExpansionTerms expansion_terms(const MarketModel& model, const PenaltySpec& spec,
                               const TimeGrid& grid);

struct ControlExpansion {
    Eigen::VectorXd base;        // classical allocation Sigma^{-1}b (zeta - x)
    Eigen::VectorXd correction;  // multiply by gamma and add to base
};

ControlExpansion control_expansion(const ExpansionTerms& terms, double t, double x);

struct FrontierExpansion {
    double var0;  // e^{-rho T}/(1 - e^{-rho T}) (Xbar0_T - x0)^2
    double var1;  // first-order coefficient of Var(X_T) in gamma
};

FrontierExpansion efficient_frontier_expanded(const ExpansionTerms& terms);

/// Zeroth-order mean path x0 e^{-rho t} + zeta (1 - e^{-rho t}).
Eigen::VectorXd mean_wealth_path_zeroth(const ExpansionTerms& terms);

/// Forward integration of the first-order mean ODE
///   dXbar = rho zeta - g (rho a11 + b'Sigma^{-2}b a12) + (g c1/K0 - rho) Xbar.
Eigen::VectorXd mean_wealth_path_first_order(const ExpansionTerms& terms,
                                             double gamma);

/// Deterministic mean and second moment of wealth under an affine strategy,
/// integrated on the grid against the given (real) market. Exact up to the
/// integrator tolerance because the state dynamics are affine.
struct MomentPaths {
    TimeGrid grid;
    Eigen::VectorXd mean;
    Eigen::VectorXd second_moment;
    double variance_at_T() const {
        const auto n = mean.size() - 1;
        return second_moment[n] - mean[n] * mean[n];
    }
};

MomentPaths wealth_moments(const MarketModel& model_real, const Strategy& strategy,
                           const TimeGrid& grid, double x0);

}  // namespace temv
