#pragma once

#include <Eigen/Dense>

#include "temv/errors.hpp"

namespace temv {

/// Uniform grid t_k = k*T/n_steps on [0, T]. All Riccati quantities, the
/// expansion terms and the deterministic moment paths live on one shared grid
/// so that quadratures compose without re-interpolation.
class TimeGrid {
public:
    TimeGrid(int n_steps, double horizon) : n_(n_steps), T_(horizon) {
        if (n_steps < 2) throw InvalidSpec("time grid needs n_steps >= 2");
        if (!(horizon > 0.0)) throw InvalidSpec("horizon T must be positive");
    }

    int n_steps() const { return n_; }
    int n_nodes() const { return n_ + 1; }
    double horizon() const { return T_; }
    double dt() const { return T_ / n_; }
    double t(int k) const { return T_ * k / n_; }

    Eigen::VectorXd nodes() const {
        Eigen::VectorXd ts(n_ + 1);
        for (int k = 0; k <= n_; ++k) ts[k] = t(k);
        return ts;
    }

    /// Locate t for linear interpolation: node index k and weight w such that
    /// f(t) ~ (1-w) f_k + w f_{k+1}. Throws OutOfHorizon outside [0, T] (up to
    /// a dt-scaled rounding slack).
    struct Locator {
        int k;
        double w;
    };
    Locator locate(double t_query) const {
        const double slack = 1e-9 * T_;
        if (t_query < -slack || t_query > T_ + slack)
            throw OutOfHorizon("t = " + std::to_string(t_query) +
                               " outside [0, " + std::to_string(T_) + "]");
        double u = t_query / dt();
        int k = static_cast<int>(u);
        if (k >= n_) return {n_ - 1, 1.0};
        if (k < 0) return {0, 0.0};
        return {k, u - k};
    }

private:
    int n_;
    double T_;
};

/// Cumulative trapezoid of node values f_k: out[k] = int_0^{t_k} f dt.
inline Eigen::VectorXd cumtrapz(const Eigen::VectorXd& f, double dt) {
    Eigen::VectorXd out(f.size());
    out[0] = 0.0;
    for (int k = 1; k < f.size(); ++k)
        out[k] = out[k - 1] + 0.5 * dt * (f[k - 1] + f[k]);
    return out;
}

inline double lerp(const Eigen::VectorXd& f, const TimeGrid::Locator& loc) {
    return (1.0 - loc.w) * f[loc.k] + loc.w * f[loc.k + 1];
}

}  // namespace temv
