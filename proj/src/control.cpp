#include "temv/control.hpp"

#include <cmath>

namespace temv {

namespace {

// S(t)^{-1} applied to a vector at interpolated K(t); recomputed on the fly so
// off-node evaluations stay consistent with S = K Sigma + Gamma.
struct SAtT {
    Eigen::LLT<Eigen::MatrixXd> llt;
    SAtT(const MarketModel& model, const PenaltySpec& spec, double K) {
        Eigen::MatrixXd S = K * model.Sigma() + spec.gamma_matrix;
        llt.compute(S);
        if (llt.info() != Eigen::Success)
            throw SingularS("S(t) not positive definite");
    }
    Eigen::VectorXd solve(const Eigen::VectorXd& v) const { return llt.solve(v); }
};

void check_horizon(double t, double T) {
    if (t < -1e-9 * T || t > T * (1.0 + 1e-9))
        throw OutOfHorizon("t = " + std::to_string(t) + " outside [0, " +
                           std::to_string(T) + "]");
}

}  // namespace

Eigen::VectorXd control_mkv(const MarketModel& model, const PenaltySpec& spec,
                            const RiccatiSolution& sol, const ControlState& state) {
    check_horizon(state.t, spec.T);
    const double K = sol.K_at(state.t);
    const double L = sol.Lambda_at(state.t);
    const double Y = sol.Y_at(state.t);
    SAtT S(model, spec, K);
    Eigen::VectorXd s_gw = S.solve(spec.gamma_matrix * spec.w_r);
    Eigen::VectorXd s_b = S.solve(model.b());
    return s_gw * state.x -
           s_b * (K * state.x + Y - (K - L) * state.x_bar);
}

Eigen::VectorXd control_feedback_x0(const MarketModel& model,
                                    const PenaltySpec& spec,
                                    const RiccatiSolution& sol, double t,
                                    double x) {
    check_horizon(t, spec.T);
    const double K = sol.K_at(t);
    const double L = sol.Lambda_at(t);
    const double Y = sol.Y_at(t);
    const double xbar = sol.mean_wealth_at(t, spec.x0);
    SAtT S(model, spec, K);
    Eigen::VectorXd s_gw = S.solve(spec.gamma_matrix * spec.w_r);
    Eigen::VectorXd s_b = S.solve(model.b());
    return s_gw * x - L * s_b * xbar + s_b * (K * (xbar - x) - Y);
}

Eigen::VectorXd control_classical(const MarketModel& model, double mu, double T,
                                  double x0, double t, double x) {
    (void)t;  // the classical control is time-homogeneous given x
    const double target = std::exp(model.rho() * T) / (2.0 * mu) + x0;
    return model.sigma_solve(model.b()) * (target - x);
}

Eigen::VectorXd control_reference(const Eigen::VectorXd& w_r, double x) {
    return w_r * x;
}

PenalizedStrategy::PenalizedStrategy(MarketModel model, PenaltySpec spec,
                                     std::shared_ptr<const RiccatiSolution> sol,
                                     std::string name)
    : model_(std::move(model)), spec_(std::move(spec)), sol_(std::move(sol)),
      name_(std::move(name)) {
    spec_.validate(model_.n_assets());
}

void PenalizedStrategy::affine_at(double t, Eigen::VectorXd& a,
                                  Eigen::VectorXd& c) const {
    check_horizon(t, spec_.T);
    const double K = sol_->K_at(t);
    const double L = sol_->Lambda_at(t);
    const double Y = sol_->Y_at(t);
    const double xbar = sol_->mean_wealth_at(t, spec_.x0);
    SAtT S(model_, spec_, K);
    Eigen::VectorXd s_b = S.solve(model_.b());
    a = s_b * ((K - L) * xbar - Y);
    c = S.solve(spec_.gamma_matrix * spec_.w_r) - K * s_b;
}

ClassicalStrategy::ClassicalStrategy(MarketModel model, double mu, double T,
                                     double x0)
    : model_(std::move(model)), mu_(mu), T_(T), x0_(x0) {
    sib_ = model_.sigma_solve(model_.b());
    target_ = std::exp(model_.rho() * T_) / (2.0 * mu_) + x0_;
}

void ClassicalStrategy::affine_at(double t, Eigen::VectorXd& a,
                                  Eigen::VectorXd& c) const {
    (void)t;
    a = sib_ * target_;
    c = -sib_;
}

ReferenceStrategy::ReferenceStrategy(Eigen::VectorXd w_r, double T,
                                     std::string name)
    : w_r_(std::move(w_r)), T_(T), name_(std::move(name)) {}

void ReferenceStrategy::affine_at(double t, Eigen::VectorXd& a,
                                  Eigen::VectorXd& c) const {
    (void)t;
    a = Eigen::VectorXd::Zero(w_r_.size());
    c = w_r_;
}

}  // namespace temv
