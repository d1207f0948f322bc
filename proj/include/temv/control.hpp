#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>

#include "temv/riccati.hpp"

namespace temv {

struct ControlState {
    double t;
    double x;
    double x_bar;
};

/// Law-dependent (McKean-Vlasov) form of the optimal control,
///   alpha = S^{-1} G w_r x - S^{-1} b [K x + Y - (K - Lambda) x_bar].
/// The caller supplies x_bar = E[X_t]; nothing is hidden behind the evaluator.
Eigen::VectorXd control_mkv(const MarketModel& model, const PenaltySpec& spec,
                            const RiccatiSolution& sol, const ControlState& state);

/// Feedback form in (x0, x) through the deterministic mean path
/// x0 C_{0,t} + H_t/2; identical to control_mkv along the optimal flow.
Eigen::VectorXd control_feedback_x0(const MarketModel& model,
                                    const PenaltySpec& spec,
                                    const RiccatiSolution& sol, double t,
                                    double x);

/// Unpenalized mean-variance control
///   alpha = Sigma^{-1} b [ e^{rho T}/(2 mu) + x0 - x ].
Eigen::VectorXd control_classical(const MarketModel& model, double mu, double T,
                                  double x0, double t, double x);

Eigen::VectorXd control_reference(const Eigen::VectorXd& w_r, double x);

/// A simulatable strategy: alpha(t, x) affine in x. Immutable and thread-safe.
class Strategy {
public:
    virtual ~Strategy() = default;
    virtual const std::string& name() const = 0;
    virtual int n_assets() const = 0;
    virtual double horizon() const = 0;
    /// Coefficients of alpha(t, x) = a + c x.
    virtual void affine_at(double t, Eigen::VectorXd& a, Eigen::VectorXd& c) const = 0;

    Eigen::VectorXd allocation(double t, double x) const {
        Eigen::VectorXd a, c;
        affine_at(t, a, c);
        return a + c * x;
    }
};

class PenalizedStrategy final : public Strategy {
public:
    PenalizedStrategy(MarketModel model, PenaltySpec spec,
                      std::shared_ptr<const RiccatiSolution> sol,
                      std::string name = "penalized");
    const std::string& name() const override { return name_; }
    int n_assets() const override { return model_.n_assets(); }
    double horizon() const override { return spec_.T; }
    void affine_at(double t, Eigen::VectorXd& a, Eigen::VectorXd& c) const override;

    const RiccatiSolution& solution() const { return *sol_; }
    const PenaltySpec& spec() const { return spec_; }

private:
    MarketModel model_;
    PenaltySpec spec_;
    std::shared_ptr<const RiccatiSolution> sol_;
    std::string name_;
};

class ClassicalStrategy final : public Strategy {
public:
    ClassicalStrategy(MarketModel model, double mu, double T, double x0);
    const std::string& name() const override { return name_; }
    int n_assets() const override { return model_.n_assets(); }
    double horizon() const override { return T_; }
    void affine_at(double t, Eigen::VectorXd& a, Eigen::VectorXd& c) const override;

private:
    MarketModel model_;
    double mu_, T_, x0_;
    Eigen::VectorXd sib_;  // Sigma^{-1} b
    double target_;        // e^{rho T}/(2 mu) + x0
    std::string name_ = "classical";
};

class ReferenceStrategy final : public Strategy {
public:
    ReferenceStrategy(Eigen::VectorXd w_r, double T,
                      std::string name = "reference");
    const std::string& name() const override { return name_; }
    int n_assets() const override { return static_cast<int>(w_r_.size()); }
    double horizon() const override { return T_; }
    void affine_at(double t, Eigen::VectorXd& a, Eigen::VectorXd& c) const override;

private:
    Eigen::VectorXd w_r_;
    double T_;
    std::string name_;
};

}  // namespace temv
