#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "temv/control.hpp"

namespace temv {

struct SimConfig {
    std::int64_t n_paths = 10000;
    int steps_per_year = 252;
    double T = 1.0;
    std::uint64_t seed = 0;
    bool antithetic = false;
    double x0 = 1.0;

    int n_steps() const {
        return static_cast<int>(std::llround(steps_per_year * T));
    }
};

/// Euler scheme with exact Gaussian increments,
///   X_{k+1} = X_k + alpha_k' b dt + alpha_k' sigma sqrt(dt) Z_k,
/// alpha evaluated at (t_k, X_k). Rows are paths, columns time nodes.
/// Throws NonFinitePath on overflow/NaN.
Eigen::MatrixXd simulate_wealth(const MarketModel& model_real,
                                const Strategy& strategy, const SimConfig& cfg,
                                int n_threads = 0);

/// Terminal wealth only (memory-light variant of simulate_wealth).
Eigen::VectorXd simulate_terminal(const MarketModel& model_real,
                                  const Strategy& strategy, const SimConfig& cfg,
                                  int n_threads = 0);

/// Daily Sharpe ratio mean(r)/stdev(r), stdev with divisor n-1, unannualized.
double sharpe(const Eigen::VectorXd& returns);

/// Simple returns (X_{k+1}-X_k)/X_k along one wealth path.
Eigen::VectorXd path_returns(const Eigen::VectorXd& wealth);

struct MuPolicy {
    enum class Kind {
        TargetReturn,   // mu s.t. E[X_T] = x0 (1+value)^T (Zhou-Li mean identity)
        PaperLiteral,   // mu = e^{rho T} / (2 x0 (1+value))
        Fixed,          // mu = value
    };
    Kind kind = Kind::TargetReturn;
    double value = 0.20;

    static MuPolicy target_return(double r) { return {Kind::TargetReturn, r}; }
    static MuPolicy paper_literal(double r) { return {Kind::PaperLiteral, r}; }
    static MuPolicy fixed(double mu) { return {Kind::Fixed, mu}; }
};

double resolve_mu(const MuPolicy& policy, const MarketModel& model, double T,
                  double x0);

struct GammaPolicy {
    enum class Kind { RatioOfMu, Fixed };
    Kind kind = Kind::RatioOfMu;
    double value = 0.01;

    static GammaPolicy ratio_of_mu(double r) { return {Kind::RatioOfMu, r}; }
    static GammaPolicy fixed(double g) { return {Kind::Fixed, g}; }
};

inline double resolve_gamma(const GammaPolicy& policy, double mu) {
    return policy.kind == GammaPolicy::Kind::RatioOfMu ? policy.value * mu
                                                       : policy.value;
}

enum class NoiseTarget {
    VolFactor,   // sigma_real = chol(Sigma0) + eps N; Sigma_real = sigma sigma'
    Covariance,  // Sigma_real = repair(Sigma0 + eps (N+N')/2)
};

enum class PsdRepair { EigenClip, Reject };

struct MisspecConfig {
    std::vector<double> epsilon_grid;
    int n_scenarios = 2000;
    std::uint64_t noise_seed = 0;
    NoiseTarget noise_target = NoiseTarget::VolFactor;
    PsdRepair psd_repair = PsdRepair::EigenClip;
};

struct EpsStats {
    double mean_sharpe = 0.0;
    double se_sharpe = 0.0;
    double mean_xt = 0.0;
    double var_xt = 0.0;
    int n_valid = 0;
    int n_zero_vol = 0;
};

struct PairedStats {
    double mean_diff = 0.0;
    double se_diff = 0.0;
    int n = 0;
};

struct StudyResult {
    std::vector<double> epsilons;
    std::vector<std::string> strategy_names;  // classical, penalized, reference
    std::vector<std::vector<EpsStats>> stats;  // [strategy][eps]
    std::vector<PairedStats> penalized_minus_classical;  // per eps
    // per-scenario Sharpe, rows = epsilons, cols = scenarios (NaN = undefined)
    std::vector<Eigen::MatrixXd> scenario_sharpe;  // [strategy]
    // resolved configuration echo
    ReferenceKind reference = ReferenceKind::EqualWeights;
    double mu = 0.0;
    double gamma = 0.0;
    int n_scenarios = 0;
    std::uint64_t noise_seed = 0;
    int steps_per_year = 252;
    double T = 1.0;
    double x0 = 1.0;
    std::string noise_target;
};

/// One simulated path per scenario; all strategies and all epsilons consume the
/// same scenario noise (common random numbers). Scenario s draws, in order,
/// the drift noise, the matrix noise and the Brownian increments from a stream
/// seeded by (noise_seed, s), so aggregates are bitwise reproducible and
/// independent of the thread count.
StudyResult misspecification_study(const MarketModel& model0,
                                   const MisspecConfig& cfg, const SimConfig& sim,
                                   ReferenceKind reference,
                                   const MuPolicy& mu_policy,
                                   const GammaPolicy& gamma_policy,
                                   int n_threads = 0);

std::string study_to_json(const StudyResult& result);
std::string study_to_csv(const StudyResult& result);

struct WeakOptCurve {
    std::string name;
    std::vector<double> t;
    std::vector<double> ev;      // estimated E[V_t]
    std::vector<double> se;
    double ev0 = 0.0;            // deterministic E[V_0] = v_0(x0, x0)
    bool flat_within_3se = false;
    bool nondecreasing_within_3se = false;
    double total_increase = 0.0;
    double se_total = 0.0;
    bool increase_significant = false;  // total_increase > 3 se_total
    double terminal_identity_gap = 0.0; // E[V_T] vs mu Var - mean + penalty
};

struct WeakOptReport {
    double v0_formula = 0.0;  // Lambda_0 x0^2 + 2 Y_0 x0 + R_0
    std::vector<WeakOptCurve> curves;  // first entry: the optimal control
};

/// Monte Carlo estimate of t -> E[V_t^alpha] with
///   V_t = K_t (X_t - Xbar)^2 + Lambda_t Xbar^2 + 2 Y_t X_t + R_t
///         + int_0^t (alpha - w_r X)' Gamma (alpha - w_r X) ds
/// for the optimal control and each perturbation strategy.
WeakOptReport verify_weak_optimality(
    const MarketModel& model, const PenaltySpec& spec, const RiccatiSolution& sol,
    const SimConfig& sim,
    const std::vector<std::shared_ptr<const Strategy>>& perturbations,
    int n_checkpoints = 10, int n_threads = 0);

/// Worker count: requested if > 0, else TE_MEANVAR_THREADS, else hardware.
int resolve_threads(int requested);

}  // namespace temv
