#pragma once

#include <Eigen/Dense>
#include <optional>

#include "temv/errors.hpp"

namespace temv {

/// Black-Scholes market with constant drift vector b (1/year) and volatility
/// factor sigma (1/sqrt(year)); Sigma = sigma sigma^T must dominate a strictly
/// positive multiple of the identity.
class MarketModel {
public:
    MarketModel(Eigen::VectorXd drift, Eigen::MatrixXd vol);

    int n_assets() const { return static_cast<int>(b_.size()); }
    const Eigen::VectorXd& b() const { return b_; }
    const Eigen::MatrixXd& sigma() const { return sigma_; }
    const Eigen::MatrixXd& Sigma() const { return Sigma_; }
    double delta_floor() const { return delta_floor_; }

    /// Sigma^{-1} rhs through the cached SPD factorization.
    Eigen::VectorXd sigma_solve(const Eigen::VectorXd& rhs) const {
        return Sigma_llt_.solve(rhs);
    }
    /// rho = b' Sigma^{-1} b, the squared market price of risk (1/year).
    double rho() const { return rho_; }

private:
    Eigen::VectorXd b_;
    Eigen::MatrixXd sigma_;
    Eigen::MatrixXd Sigma_;
    Eigen::LLT<Eigen::MatrixXd> Sigma_llt_;
    double delta_floor_ = 0.0;
    double rho_ = 0.0;
};

/// Tracking-error penalty and mean-variance problem data. gamma_matrix is
/// symmetric PSD (the zero matrix is allowed and reproduces the classical
/// unpenalized problem).
struct PenaltySpec {
    Eigen::MatrixXd gamma_matrix;
    Eigen::VectorXd w_r;
    double mu = 1.0;
    double T = 1.0;
    double x0 = 1.0;

    static PenaltySpec scalar(double gamma, Eigen::VectorXd w_r, double mu,
                              double T, double x0);
    void validate(int n_assets) const;

    /// gamma if gamma_matrix == gamma * I (within 1e-12 scaled), else nullopt.
    std::optional<double> scalar_gamma() const;
};

enum class ReferenceKind { EqualWeights, MinimumVariance, ERC, Zero };

const char* to_string(ReferenceKind kind);
ReferenceKind reference_kind_from_string(const std::string& name);

MarketModel build_market(const Eigen::VectorXd& b, const Eigen::MatrixXd& sigma);

/// Sigma_ij = v_i v_j C_ij.
Eigen::MatrixXd covariance_from_vols_corr(const Eigen::VectorXd& vols,
                                          const Eigen::MatrixXd& corr);

Eigen::VectorXd reference_weights(ReferenceKind kind, const MarketModel& model,
                                  double tol = 1e-10);

/// Annualized (b, Sigma) from a rows x assets matrix of simple per-period
/// returns; sample covariance with divisor rows-1, volatility factor taken as
/// the lower Cholesky factor of Sigma.
MarketModel estimate_params(const Eigen::MatrixXd& returns, int periods_per_year = 252);

/// The four-asset reference market of the simulation study.
MarketModel study_market();
Eigen::VectorXd study_drift();
Eigen::VectorXd study_vols();
Eigen::MatrixXd study_correlations();

}  // namespace temv
