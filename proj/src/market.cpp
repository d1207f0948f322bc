#include "temv/market.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace temv {

namespace {
constexpr double kEigenvalueFloor = 1e-10;
}

MarketModel::MarketModel(Eigen::VectorXd drift, Eigen::MatrixXd vol)
    : b_(std::move(drift)), sigma_(std::move(vol)) {
    const auto d = b_.size();
    if (d == 0) throw DimensionMismatch("empty drift vector");
    if (sigma_.rows() != d || sigma_.cols() != d)
        throw DimensionMismatch("sigma must be " + std::to_string(d) + "x" +
                                std::to_string(d));
    Sigma_ = sigma_ * sigma_.transpose();
    Sigma_ = 0.5 * (Sigma_ + Sigma_.transpose().eval());  // kill rounding skew

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma_,
                                                      Eigen::EigenvaluesOnly);
    delta_floor_ = es.eigenvalues().minCoeff();
    if (!(delta_floor_ > kEigenvalueFloor))
        throw DegenerateCovariance(
            "smallest eigenvalue of Sigma = " + std::to_string(delta_floor_) +
            " at or below floor 1e-10");
    Sigma_llt_.compute(Sigma_);
    if (Sigma_llt_.info() != Eigen::Success)
        throw DegenerateCovariance("Cholesky factorization of Sigma failed");
    rho_ = b_.dot(sigma_solve(b_));
}

PenaltySpec PenaltySpec::scalar(double gamma, Eigen::VectorXd w_r, double mu,
                                double T, double x0) {
    PenaltySpec spec;
    const auto d = w_r.size();
    spec.gamma_matrix = gamma * Eigen::MatrixXd::Identity(d, d);
    spec.w_r = std::move(w_r);
    spec.mu = mu;
    spec.T = T;
    spec.x0 = x0;
    return spec;
}

void PenaltySpec::validate(int n_assets) const {
    if (w_r.size() != n_assets)
        throw DimensionMismatch("w_r has size " + std::to_string(w_r.size()) +
                                ", expected " + std::to_string(n_assets));
    if (gamma_matrix.rows() != n_assets || gamma_matrix.cols() != n_assets)
        throw DimensionMismatch("gamma_matrix must be " +
                                std::to_string(n_assets) + "x" +
                                std::to_string(n_assets));
    const double scale = std::max(1.0, gamma_matrix.cwiseAbs().maxCoeff());
    if ((gamma_matrix - gamma_matrix.transpose()).cwiseAbs().maxCoeff() >
        1e-12 * scale)
        throw InvalidSpec("gamma_matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gamma_matrix,
                                                      Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-12 * scale)
        throw InvalidSpec("gamma_matrix has a negative eigenvalue");
    if (!(mu > 0.0)) throw InvalidSpec("mu must be positive");
    if (!(T > 0.0)) throw InvalidSpec("T must be positive");
    if (!(x0 > 0.0)) throw InvalidSpec("x0 must be positive");
}

std::optional<double> PenaltySpec::scalar_gamma() const {
    const auto d = gamma_matrix.rows();
    const double g = gamma_matrix(0, 0);
    const double tol = 1e-12 * std::max(1.0, std::abs(g));
    Eigen::MatrixXd diff = gamma_matrix - g * Eigen::MatrixXd::Identity(d, d);
    if (diff.cwiseAbs().maxCoeff() > tol) return std::nullopt;
    return g;
}

const char* to_string(ReferenceKind kind) {
    switch (kind) {
        case ReferenceKind::EqualWeights: return "equal-weights";
        case ReferenceKind::MinimumVariance: return "min-var";
        case ReferenceKind::ERC: return "erc";
        case ReferenceKind::Zero: return "zero";
    }
    return "?";
}

ReferenceKind reference_kind_from_string(const std::string& name) {
    if (name == "equal-weights" || name == "ew") return ReferenceKind::EqualWeights;
    if (name == "min-var" || name == "minimum-variance") return ReferenceKind::MinimumVariance;
    if (name == "erc") return ReferenceKind::ERC;
    if (name == "zero") return ReferenceKind::Zero;
    throw InvalidSpec("unknown reference kind '" + name + "'");
}

MarketModel build_market(const Eigen::VectorXd& b, const Eigen::MatrixXd& sigma) {
    return MarketModel(b, sigma);
}

Eigen::MatrixXd covariance_from_vols_corr(const Eigen::VectorXd& vols,
                                          const Eigen::MatrixXd& corr) {
    const auto d = vols.size();
    if (corr.rows() != d || corr.cols() != d)
        throw DimensionMismatch("correlation matrix must be " +
                                std::to_string(d) + "x" + std::to_string(d));
    if ((vols.array() <= 0.0).any())
        throw InvalidSpec("volatilities must be strictly positive");
    for (Eigen::Index i = 0; i < d; ++i) {
        if (std::abs(corr(i, i) - 1.0) > 1e-12)
            throw InvalidCorrelation("diagonal entry " + std::to_string(i) +
                                     " is not 1");
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::abs(corr(i, j)) > 1.0 + 1e-12)
                throw InvalidCorrelation("entry (" + std::to_string(i) + "," +
                                         std::to_string(j) + ") outside [-1,1]");
            if (std::abs(corr(i, j) - corr(j, i)) > 1e-12)
                throw InvalidCorrelation("matrix is not symmetric");
        }
    }
    return vols.asDiagonal() * corr * vols.asDiagonal();
}

namespace {

Eigen::VectorXd erc_weights(const MarketModel& model, double tol) {
    const int d = model.n_assets();
    const Eigen::MatrixXd& S = model.Sigma();
    Eigen::VectorXd w = Eigen::VectorXd::Constant(d, 1.0 / d);

    auto gap = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd rc = v.cwiseProduct(S * v);
        return rc.maxCoeff() - rc.minCoeff();
    };

    // Converge the contribution gap two orders below the requested tolerance:
    // the induced weight error scales like gap / ||Sigma w||, so stopping at
    // tol exactly would not bound the weights themselves by O(tol).
    const double target_gap = 0.01 * tol;
    const int budget = 100000;
    // Damped multiplicative fixed point on the risk contributions.
    const double eta = 0.5;
    int it = 0;
    for (; it < budget; ++it) {
        Eigen::VectorXd m = S * w;
        Eigen::VectorXd rc = w.cwiseProduct(m);
        if (gap(w) <= target_gap) return w;
        double target = rc.mean();
        Eigen::VectorXd next(d);
        for (int i = 0; i < d; ++i)
            next[i] = w[i] * std::pow(target / rc[i], eta);
        next = next.cwiseMax(0.0);
        double s = next.sum();
        if (!(s > 0.0) || !next.allFinite()) break;
        w = next / s;
    }
    if (gap(w) <= tol) return w;

    // Fallback: projected gradient on the squared pairwise-gap objective over
    // the box-constrained simplex.
    auto project_simplex = [&](Eigen::VectorXd v) {
        // Euclidean projection onto {0 <= w <= 1, sum w = 1}.
        double lo = v.minCoeff() - 1.0, hi = v.maxCoeff();
        for (int iter = 0; iter < 200; ++iter) {
            double lam = 0.5 * (lo + hi);
            double s = 0.0;
            for (int i = 0; i < d; ++i)
                s += std::clamp(v[i] - lam, 0.0, 1.0);
            (s > 1.0 ? lo : hi) = lam;
        }
        double lam = 0.5 * (lo + hi);
        for (int i = 0; i < d; ++i) v[i] = std::clamp(v[i] - lam, 0.0, 1.0);
        return v;
    };
    auto objective = [&](const Eigen::VectorXd& v) {
        Eigen::VectorXd rc = v.cwiseProduct(S * v);
        double f = 0.0;
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) {
                double g = rc[i] - rc[j];
                f += g * g;
            }
        return f;
    };
    double step = 1.0;
    for (int k = 0; k < budget; ++k) {
        Eigen::VectorXd m = S * w;
        Eigen::VectorXd rc = w.cwiseProduct(m);
        if (gap(w) <= target_gap) return w;
        // grad of sum_{ij} (rc_i - rc_j)^2 = 2d sum rc_i^2 - 2 (sum rc)^2
        Eigen::VectorXd r = 2.0 * d * rc.array().matrix() -
                            2.0 * rc.sum() * Eigen::VectorXd::Ones(d);
        // d rc_i / d w_l = delta_il m_i + w_i S_il
        Eigen::VectorXd grad = r.cwiseProduct(m) + S * r.cwiseProduct(w);
        grad *= 2.0;
        double f0 = objective(w);
        Eigen::VectorXd cand;
        for (int ls = 0; ls < 60; ++ls) {
            cand = project_simplex(w - step * grad);
            if (objective(cand) < f0) break;
            step *= 0.5;
        }
        if ((cand - w).cwiseAbs().maxCoeff() < 1e-18) break;
        w = cand;
        step *= 1.5;
    }
    if (gap(w) <= tol) return w;
    throw ErcNonConvergence("risk-contribution gap " + std::to_string(gap(w)) +
                            " above tol after iteration budget");
}

}  // namespace

Eigen::VectorXd reference_weights(ReferenceKind kind, const MarketModel& model,
                                  double tol) {
    const int d = model.n_assets();
    switch (kind) {
        case ReferenceKind::EqualWeights:
            return Eigen::VectorXd::Constant(d, 1.0 / d);
        case ReferenceKind::MinimumVariance: {
            Eigen::VectorXd si = model.sigma_solve(Eigen::VectorXd::Ones(d));
            return si / si.sum();
        }
        case ReferenceKind::Zero:
            return Eigen::VectorXd::Zero(d);
        case ReferenceKind::ERC:
            return erc_weights(model, tol);
    }
    throw InvalidSpec("unreachable reference kind");
}

MarketModel estimate_params(const Eigen::MatrixXd& returns, int periods_per_year) {
    const auto rows = returns.rows();
    const auto d = returns.cols();
    if (periods_per_year <= 0) throw InvalidSpec("periods_per_year must be positive");
    if (rows < d + 1)
        throw InsufficientData("need at least " + std::to_string(d + 1) +
                               " return rows, got " + std::to_string(rows));
    Eigen::VectorXd mean = returns.colwise().mean();
    Eigen::MatrixXd centered = returns.rowwise() - mean.transpose();
    Eigen::MatrixXd cov =
        centered.transpose() * centered / static_cast<double>(rows - 1);
    Eigen::VectorXd b = mean * static_cast<double>(periods_per_year);
    Eigen::MatrixXd Sigma = cov * static_cast<double>(periods_per_year);
    Sigma = 0.5 * (Sigma + Sigma.transpose().eval());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Sigma, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 1e-10))
        throw DegenerateCovariance("estimated covariance is not positive definite");
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    if (llt.info() != Eigen::Success)
        throw DegenerateCovariance("Cholesky of estimated covariance failed");
    return MarketModel(b, Eigen::MatrixXd(llt.matrixL()));
}

Eigen::VectorXd study_drift() {
    Eigen::VectorXd b(4);
    b << 0.12, 0.14, 0.16, 0.10;
    return b;
}

Eigen::VectorXd study_vols() {
    Eigen::VectorXd v(4);
    v << 0.20, 0.30, 0.40, 0.50;
    return v;
}

Eigen::MatrixXd study_correlations() {
    Eigen::MatrixXd C(4, 4);
    C << 1.00, 0.05, -0.05, 0.10,
         0.05, 1.00, -0.03, 0.12,
        -0.05, -0.03, 1.00, -0.13,
         0.10, 0.12, -0.13, 1.00;
    return C;
}

MarketModel study_market() {
    Eigen::MatrixXd Sigma = covariance_from_vols_corr(study_vols(), study_correlations());
    Eigen::LLT<Eigen::MatrixXd> llt(Sigma);
    return MarketModel(study_drift(), Eigen::MatrixXd(llt.matrixL()));
}

}  // namespace temv
