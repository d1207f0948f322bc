#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "temv/market.hpp"
#include "temv/montecarlo.hpp"

namespace temv {

/// Aligned panel of adjusted close prices. Rows follow `dates`, columns
/// `tickers`; every retained price is strictly positive.
struct PriceSeries {
    std::vector<std::string> tickers;
    std::vector<std::string> dates;  // ISO-8601, strictly increasing
    Eigen::MatrixXd prices;
    int dropped_rows = 0;  // rows discarded for missing/non-positive prices
};

/// Parse `date,<t1>,<t2>,...` CSV. Rows are sorted by date; rows with a
/// missing or non-positive price are dropped (counted in dropped_rows);
/// structurally malformed rows raise ParseError with their line number.
PriceSeries load_prices(std::istream& in);
PriceSeries load_prices_file(const std::string& path);

struct BacktestConfig {
    ReferenceKind reference = ReferenceKind::EqualWeights;
    double target_return = 0.25;             // annual, compounded over the span
    std::vector<double> gamma_over_mu = {1.0, 0.01};
    double x0 = 1.0;
    int periods_per_year = 252;
    double erc_tol = 1e-10;
    int riccati_steps_per_day = 10;
};

struct StrategyTrack {
    std::string name;
    std::vector<double> wealth;   // same length as dates
    std::vector<double> returns;  // length dates-1
    std::optional<double> sharpe; // empty when returns are flat (ZeroVolatility)
    double terminal = 0.0;
};

struct BacktestReport {
    std::vector<std::string> dates;
    std::vector<StrategyTrack> tracks;  // classical, reference, penalized per gamma
    Eigen::VectorXd b_hat;
    Eigen::MatrixXd sigma_hat;  // covariance estimate
    double mu = 0.0;
    double T = 0.0;
    std::vector<double> gammas;
    double x0 = 1.0;
};

/// Daily-rebalanced in-sample run: estimate (b, Sigma) on the full series,
/// hold alpha(t_k, X_k) over day k, update X_{k+1} = X_k + alpha_k' r_{k+1}
/// with simple returns r; the risk-free leg pays zero.
BacktestReport run_backtest(const PriceSeries& series, const BacktestConfig& cfg);

/// Deterministic CSV: wealth columns per strategy, then a summary block with
/// each strategy's daily Sharpe. 17 significant digits, '.' decimal, '\n'.
std::string report_to_csv(const BacktestReport& report);

/// Re-read a report emitted by report_to_csv (used for round-trip checks).
struct ParsedReport {
    std::vector<std::string> columns;            // wealth column names
    std::vector<std::string> dates;
    Eigen::MatrixXd wealth;                      // rows x columns
    std::vector<std::optional<double>> sharpes;  // per column
};
ParsedReport parse_report_csv(const std::string& csv);

}  // namespace temv
