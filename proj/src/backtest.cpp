#include "temv/backtest.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>

#include "temv/riccati.hpp"

namespace temv {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

bool looks_like_iso_date(const std::string& s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
    for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    return true;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string gamma_tag(double gamma_over_mu) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%g", gamma_over_mu);
    return std::string("g") + buf;
}

}  // namespace

PriceSeries load_prices(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw EmptySeries("no header row");
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "date")
        throw ParseError("header must be 'date,<ticker1>,...' (line 1)");
    PriceSeries series;
    series.tickers.assign(header.begin() + 1, header.end());
    const std::size_t d = series.tickers.size();

    struct Row {
        std::string date;
        std::vector<double> px;
    };
    std::vector<Row> rows;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_csv_line(line);
        if (fields.size() != d + 1)
            throw ParseError("wrong field count (line " + std::to_string(line_no) + ")");
        if (!looks_like_iso_date(fields[0]))
            throw ParseError("bad ISO-8601 date '" + fields[0] + "' (line " +
                             std::to_string(line_no) + ")");
        Row row;
        row.date = fields[0];
        bool drop = false;
        for (std::size_t j = 0; j < d; ++j) {
            const std::string& f = fields[j + 1];
            if (f.empty()) {  // missing cell
                drop = true;
                continue;
            }
            char* end = nullptr;
            const double v = std::strtod(f.c_str(), &end);
            if (end != f.c_str() + f.size() || !std::isfinite(v))
                throw ParseError("bad price '" + f + "' (line " +
                                 std::to_string(line_no) + ")");
            if (!(v > 0.0)) drop = true;
            row.px.push_back(v);
        }
        if (drop) {
            ++series.dropped_rows;
            continue;
        }
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2)
        throw EmptySeries("fewer than 2 usable price rows");
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].date == rows[i - 1].date)
            throw ParseError("duplicate date " + rows[i].date);

    series.dates.reserve(rows.size());
    series.prices.resize(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        series.dates.push_back(rows[i].date);
        for (std::size_t j = 0; j < d; ++j) series.prices(i, j) = rows[i].px[j];
    }
    return series;
}

PriceSeries load_prices_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    return load_prices(in);
}

BacktestReport run_backtest(const PriceSeries& series, const BacktestConfig& cfg) {
    const auto rows = series.prices.rows();
    const auto d = series.prices.cols();
    if (rows < d + 2)
        throw InsufficientData("need at least d+2 price rows for estimation");
    Eigen::MatrixXd rets(rows - 1, d);
    for (Eigen::Index k = 0; k + 1 < rows; ++k)
        rets.row(k) = series.prices.row(k + 1).cwiseQuotient(series.prices.row(k)) -
                      Eigen::RowVectorXd::Ones(d);

    MarketModel model = estimate_params(rets, cfg.periods_per_year);
    const int n = static_cast<int>(rets.rows());
    const double T = static_cast<double>(n) / cfg.periods_per_year;
    const double mu = resolve_mu(MuPolicy::target_return(cfg.target_return),
                                 model, T, cfg.x0);
    Eigen::VectorXd w_r = reference_weights(cfg.reference, model, cfg.erc_tol);

    BacktestReport report;
    report.dates = series.dates;
    report.b_hat = model.b();
    report.sigma_hat = model.Sigma();
    report.mu = mu;
    report.T = T;
    report.x0 = cfg.x0;

    std::vector<std::pair<std::string, std::shared_ptr<const Strategy>>> strategies;
    strategies.emplace_back(
        "wealth_mv",
        std::make_shared<ClassicalStrategy>(model, mu, T, cfg.x0));
    strategies.emplace_back("wealth_ref",
                            std::make_shared<ReferenceStrategy>(w_r, T));
    for (double r : cfg.gamma_over_mu) {
        const double gamma = r * mu;
        report.gammas.push_back(gamma);
        PenaltySpec spec = PenaltySpec::scalar(gamma, w_r, mu, T, cfg.x0);
        TimeGrid grid(std::max(2, cfg.riccati_steps_per_day * n), T);
        auto sol = std::make_shared<const RiccatiSolution>(
            solve_riccati(model, spec, grid));
        strategies.emplace_back(
            "wealth_pen_" + gamma_tag(r),
            std::make_shared<PenalizedStrategy>(model, spec, sol));
    }

    for (auto& [name, strat] : strategies) {
        StrategyTrack track;
        track.name = name;
        track.wealth.resize(rows);
        track.returns.resize(n);
        double x = cfg.x0;
        track.wealth[0] = x;
        for (int k = 0; k < n; ++k) {
            Eigen::VectorXd alpha =
                strat->allocation(static_cast<double>(k) / cfg.periods_per_year, x);
            const double pnl = alpha.dot(rets.row(k).transpose());
            track.returns[k] = pnl / x;
            x += pnl;
            track.wealth[k + 1] = x;
            if (!std::isfinite(x))
                throw NonFinitePath("non-finite wealth in backtest at day " +
                                    std::to_string(k + 1));
        }
        track.terminal = x;
        Eigen::Map<const Eigen::VectorXd> r(track.returns.data(), n);
        try {
            track.sharpe = sharpe(r);
        } catch (const ZeroVolatility&) {
            track.sharpe = std::nullopt;
        }
        report.tracks.push_back(std::move(track));
    }
    return report;
}

std::string report_to_csv(const BacktestReport& report) {
    std::string out = "date";
    for (const auto& tr : report.tracks) out += "," + tr.name;
    out += "\n";
    for (std::size_t i = 0; i < report.dates.size(); ++i) {
        out += report.dates[i];
        for (const auto& tr : report.tracks) out += "," + fmt17(tr.wealth[i]);
        out += "\n";
    }
    out += "summary";
    for (const auto& tr : report.tracks) out += "," + tr.name;
    out += "\n";
    out += "sharpe";
    for (const auto& tr : report.tracks)
        out += "," + (tr.sharpe ? fmt17(*tr.sharpe) : std::string("NA"));
    out += "\n";
    return out;
}

ParsedReport parse_report_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty report");
    auto header = split_csv_line(line);
    if (header.empty() || header[0] != "date")
        throw ParseError("report header must start with 'date'");
    ParsedReport parsed;
    parsed.columns.assign(header.begin() + 1, header.end());
    std::vector<std::vector<double>> wealth_rows;
    while (std::getline(in, line)) {
        auto fields = split_csv_line(line);
        if (fields.empty()) continue;
        if (fields[0] == "summary") break;
        if (fields.size() != header.size())
            throw ParseError("row width mismatch in report");
        parsed.dates.push_back(fields[0]);
        std::vector<double> row;
        for (std::size_t j = 1; j < fields.size(); ++j)
            row.push_back(std::strtod(fields[j].c_str(), nullptr));
        wealth_rows.push_back(std::move(row));
    }
    if (!std::getline(in, line)) throw ParseError("missing sharpe row");
    auto sh = split_csv_line(line);
    if (sh.empty() || sh[0] != "sharpe") throw ParseError("missing sharpe row");
    for (std::size_t j = 1; j < sh.size(); ++j) {
        if (sh[j] == "NA")
            parsed.sharpes.emplace_back(std::nullopt);
        else
            parsed.sharpes.emplace_back(std::strtod(sh[j].c_str(), nullptr));
    }
    parsed.wealth.resize(static_cast<Eigen::Index>(wealth_rows.size()),
                         static_cast<Eigen::Index>(parsed.columns.size()));
    for (std::size_t i = 0; i < wealth_rows.size(); ++i)
        for (std::size_t j = 0; j < wealth_rows[i].size(); ++j)
            parsed.wealth(i, j) = wealth_rows[i][j];
    return parsed;
}

}  // namespace temv
