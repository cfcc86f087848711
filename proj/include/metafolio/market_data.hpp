// Price/return panel ingestion and portfolio return arithmetic.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "metafolio/dates.hpp"

namespace metafolio {

/// One allocation: fractions of capital per asset.
/// Invariants: weights sum to 1 (1e-9), all weights >= 0.
struct WeightVector {
    std::vector<std::string> assets;
    Eigen::VectorXd weights;
};

/// Aligned date x asset matrix of strictly positive prices.
struct PricePanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Eigen::MatrixXd prices;  // [T x N]

    long rows() const { return prices.rows(); }
    long cols() const { return prices.cols(); }
};

/// Aligned date x asset matrix of simple returns, r_t = P_t/P_{t-1} - 1.
/// Dates are those of the *later* price in each ratio.
struct ReturnPanel {
    std::vector<Date> dates;
    std::vector<std::string> assets;
    Eigen::MatrixXd returns;  // [T-1 x N] relative to the source panel

    long rows() const { return returns.rows(); }
    long cols() const { return returns.cols(); }
};

/// One investment universe: a small id plus its ticker list.
struct UniverseSpec {
    int universe_id = 0;
    std::vector<std::string> tickers;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.push_back("");
    return out;
}

}  // namespace detail

/// Load a `date,ticker,price` CSV and align the requested tickers on the
/// dates where every ticker has a price (inner join).
inline PricePanel load_prices(const std::string& path,
                              const std::vector<std::string>& tickers) {
    if (tickers.empty()) throw std::runtime_error("unknown asset: empty ticker list");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::set<std::string> wanted(tickers.begin(), tickers.end());
    // per ticker: date -> price
    std::map<std::string, std::map<Date, double>> series;

    std::string line;
    bool header = true;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "date,ticker,price")
                throw std::runtime_error("bad CSV header: expected 'date,ticker,price'");
            continue;
        }
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 3)
            throw std::runtime_error("bad CSV row at line " + std::to_string(lineno));
        const std::string& ticker = cells[1];
        if (!wanted.count(ticker)) continue;
        Date d = Date::parse(cells[0]);
        double p;
        try {
            size_t pos = 0;
            p = std::stod(cells[2], &pos);
            if (pos != cells[2].size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw std::runtime_error("invalid price at line " + std::to_string(lineno));
        }
        if (!(p > 0.0))
            throw std::runtime_error("invalid price: non-positive at line " +
                                     std::to_string(lineno));
        auto [it, inserted] = series[ticker].emplace(d, p);
        if (!inserted)
            throw std::runtime_error("duplicate (date, ticker) row at line " +
                                     std::to_string(lineno));
    }

    for (const auto& t : tickers)
        if (!series.count(t)) throw std::runtime_error("unknown asset: " + t);

    // Intersect dates across all requested tickers.
    std::vector<Date> common;
    for (const auto& [d, p] : series.at(tickers.front())) {
        bool all = true;
        for (const auto& t : tickers)
            if (!series.at(t).count(d)) { all = false; break; }
        if (all) common.push_back(d);
    }
    if (common.empty()) throw std::runtime_error("no overlapping dates");

    PricePanel panel;
    panel.dates = common;
    panel.assets = tickers;
    panel.prices.resize(static_cast<long>(common.size()),
                        static_cast<long>(tickers.size()));
    for (size_t i = 0; i < common.size(); ++i)
        for (size_t j = 0; j < tickers.size(); ++j)
            panel.prices(static_cast<long>(i), static_cast<long>(j)) =
                series.at(tickers[j]).at(common[i]);
    return panel;
}

/// Canonical CSV emission; loading the output reproduces the panel bit-exactly.
inline void write_prices_csv(const PricePanel& panel, std::ostream& out) {
    out << "date,ticker,price\n";
    out.precision(17);
    for (long t = 0; t < panel.rows(); ++t)
        for (long n = 0; n < panel.cols(); ++n)
            out << panel.dates[static_cast<size_t>(t)].to_string() << ','
                << panel.assets[static_cast<size_t>(n)] << ',' << panel.prices(t, n)
                << '\n';
}

/// Simple arithmetic returns, one row per consecutive price pair.
inline ReturnPanel compute_returns(const PricePanel& panel) {
    if (panel.rows() < 2) throw std::runtime_error("insufficient history");
    ReturnPanel rp;
    rp.assets = panel.assets;
    rp.dates.assign(panel.dates.begin() + 1, panel.dates.end());
    rp.returns = panel.prices.bottomRows(panel.rows() - 1).array() /
                     panel.prices.topRows(panel.rows() - 1).array() -
                 1.0;
    return rp;
}

/// Portfolio return for one day: R = sum_n w_n r_n, with weights set
/// strictly before the return is realized.
inline double portfolio_return(const WeightVector& weights,
                               const std::vector<std::string>& assets,
                               const Eigen::VectorXd& asset_returns) {
    if (weights.assets != assets) throw std::runtime_error("asset mismatch");
    return weights.weights.dot(asset_returns);
}

/// Portfolio return series over a panel given a weight vector per date.
/// Each entry maps a return date to the weights in force on that date
/// (decided strictly earlier).
inline std::vector<double> portfolio_returns(
    const ReturnPanel& panel, const std::map<Date, WeightVector>& weights_by_date) {
    std::vector<double> out;
    out.reserve(weights_by_date.size());
    std::map<Date, long> index;
    for (long t = 0; t < panel.rows(); ++t)
        index[panel.dates[static_cast<size_t>(t)]] = t;
    for (const auto& [date, w] : weights_by_date) {
        auto it = index.find(date);
        if (it == index.end()) throw std::runtime_error("unknown date: " + date.to_string());
        out.push_back(portfolio_return(w, panel.assets, panel.returns.row(it->second)));
    }
    return out;
}

}  // namespace metafolio
