// Declarative run configuration: JSON file with nested tables, documented
// defaults for everything except the data path and the universe list.
#pragma once

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "metafolio/backtest.hpp"
#include "metafolio/market_data.hpp"

namespace metafolio {

struct RunConfig {
    std::string data_path;
    std::string output_dir = "out";
    std::vector<UniverseSpec> universes;
    BacktestConfig backtest;
    long density_bucket = 250;

    bool operator==(const RunConfig& other) const;
};

/// Raised on malformed configuration; carries field context for diagnostics.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string estimator_name(CovarianceEstimatorKind k) {
    switch (k) {
        case CovarianceEstimatorKind::Dcc: return "dcc";
        case CovarianceEstimatorKind::Sample: return "sample";
        case CovarianceEstimatorKind::Ewma: return "ewma";
    }
    return "dcc";
}

inline CovarianceEstimatorKind parse_estimator(const std::string& s) {
    if (s == "dcc") return CovarianceEstimatorKind::Dcc;
    if (s == "sample") return CovarianceEstimatorKind::Sample;
    if (s == "ewma") return CovarianceEstimatorKind::Ewma;
    throw ConfigError("covariance.estimator: unknown value '" + s + "'");
}

template <typename T>
T get_or(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError("field '" + key + "': wrong type");
    }
}

}  // namespace detail

inline nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["data_path"] = cfg.data_path;
    j["output_dir"] = cfg.output_dir;
    j["universes"] = nlohmann::json::array();
    for (const auto& u : cfg.universes)
        j["universes"].push_back({{"id", u.universe_id}, {"tickers", u.tickers}});
    j["windows"] = {{"t_r", cfg.backtest.windows.t_r},
                    {"t_m", cfg.backtest.windows.t_m},
                    {"t_h", cfg.backtest.windows.t_h},
                    {"t_a", cfg.backtest.windows.t_a}};
    j["cost"] = {{"rate", cfg.backtest.cost.rate}};
    j["covariance"] = {{"estimator", detail::estimator_name(cfg.backtest.estimator)}};
    nlohmann::json box = nlohmann::json::array();
    for (const auto& d : cfg.backtest.learner.search_box.dims)
        box.push_back({{"name", d.name},
                       {"lo", d.lo},
                       {"hi", d.hi},
                       {"log_scale", d.log_scale},
                       {"integer", d.integer}});
    j["learner"] = {{"hyperopt_budget", cfg.backtest.learner.hyperopt_budget},
                    {"hyperopt_cadence", cfg.backtest.learner.hyperopt_cadence},
                    {"min_examples", cfg.backtest.learner.min_examples},
                    {"search_box", std::move(box)}};
    j["seed"] = cfg.backtest.seed;
    j["density_bucket"] = cfg.density_bucket;
    return j;
}

inline RunConfig config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (!j.contains("data_path"))
        throw ConfigError("missing required field 'data_path'");
    cfg.data_path = j.at("data_path").get<std::string>();
    if (!j.contains("universes") || !j.at("universes").is_array() ||
        j.at("universes").empty())
        throw ConfigError("missing required field 'universes'");
    for (const auto& ju : j.at("universes")) {
        UniverseSpec u;
        u.universe_id = detail::get_or<int>(ju, "id",
                                            static_cast<int>(cfg.universes.size()) + 1);
        u.tickers = ju.at("tickers").get<std::vector<std::string>>();
        cfg.universes.push_back(std::move(u));
    }
    cfg.output_dir = detail::get_or<std::string>(j, "output_dir", cfg.output_dir);
    if (j.contains("windows")) {
        const auto& w = j.at("windows");
        cfg.backtest.windows.t_r = detail::get_or<int>(w, "t_r", cfg.backtest.windows.t_r);
        cfg.backtest.windows.t_m = detail::get_or<int>(w, "t_m", cfg.backtest.windows.t_m);
        cfg.backtest.windows.t_h = detail::get_or<int>(w, "t_h", cfg.backtest.windows.t_h);
        cfg.backtest.windows.t_a = detail::get_or<int>(w, "t_a", cfg.backtest.windows.t_a);
    }
    if (j.contains("cost"))
        cfg.backtest.cost.rate =
            detail::get_or<double>(j.at("cost"), "rate", cfg.backtest.cost.rate);
    if (j.contains("covariance"))
        cfg.backtest.estimator = detail::parse_estimator(detail::get_or<std::string>(
            j.at("covariance"), "estimator", "dcc"));
    if (j.contains("learner")) {
        const auto& l = j.at("learner");
        auto& lc = cfg.backtest.learner;
        lc.hyperopt_budget = detail::get_or<int>(l, "hyperopt_budget", lc.hyperopt_budget);
        lc.hyperopt_cadence = detail::get_or<int>(l, "hyperopt_cadence", lc.hyperopt_cadence);
        lc.min_examples = detail::get_or<size_t>(l, "min_examples", lc.min_examples);
        if (l.contains("search_box")) {
            lc.search_box.dims.clear();
            for (const auto& jd : l.at("search_box")) {
                SearchDimension d;
                d.name = jd.at("name").get<std::string>();
                d.lo = jd.at("lo").get<double>();
                d.hi = jd.at("hi").get<double>();
                d.log_scale = detail::get_or<bool>(jd, "log_scale", false);
                d.integer = detail::get_or<bool>(jd, "integer", false);
                lc.search_box.dims.push_back(std::move(d));
            }
        }
    }
    cfg.backtest.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.backtest.seed);
    cfg.density_bucket = detail::get_or<long>(j, "density_bucket", cfg.density_bucket);
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return config_from_json(j);
}

inline bool RunConfig::operator==(const RunConfig& other) const {
    return config_to_json(*this) == config_to_json(other);
}

/// Structural validation, including the at-most-2-shared-tickers rule.
/// Returns human-readable findings; empty means valid.
inline std::vector<std::string> validate_config(const RunConfig& cfg) {
    std::vector<std::string> findings;
    try {
        cfg.backtest.windows.validate();
    } catch (const std::exception& e) {
        findings.push_back(std::string("windows: ") + e.what());
    }
    try {
        cfg.backtest.cost.validate();
    } catch (const std::exception& e) {
        findings.push_back(std::string("cost: ") + e.what());
    }
    if (cfg.backtest.learner.hyperopt_budget < 1)
        findings.push_back("learner: invalid budget");
    if (cfg.data_path.empty()) findings.push_back("data_path: empty");
    for (const auto& u : cfg.universes) {
        if (u.tickers.size() < 2)
            findings.push_back("universe " + std::to_string(u.universe_id) +
                               ": needs at least 2 tickers");
        std::set<std::string> uniq(u.tickers.begin(), u.tickers.end());
        if (uniq.size() != u.tickers.size())
            findings.push_back("universe " + std::to_string(u.universe_id) +
                               ": duplicate tickers");
    }
    for (size_t i = 0; i < cfg.universes.size(); ++i)
        for (size_t k = i + 1; k < cfg.universes.size(); ++k) {
            std::set<std::string> a(cfg.universes[i].tickers.begin(),
                                    cfg.universes[i].tickers.end());
            int shared = 0;
            for (const auto& t : cfg.universes[k].tickers) shared += a.count(t);
            if (shared > 2)
                findings.push_back(
                    "universes " + std::to_string(cfg.universes[i].universe_id) +
                    " and " + std::to_string(cfg.universes[k].universe_id) +
                    " share " + std::to_string(shared) + " tickers (max 2)");
        }
    return findings;
}

/// FNV-1a over the canonical JSON dump; stable across runs and platforms.
inline std::string config_hash(const RunConfig& cfg) {
    std::string s = config_to_json(cfg).dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace metafolio
