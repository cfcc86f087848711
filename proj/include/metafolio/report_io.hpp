// Report serialization: report.json plus the CSV side files
// (wealth, features, importances, density).
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "metafolio/backtest.hpp"
#include "metafolio/config.hpp"

namespace metafolio {

inline nlohmann::json report_to_json(const BacktestReport& r) {
    nlohmann::json j;
    j["universe_id"] = r.universe_id;
    j["assets"] = r.assets;
    auto metrics = [](const StrategyMetrics& m) {
        return nlohmann::json{{"sharpe", m.sharpe},
                              {"cumulative_return", m.cumulative_return},
                              {"max_drawdown", m.max_drawdown},
                              {"realized_vol", m.realized_vol}};
    };
    j["metrics"] = {{"hrp", metrics(r.hrp_metrics)},
                    {"nrp", metrics(r.nrp_metrics)},
                    {"mpm", metrics(r.mpm_metrics)}};
    j["mpm_turnover"] = r.mpm_turnover;
    j["mpm_cost_drag"] = r.mpm_cost_drag;
    j["decisions"] = nlohmann::json::array();
    for (const auto& d : r.decisions) {
        nlohmann::json jd;
        jd["as_of"] = d.as_of.to_string();
        jd["predicted_spread"] = d.predicted_spread;
        jd["choice"] = d.choice == StrategyChoice::HRP ? "HRP" : "NRP";
        jd["cold_start"] = d.cold_start;
        jd["covariance_fallback"] = d.covariance_fallback;
        if (std::isnan(d.realized_target))
            jd["realized_target"] = nullptr;
        else
            jd["realized_target"] = d.realized_target;
        jd["hrp_weights"] = std::vector<double>(
            d.hrp_weights.weights.data(),
            d.hrp_weights.weights.data() + d.hrp_weights.weights.size());
        jd["nrp_weights"] = std::vector<double>(
            d.nrp_weights.weights.data(),
            d.nrp_weights.weights.data() + d.nrp_weights.weights.size());
        j["decisions"].push_back(std::move(jd));
    }
    j["log"] = r.log;
    return j;
}

struct RunArtifacts {
    std::vector<BacktestReport> reports;
    SignificanceSummary significance;
    std::vector<std::vector<std::pair<StrategyChoice, DensitySurface>>> densities;
};

inline void write_report_json(const RunArtifacts& art, const RunConfig& cfg,
                              const std::string& path) {
    nlohmann::json j;
    j["artifact_version"] = "1.0.0";
    j["seed"] = cfg.backtest.seed;
    j["config_hash"] = config_hash(cfg);
    j["config"] = config_to_json(cfg);
    j["universes"] = nlohmann::json::array();
    for (const auto& r : art.reports) j["universes"].push_back(report_to_json(r));
    j["significance"] = nlohmann::json::array();
    for (const auto& c : art.significance.comparisons)
        j["significance"].push_back({{"name", c.name},
                                     {"mean_delta", c.mean_delta},
                                     {"t_statistic", c.t_statistic},
                                     {"p_value", c.p_value},
                                     {"deltas", c.deltas}});
    std::ofstream out(path, std::ios::binary);
    out << j.dump(2) << '\n';
}

inline void write_wealth_csv(const std::vector<BacktestReport>& reports,
                             const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    out.precision(17);
    out << "universe,date,hrp,nrp,mpm\n";
    for (const auto& r : reports)
        for (size_t i = 0; i < r.dates.size(); ++i)
            out << r.universe_id << ',' << r.dates[i].to_string() << ','
                << r.hrp_wealth[i + 1] << ',' << r.nrp_wealth[i + 1] << ','
                << r.mpm_wealth[i + 1] << '\n';
}

inline void write_features_csv(const std::vector<BacktestReport>& reports,
                               const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    out.precision(17);
    out << "universe,date";
    for (const auto& n : FeatureVector::canonical_names()) out << ',' << n;
    out << '\n';
    for (const auto& r : reports)
        for (const auto& d : r.decisions) {
            out << r.universe_id << ',' << d.as_of.to_string();
            for (double v : d.features.ordered_values()) out << ',' << v;
            out << '\n';
        }
}

inline void write_importances_csv(const std::vector<BacktestReport>& reports,
                                  const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    out.precision(17);
    out << "universe,training_index";
    for (const auto& n : FeatureVector::canonical_names()) out << ',' << n;
    out << '\n';
    for (const auto& r : reports) {
        int idx = 0;
        for (const auto& imp : r.importance_history) {
            out << r.universe_id << ',' << idx++;
            for (const auto& n : FeatureVector::canonical_names())
                out << ',' << (imp.count(n) ? imp.at(n) : 0.0);
            out << '\n';
        }
    }
}

inline void write_density_csv(const RunArtifacts& art, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    out.precision(17);
    out << "universe,strategy,bucket,return_bin,density\n";
    for (size_t u = 0; u < art.densities.size(); ++u) {
        int uid = art.reports[u].universe_id;
        for (const auto& [choice, surf] : art.densities[u]) {
            const char* name = choice == StrategyChoice::HRP ? "hrp" : "nrp";
            for (size_t b = 0; b < surf.buckets.size(); ++b)
                for (size_t g = 0; g < surf.grid.size(); ++g)
                    out << uid << ',' << name << ',' << b << ',' << surf.grid[g]
                        << ',' << surf.buckets[b][g] << '\n';
        }
    }
}

inline void write_all_outputs(const RunArtifacts& art, const RunConfig& cfg,
                              const std::string& dir) {
    std::filesystem::create_directories(dir);
    write_report_json(art, cfg, dir + "/report.json");
    write_wealth_csv(art.reports, dir + "/wealth.csv");
    write_features_csv(art.reports, dir + "/features.csv");
    write_importances_csv(art.reports, dir + "/importances.csv");
    write_density_csv(art, dir + "/density.csv");
}

}  // namespace metafolio
