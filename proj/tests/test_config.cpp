#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "metafolio/config.hpp"

using namespace metafolio;

namespace {

RunConfig minimal_config() {
    RunConfig cfg;
    cfg.data_path = "prices.csv";
    UniverseSpec u;
    u.universe_id = 1;
    u.tickers = {"AAA", "BBB", "CCC"};
    cfg.universes.push_back(std::move(u));
    return cfg;
}

std::string write_temp_json(const nlohmann::json& j) {
    static int counter = 0;
    std::string path = (std::filesystem::temp_directory_path() /
                        ("metafolio_cfg_" + std::to_string(counter++) + ".json"))
                           .string();
    std::ofstream out(path);
    out << j.dump(2);
    return path;
}

}  // namespace

TEST(Config, RoundTripEquality) {
    RunConfig cfg = minimal_config();
    cfg.output_dir = "results";
    cfg.backtest.windows = {504, 42, 21, 7};
    cfg.backtest.cost.rate = 0.0005;
    cfg.backtest.estimator = CovarianceEstimatorKind::Ewma;
    cfg.backtest.learner.hyperopt_budget = 12;
    cfg.backtest.learner.hyperopt_cadence = 3;
    cfg.backtest.seed = 777;
    cfg.density_bucket = 125;
    RunConfig back = config_from_json(config_to_json(cfg));
    EXPECT_TRUE(cfg == back);
    EXPECT_EQ(back.backtest.windows.t_r, 504);
    EXPECT_EQ(back.backtest.estimator, CovarianceEstimatorKind::Ewma);
    EXPECT_EQ(back.backtest.seed, 777u);
}

TEST(Config, DefaultsApplied) {
    nlohmann::json j;
    j["data_path"] = "p.csv";
    j["universes"] = {{{"tickers", {"A", "B"}}}};
    RunConfig cfg = config_from_json(j);
    EXPECT_EQ(cfg.output_dir, "out");
    EXPECT_EQ(cfg.backtest.windows.t_r, 756);
    EXPECT_EQ(cfg.backtest.windows.t_m, 63);
    EXPECT_EQ(cfg.backtest.windows.t_h, 21);
    EXPECT_EQ(cfg.backtest.windows.t_a, 21);
    EXPECT_DOUBLE_EQ(cfg.backtest.cost.rate, 0.001);
    EXPECT_EQ(cfg.backtest.estimator, CovarianceEstimatorKind::Dcc);
    EXPECT_EQ(cfg.backtest.learner.hyperopt_budget, 25);
    EXPECT_EQ(cfg.backtest.learner.hyperopt_cadence, 6);
    EXPECT_EQ(cfg.backtest.learner.min_examples, 20u);
    EXPECT_EQ(cfg.backtest.seed, 42u);
    EXPECT_EQ(cfg.density_bucket, 250);
    EXPECT_EQ(cfg.universes[0].universe_id, 1);  // auto-assigned
}

TEST(Config, MissingRequiredFields) {
    nlohmann::json no_path;
    no_path["universes"] = {{{"tickers", {"A", "B"}}}};
    EXPECT_THROW(config_from_json(no_path), ConfigError);

    nlohmann::json no_universes;
    no_universes["data_path"] = "p.csv";
    EXPECT_THROW(config_from_json(no_universes), ConfigError);

    no_universes["universes"] = nlohmann::json::array();
    EXPECT_THROW(config_from_json(no_universes), ConfigError);
}

TEST(Config, WrongTypesAndUnknownEstimator) {
    nlohmann::json j;
    j["data_path"] = "p.csv";
    j["universes"] = {{{"tickers", {"A", "B"}}}};
    j["windows"] = {{"t_r", "not a number"}};
    EXPECT_THROW(config_from_json(j), ConfigError);

    j["windows"] = {{"t_r", 756}};
    j["covariance"] = {{"estimator", "garch"}};
    EXPECT_THROW(config_from_json(j), ConfigError);
}

TEST(Config, LoadFromFile) {
    nlohmann::json j;
    j["data_path"] = "p.csv";
    j["universes"] = {{{"id", 3}, {"tickers", {"A", "B", "C"}}}};
    j["seed"] = 9;
    std::string path = write_temp_json(j);
    RunConfig cfg = load_config(path);
    EXPECT_EQ(cfg.universes[0].universe_id, 3);
    EXPECT_EQ(cfg.backtest.seed, 9u);
    std::remove(path.c_str());

    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);

    std::string bad = (std::filesystem::temp_directory_path() / "metafolio_bad.json")
                          .string();
    std::ofstream(bad) << "{not json";
    EXPECT_THROW(load_config(bad), ConfigError);
    std::remove(bad.c_str());
}

TEST(ValidateConfig, CleanConfigHasNoFindings) {
    EXPECT_TRUE(validate_config(minimal_config()).empty());
}

TEST(ValidateConfig, WindowViolations) {
    RunConfig cfg = minimal_config();
    cfg.backtest.windows.t_m = cfg.backtest.windows.t_r + 1;
    auto findings = validate_config(cfg);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_NE(findings[0].find("T_m"), std::string::npos);

    cfg = minimal_config();
    cfg.backtest.windows.t_a = cfg.backtest.windows.t_h + 1;
    EXPECT_EQ(validate_config(cfg).size(), 1u);

    cfg = minimal_config();
    cfg.backtest.windows.t_r = 0;
    EXPECT_EQ(validate_config(cfg).size(), 1u);
}

TEST(ValidateConfig, CostAndBudgetAndDataPath) {
    RunConfig cfg = minimal_config();
    cfg.backtest.cost.rate = -0.001;
    cfg.backtest.learner.hyperopt_budget = 0;
    cfg.data_path.clear();
    auto findings = validate_config(cfg);
    EXPECT_EQ(findings.size(), 3u);
}

TEST(ValidateConfig, UniverseRules) {
    RunConfig cfg = minimal_config();
    cfg.universes[0].tickers = {"AAA"};
    EXPECT_EQ(validate_config(cfg).size(), 1u);

    cfg.universes[0].tickers = {"AAA", "AAA", "BBB"};
    auto findings = validate_config(cfg);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_NE(findings[0].find("duplicate"), std::string::npos);
}

TEST(ValidateConfig, SharedTickerLimit) {
    RunConfig cfg = minimal_config();
    UniverseSpec u2;
    u2.universe_id = 2;
    u2.tickers = {"AAA", "BBB", "DDD"};  // 2 shared: allowed
    cfg.universes.push_back(u2);
    EXPECT_TRUE(validate_config(cfg).empty());

    cfg.universes[1].tickers = {"AAA", "BBB", "CCC", "DDD"};  // 3 shared
    auto findings = validate_config(cfg);
    ASSERT_EQ(findings.size(), 1u);
    EXPECT_NE(findings[0].find("share 3"), std::string::npos);
}

TEST(ConfigHash, StableAndSensitive) {
    RunConfig cfg = minimal_config();
    std::string h1 = config_hash(cfg);
    std::string h2 = config_hash(config_from_json(config_to_json(cfg)));
    EXPECT_EQ(h1, h2);
    cfg.backtest.seed += 1;
    EXPECT_NE(config_hash(cfg), h1);
}
