#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "metafolio/market_data.hpp"

using namespace metafolio;

namespace {

std::string write_temp_csv(const std::string& body) {
    static int counter = 0;
    std::string path = (std::filesystem::temp_directory_path() /
                        ("metafolio_md_" + std::to_string(counter++) + ".csv"))
                           .string();
    std::ofstream out(path);
    out << body;
    return path;
}

}  // namespace

TEST(LoadPrices, AllPresent) {
    auto path = write_temp_csv(
        "date,ticker,price\n"
        "2020-01-01,AAA,100\n2020-01-02,AAA,101\n2020-01-03,AAA,102\n"
        "2020-01-01,BBB,50\n2020-01-02,BBB,51\n2020-01-03,BBB,52\n");
    PricePanel p = load_prices(path, {"AAA", "BBB"});
    EXPECT_EQ(p.rows(), 3);
    EXPECT_EQ(p.cols(), 2);
    EXPECT_DOUBLE_EQ(p.prices(1, 1), 51.0);
    std::remove(path.c_str());
}

TEST(LoadPrices, IntersectionDropsMissingDate) {
    auto path = write_temp_csv(
        "date,ticker,price\n"
        "2020-01-01,AAA,100\n2020-01-02,AAA,101\n2020-01-03,AAA,102\n"
        "2020-01-01,BBB,50\n2020-01-03,BBB,52\n");
    PricePanel p = load_prices(path, {"AAA", "BBB"});
    EXPECT_EQ(p.rows(), 2);
    EXPECT_EQ(p.dates[1], Date::parse("2020-01-03"));
    std::remove(path.c_str());
}

TEST(LoadPrices, UnknownAsset) {
    auto path = write_temp_csv("date,ticker,price\n2020-01-01,AAA,100\n");
    try {
        load_prices(path, {"ZZZ"});
        FAIL() << "expected error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("unknown asset"), std::string::npos);
    }
    std::remove(path.c_str());
}

TEST(LoadPrices, NoOverlappingDates) {
    auto path = write_temp_csv(
        "date,ticker,price\n2020-01-01,AAA,100\n2020-01-02,BBB,50\n");
    EXPECT_THROW(load_prices(path, {"AAA", "BBB"}), std::runtime_error);
    std::remove(path.c_str());
}

TEST(LoadPrices, NonPositivePriceRejected) {
    auto path = write_temp_csv("date,ticker,price\n2020-01-01,AAA,-3\n");
    try {
        load_prices(path, {"AAA"});
        FAIL() << "expected error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("invalid price"), std::string::npos);
    }
    std::remove(path.c_str());
}

TEST(LoadPrices, DuplicateRowRejected) {
    auto path = write_temp_csv(
        "date,ticker,price\n2020-01-01,AAA,100\n2020-01-01,AAA,101\n");
    EXPECT_THROW(load_prices(path, {"AAA"}), std::runtime_error);
    std::remove(path.c_str());
}

TEST(LoadPrices, RoundTripIsIdempotent) {
    auto path = write_temp_csv(
        "date,ticker,price\n"
        "2020-01-01,AAA,100.125\n2020-01-02,AAA,101.0625\n"
        "2020-01-01,BBB,50.5\n2020-01-02,BBB,51.375\n");
    PricePanel p1 = load_prices(path, {"AAA", "BBB"});
    std::ostringstream emitted;
    write_prices_csv(p1, emitted);
    auto path2 = write_temp_csv(emitted.str());
    PricePanel p2 = load_prices(path2, {"AAA", "BBB"});
    ASSERT_EQ(p1.rows(), p2.rows());
    EXPECT_TRUE((p1.prices.array() == p2.prices.array()).all());
    EXPECT_EQ(p1.dates, p2.dates);
    std::remove(path.c_str());
    std::remove(path2.c_str());
}

TEST(ComputeReturns, DirectRatio) {
    PricePanel p;
    p.assets = {"A"};
    p.dates = {Date{2020, 1, 1}, Date{2020, 1, 2}};
    p.prices.resize(2, 1);
    p.prices << 100, 110;
    ReturnPanel r = compute_returns(p);
    ASSERT_EQ(r.rows(), 1);
    EXPECT_NEAR(r.returns(0, 0), 0.10, 1e-15);
}

TEST(ComputeReturns, ConstantPrice) {
    PricePanel p;
    p.assets = {"A"};
    p.dates = {Date{2020, 1, 1}, Date{2020, 1, 2}, Date{2020, 1, 3}};
    p.prices.resize(3, 1);
    p.prices << 100, 100, 100;
    ReturnPanel r = compute_returns(p);
    EXPECT_DOUBLE_EQ(r.returns(0, 0), 0.0);
    EXPECT_DOUBLE_EQ(r.returns(1, 0), 0.0);
}

TEST(ComputeReturns, HandEvaluated) {
    PricePanel p;
    p.assets = {"A"};
    p.dates = {Date{2020, 1, 1}, Date{2020, 1, 2}, Date{2020, 1, 3}};
    p.prices.resize(3, 1);
    p.prices << 100, 80, 100;
    ReturnPanel r = compute_returns(p);
    EXPECT_NEAR(r.returns(0, 0), -0.20, 1e-15);
    EXPECT_NEAR(r.returns(1, 0), 0.25, 1e-15);
}

TEST(ComputeReturns, InsufficientHistory) {
    PricePanel p;
    p.assets = {"A"};
    p.dates = {Date{2020, 1, 1}};
    p.prices.resize(1, 1);
    p.prices << 100;
    EXPECT_THROW(compute_returns(p), std::runtime_error);
}

// compounding recovers terminal/initial price ratio
TEST(ComputeReturns, CompoundingRecoversPriceRatio) {
    std::mt19937_64 rng(7);
    std::lognormal_distribution<double> ln(0.0, 0.02);
    PricePanel p;
    p.assets = {"A", "B", "C"};
    const int T = 300;
    p.prices.resize(T, 3);
    Date d{2015, 1, 1};
    for (int t = 0; t < T; ++t) {
        p.dates.push_back(d);
        d = d.next();
        for (int n = 0; n < 3; ++n)
            p.prices(t, n) = t == 0 ? 100.0 : p.prices(t - 1, n) * ln(rng);
    }
    ReturnPanel r = compute_returns(p);
    for (int n = 0; n < 3; ++n) {
        double wealth = 1.0;
        for (long t = 0; t < r.rows(); ++t) wealth *= 1.0 + r.returns(t, n);
        double ratio = p.prices(T - 1, n) / p.prices(0, n);
        EXPECT_NEAR(wealth, ratio, 1e-12 * std::abs(ratio));
    }
}

TEST(PortfolioReturns, SymmetryAndSingleAsset) {
    WeightVector w5050{{"A", "B"}, Eigen::Vector2d(0.5, 0.5)};
    EXPECT_DOUBLE_EQ(
        portfolio_return(w5050, {"A", "B"}, Eigen::Vector2d(0.02, -0.02)), 0.0);
    WeightVector w10{{"A", "B"}, Eigen::Vector2d(1.0, 0.0)};
    EXPECT_DOUBLE_EQ(
        portfolio_return(w10, {"A", "B"}, Eigen::Vector2d(0.03, 0.99)), 0.03);
}

TEST(PortfolioReturns, HandEvaluated) {
    WeightVector w{{"A", "B"}, Eigen::Vector2d(0.8, 0.2)};
    EXPECT_NEAR(portfolio_return(w, {"A", "B"}, Eigen::Vector2d(0.01, 0.05)), 0.018,
                1e-15);
}

TEST(PortfolioReturns, AssetMismatch) {
    WeightVector w{{"A", "C"}, Eigen::Vector2d(0.5, 0.5)};
    EXPECT_THROW(portfolio_return(w, {"A", "B"}, Eigen::Vector2d(0.0, 0.0)),
                 std::runtime_error);
}

// linearity in weights
TEST(PortfolioReturns, LinearInWeights) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-0.05, 0.05);
    for (int trial = 0; trial < 50; ++trial) {
        Eigen::Vector3d r(u(rng), u(rng), u(rng));
        Eigen::Vector3d w1(0.2, 0.3, 0.5), w2(0.6, 0.1, 0.3);
        double alpha = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        WeightVector wv1{{"A", "B", "C"}, w1}, wv2{{"A", "B", "C"}, w2};
        WeightVector mix{{"A", "B", "C"}, alpha * w1 + (1 - alpha) * w2};
        double lhs = portfolio_return(mix, {"A", "B", "C"}, r);
        double rhs = alpha * portfolio_return(wv1, {"A", "B", "C"}, r) +
                     (1 - alpha) * portfolio_return(wv2, {"A", "B", "C"}, r);
        EXPECT_NEAR(lhs, rhs, 1e-14);
    }
}
