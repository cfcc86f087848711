// Strategy-selection learner: Sharpe-spread targets, boosted-tree
// regression and the sign decision rule.
#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "metafolio/dates.hpp"
#include "metafolio/features.hpp"
#include "metafolio/gbt.hpp"
#include "metafolio/hyperopt.hpp"
#include "metafolio/stats.hpp"

namespace metafolio {

struct TrainingExample {
    FeatureVector features;
    double target = 0.0;  // realized Sharpe spread over the following T_h window
    Date as_of;
};

enum class StrategyChoice { HRP, NRP };

struct StrategyDecision {
    Date as_of;
    double predicted_spread = 0.0;
    StrategyChoice choice = StrategyChoice::HRP;
};

/// Annualized Sharpe with zero risk-free rate:
/// (mean daily return / sample std) * sqrt(252).
inline double realized_sharpe(std::span<const double> returns) {
    if (returns.size() < 2) throw std::runtime_error("insufficient history");
    double sd = stats::sample_std(returns);
    if (sd <= 0.0) throw std::runtime_error("degenerate sharpe");
    return stats::mean(returns) / sd * std::sqrt(252.0);
}

/// Regression target: SR_HRP - SR_NRP over the holding window.
inline double make_target(std::span<const double> hrp_returns,
                          std::span<const double> nrp_returns) {
    if (hrp_returns.size() != nrp_returns.size())
        throw std::runtime_error("insufficient history");
    return realized_sharpe(hrp_returns) - realized_sharpe(nrp_returns);
}

/// The sign rule: HRP iff the predicted spread is >= 0.
inline StrategyDecision decide(double predicted_spread, const Date& as_of) {
    if (!std::isfinite(predicted_spread))
        throw std::runtime_error("invalid prediction");
    StrategyDecision d;
    d.as_of = as_of;
    d.predicted_spread = predicted_spread;
    d.choice = std::signbit(predicted_spread) ? StrategyChoice::NRP : StrategyChoice::HRP;
    // signbit(-0.0) is true but the rule is on the value: -0.0 >= 0
    if (predicted_spread == 0.0) d.choice = StrategyChoice::HRP;
    return d;
}

inline std::vector<std::vector<double>> feature_matrix(
    const std::vector<TrainingExample>& data) {
    std::vector<std::vector<double>> X;
    X.reserve(data.size());
    for (const auto& ex : data) X.push_back(ex.features.ordered_values());
    return X;
}

inline std::vector<double> target_vector(const std::vector<TrainingExample>& data) {
    std::vector<double> y;
    y.reserve(data.size());
    for (const auto& ex : data) {
        if (!std::isfinite(ex.target)) throw std::runtime_error("invalid target");
        y.push_back(ex.target);
    }
    return y;
}

/// Fit the spread regressor on past examples. Requires at least 20.
inline TreeEnsemble train_gbt(const std::vector<TrainingExample>& data,
                              const HyperParams& params, std::uint64_t seed) {
    if (data.size() < 20) throw std::runtime_error("insufficient training data");
    return train_gbt(feature_matrix(data), target_vector(data),
                     FeatureVector::canonical_names(), params, seed, 20);
}

inline double predict(const TreeEnsemble& ensemble, const FeatureVector& features) {
    if (ensemble.feature_names != FeatureVector::canonical_names())
        throw std::runtime_error("feature mismatch");
    return ensemble.predict_row(features.ordered_values());
}

inline HyperoptResult bayes_optimize(const std::vector<TrainingExample>& data,
                                     int budget, std::uint64_t seed,
                                     const SearchBox& box = {}, int folds = 5) {
    return bayes_optimize(feature_matrix(data), target_vector(data),
                          FeatureVector::canonical_names(), budget, seed, box, folds);
}

}  // namespace metafolio
