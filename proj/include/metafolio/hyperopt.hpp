// Sequential hyperparameter search: tree-structured Parzen estimator over
// a fixed box, scored by k-fold cross-validated RMSE.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "metafolio/gbt.hpp"

namespace metafolio {

struct SearchDimension {
    std::string name;
    double lo = 0.0;
    double hi = 1.0;
    bool log_scale = false;
    bool integer = false;
};

/// The hyperparameter search box. Defaults follow standard small-data
/// gradient-boosting ranges.
struct SearchBox {
    std::vector<SearchDimension> dims = {
        {"tree_count", 50, 500, false, true},
        {"max_depth", 2, 6, false, true},
        {"learning_rate", 0.01, 0.3, true, false},
        {"min_samples_leaf", 2, 20, false, true},
        {"row_subsample", 0.5, 1.0, false, false},
        {"col_subsample", 0.5, 1.0, false, false},
        {"l2_reg", 0.0, 10.0, false, false},
    };

    HyperParams decode(const std::vector<double>& x) const {
        HyperParams hp;
        for (size_t i = 0; i < dims.size(); ++i) {
            double v = dims[i].log_scale ? std::exp(x[i]) : x[i];
            if (dims[i].integer) v = std::round(v);
            if (dims[i].name == "tree_count") hp.tree_count = static_cast<int>(v);
            else if (dims[i].name == "max_depth") hp.max_depth = static_cast<int>(v);
            else if (dims[i].name == "learning_rate") hp.learning_rate = v;
            else if (dims[i].name == "min_samples_leaf") hp.min_samples_leaf = static_cast<int>(v);
            else if (dims[i].name == "row_subsample") hp.row_subsample = v;
            else if (dims[i].name == "col_subsample") hp.col_subsample = v;
            else if (dims[i].name == "l2_reg") hp.l2_reg = v;
            else throw std::runtime_error("unknown search dimension: " + dims[i].name);
        }
        return hp;
    }

    // internal (possibly log-transformed) bounds per dimension
    double tlo(size_t i) const { return dims[i].log_scale ? std::log(dims[i].lo) : dims[i].lo; }
    double thi(size_t i) const { return dims[i].log_scale ? std::log(dims[i].hi) : dims[i].hi; }
};

struct HyperoptTrial {
    std::vector<double> x;  // transformed coordinates
    HyperParams params;
    double cv_rmse = 0.0;
};

struct HyperoptResult {
    HyperParams best;
    double best_cv_rmse = 0.0;
    double holdout_rmse = 0.0;  // 30% chronological tail, reporting only
    std::vector<HyperoptTrial> trials;
};

namespace detail {

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
    double ss = 0.0;
    for (size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(ss / static_cast<double>(a.size()));
}

/// Mean RMSE over k contiguous folds (deterministic fold assignment).
inline double cv_rmse(const std::vector<std::vector<double>>& X,
                      const std::vector<double>& y,
                      const std::vector<std::string>& names, const HyperParams& hp,
                      std::uint64_t seed, int folds) {
    const size_t n = X.size();
    double total = 0.0;
    int used = 0;
    for (int f = 0; f < folds; ++f) {
        size_t lo = n * static_cast<size_t>(f) / static_cast<size_t>(folds);
        size_t hi = n * static_cast<size_t>(f + 1) / static_cast<size_t>(folds);
        if (hi <= lo) continue;
        std::vector<std::vector<double>> Xtr, Xva;
        std::vector<double> ytr, yva;
        for (size_t i = 0; i < n; ++i) {
            if (i >= lo && i < hi) {
                Xva.push_back(X[i]);
                yva.push_back(y[i]);
            } else {
                Xtr.push_back(X[i]);
                ytr.push_back(y[i]);
            }
        }
        if (Xtr.size() < 2) continue;
        TreeEnsemble ens = train_gbt(Xtr, ytr, names, hp, seed, 2);
        std::vector<double> pred;
        pred.reserve(Xva.size());
        for (const auto& row : Xva) pred.push_back(ens.predict_row(row));
        total += rmse(pred, yva);
        ++used;
    }
    if (used == 0) throw std::runtime_error("insufficient training data");
    return total / used;
}

/// log-density of a Parzen mixture of clamped Gaussians plus a uniform
/// support component.
inline double parzen_log_density(double v, const std::vector<double>& centers,
                                 double sigma, double lo, double hi) {
    double range = hi - lo;
    double acc = 1.0 / range;  // uniform component, weight 1
    for (double c : centers)
        acc += std::exp(-0.5 * (v - c) * (v - c) / (sigma * sigma)) /
               (sigma * std::sqrt(2.0 * M_PI));
    return std::log(acc / static_cast<double>(centers.size() + 1));
}

}  // namespace detail

/// TPE-style sequential optimization of the CV RMSE on the chronological
/// first 70% of examples; the 30% tail is scored once with the winner for
/// reporting. Deterministic given the seed.
inline HyperoptResult bayes_optimize(const std::vector<std::vector<double>>& X,
                                     const std::vector<double>& y,
                                     const std::vector<std::string>& names,
                                     int budget, std::uint64_t seed,
                                     const SearchBox& box = {}, int folds = 5) {
    if (budget < 1) throw std::runtime_error("invalid budget");
    if (X.size() != y.size() || X.size() < 10)
        throw std::runtime_error("insufficient training data");

    const size_t n_train = std::max<size_t>(5, (X.size() * 7) / 10);
    std::vector<std::vector<double>> Xtr(X.begin(), X.begin() + static_cast<long>(n_train));
    std::vector<double> ytr(y.begin(), y.begin() + static_cast<long>(n_train));

    std::mt19937_64 rng(seed);
    const size_t D = box.dims.size();
    const int n_startup = std::min(10, budget);
    const int n_candidates = 24;
    const double gamma = 0.25;

    auto random_point = [&]() {
        std::vector<double> x(D);
        for (size_t d = 0; d < D; ++d) {
            std::uniform_real_distribution<double> u(box.tlo(d), box.thi(d));
            x[d] = u(rng);
        }
        return x;
    };

    HyperoptResult result;
    for (int t = 0; t < budget; ++t) {
        std::vector<double> x;
        if (t < n_startup || result.trials.size() < 4) {
            x = random_point();
        } else {
            // split observed trials into good/bad by CV score
            std::vector<size_t> order(result.trials.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
                return result.trials[a].cv_rmse < result.trials[b].cv_rmse;
            });
            size_t n_good = std::max<size_t>(
                2, static_cast<size_t>(std::ceil(gamma * static_cast<double>(order.size()))));
            std::vector<std::vector<double>> good_centers(D), bad_centers(D);
            for (size_t i = 0; i < order.size(); ++i) {
                auto& dest = i < n_good ? good_centers : bad_centers;
                for (size_t d = 0; d < D; ++d)
                    dest[d].push_back(result.trials[order[i]].x[d]);
            }

            double best_score = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < n_candidates; ++c) {
                std::vector<double> cand(D);
                double score = 0.0;
                for (size_t d = 0; d < D; ++d) {
                    double range = box.thi(d) - box.tlo(d);
                    double sigma = std::max(1e-9 * (1.0 + std::abs(range)),
                                            range * 0.2 /
                                                std::pow(static_cast<double>(n_good), 0.25));
                    std::uniform_int_distribution<size_t> pick(0, good_centers[d].size() - 1);
                    std::normal_distribution<double> g(good_centers[d][pick(rng)], sigma);
                    double v = std::clamp(g(rng), box.tlo(d), box.thi(d));
                    cand[d] = v;
                    score += detail::parzen_log_density(v, good_centers[d], sigma,
                                                        box.tlo(d), box.thi(d)) -
                             detail::parzen_log_density(v, bad_centers[d], sigma,
                                                        box.tlo(d), box.thi(d));
                }
                if (score > best_score) {
                    best_score = score;
                    x = std::move(cand);
                }
            }
            // a fully collapsed box makes every candidate score NaN
            if (x.empty()) x = random_point();
        }

        HyperoptTrial trial;
        trial.x = x;
        trial.params = box.decode(x);
        trial.cv_rmse = detail::cv_rmse(Xtr, ytr, names, trial.params, seed, folds);
        result.trials.push_back(std::move(trial));
    }

    size_t best = 0;
    for (size_t i = 1; i < result.trials.size(); ++i)
        if (result.trials[i].cv_rmse < result.trials[best].cv_rmse) best = i;
    result.best = result.trials[best].params;
    result.best_cv_rmse = result.trials[best].cv_rmse;

    // holdout tail, never used for selection
    if (n_train < X.size()) {
        TreeEnsemble ens = train_gbt(Xtr, ytr, names, result.best, seed, 2);
        std::vector<double> pred, truth;
        for (size_t i = n_train; i < X.size(); ++i) {
            pred.push_back(ens.predict_row(X[i]));
            truth.push_back(y[i]);
        }
        result.holdout_rmse = detail::rmse(pred, truth);
    }
    return result;
}

}  // namespace metafolio
