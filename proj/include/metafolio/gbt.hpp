// Gradient-boosted regression trees with squared-error loss, L2 leaf
// regularization, gain-based importances and deterministic tie-breaking.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace metafolio {

struct HyperParams {
    int tree_count = 200;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 2;
    double row_subsample = 1.0;
    double col_subsample = 1.0;
    double l2_reg = 1.0;
};

struct TreeNode {
    bool is_leaf = true;
    int feature = -1;        // index into the canonical feature name list
    double threshold = 0.0;  // go left if x[feature] < threshold
    double gain = 0.0;
    double leaf_value = 0.0;
    int left = -1;
    int right = -1;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double predict(const std::vector<double>& x) const {
        int i = 0;
        while (!nodes[static_cast<size_t>(i)].is_leaf) {
            const TreeNode& n = nodes[static_cast<size_t>(i)];
            i = x[static_cast<size_t>(n.feature)] < n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<size_t>(i)].leaf_value;
    }
};

/// Additive model: prediction = base + lr * sum of tree outputs.
struct TreeEnsemble {
    std::vector<std::string> feature_names;  // canonical order used at fit time
    std::vector<RegressionTree> trees;
    double learning_rate = 0.1;
    double base_prediction = 0.0;

    double predict_row(const std::vector<double>& x) const {
        double p = base_prediction;
        for (const auto& t : trees) p += learning_rate * t.predict(x);
        return p;
    }
};

namespace detail {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

inline double leaf_score(double g, double h, double l2) { return g * g / (h + l2); }

/// Greedy best split over the given feature subset. Gain ties break on the
/// lowest feature index (features are in canonical alphabetical order),
/// then the lowest threshold.
inline SplitChoice best_split(const std::vector<std::vector<double>>& X,
                              const std::vector<double>& grad,
                              const std::vector<int>& rows,
                              const std::vector<int>& features,
                              const HyperParams& hp) {
    SplitChoice best;
    double g_total = 0.0;
    for (int r : rows) g_total += grad[static_cast<size_t>(r)];
    double h_total = static_cast<double>(rows.size());
    double parent = leaf_score(g_total, h_total, hp.l2_reg);

    std::vector<std::pair<double, double>> vals;  // (feature value, gradient)
    for (int f : features) {
        vals.clear();
        for (int r : rows)
            vals.emplace_back(X[static_cast<size_t>(r)][static_cast<size_t>(f)],
                              grad[static_cast<size_t>(r)]);
        std::sort(vals.begin(), vals.end());

        double g_left = 0.0;
        for (size_t i = 0; i + 1 < vals.size(); ++i) {
            g_left += vals[i].second;
            if (vals[i].first == vals[i + 1].first) continue;
            size_t n_left = i + 1, n_right = vals.size() - n_left;
            if (n_left < static_cast<size_t>(hp.min_samples_leaf) ||
                n_right < static_cast<size_t>(hp.min_samples_leaf))
                continue;
            double gain = leaf_score(g_left, static_cast<double>(n_left), hp.l2_reg) +
                          leaf_score(g_total - g_left, static_cast<double>(n_right),
                                     hp.l2_reg) -
                          parent;
            if (gain > best.gain + 1e-12) {
                best.found = true;
                best.feature = f;
                best.threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                best.gain = gain;
            }
        }
    }
    return best;
}

inline int grow_tree(RegressionTree& tree, const std::vector<std::vector<double>>& X,
                     const std::vector<double>& grad, std::vector<int> rows,
                     const std::vector<int>& features, const HyperParams& hp,
                     int depth) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();

    double g = 0.0;
    for (int r : rows) g += grad[static_cast<size_t>(r)];
    double value = g / (static_cast<double>(rows.size()) + hp.l2_reg);

    SplitChoice split;
    if (depth < hp.max_depth &&
        rows.size() >= 2 * static_cast<size_t>(hp.min_samples_leaf))
        split = best_split(X, grad, rows, features, hp);

    if (!split.found) {
        tree.nodes[static_cast<size_t>(id)].leaf_value = value;
        return id;
    }

    std::vector<int> left_rows, right_rows;
    for (int r : rows) {
        if (X[static_cast<size_t>(r)][static_cast<size_t>(split.feature)] <
            split.threshold)
            left_rows.push_back(r);
        else
            right_rows.push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();

    int left = grow_tree(tree, X, grad, std::move(left_rows), features, hp, depth + 1);
    int right = grow_tree(tree, X, grad, std::move(right_rows), features, hp, depth + 1);
    TreeNode& n = tree.nodes[static_cast<size_t>(id)];
    n.is_leaf = false;
    n.feature = split.feature;
    n.threshold = split.threshold;
    n.gain = split.gain;
    n.left = left;
    n.right = right;
    return id;
}

/// Deterministic sample of floor(frac * n) indices without replacement.
inline std::vector<int> subsample_indices(int n, double frac, std::mt19937_64& rng) {
    std::vector<int> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (frac >= 1.0) return idx;
    int keep = std::max(1, static_cast<int>(std::floor(frac * n)));
    for (int i = 0; i < keep; ++i) {
        std::uniform_int_distribution<int> u(i, n - 1);
        std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(u(rng))]);
    }
    idx.resize(static_cast<size_t>(keep));
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace detail

/// Fit a boosted ensemble on rows X (features in canonical column order)
/// against targets y. Deterministic given (X, y, params, seed).
inline TreeEnsemble train_gbt(const std::vector<std::vector<double>>& X,
                              const std::vector<double>& y,
                              const std::vector<std::string>& feature_names,
                              const HyperParams& params, std::uint64_t seed,
                              size_t min_examples = 20) {
    if (X.size() < min_examples) throw std::runtime_error("insufficient training data");
    if (X.size() != y.size()) throw std::runtime_error("feature mismatch");

    TreeEnsemble ens;
    ens.feature_names = feature_names;
    ens.learning_rate = params.learning_rate;
    ens.base_prediction = std::accumulate(y.begin(), y.end(), 0.0) /
                          static_cast<double>(y.size());

    std::vector<double> pred(y.size(), ens.base_prediction);
    std::mt19937_64 rng(seed);

    for (int t = 0; t < params.tree_count; ++t) {
        std::vector<double> grad(y.size());
        for (size_t i = 0; i < y.size(); ++i) grad[i] = y[i] - pred[i];

        std::vector<int> rows = detail::subsample_indices(
            static_cast<int>(X.size()), params.row_subsample, rng);
        std::vector<int> cols = detail::subsample_indices(
            static_cast<int>(feature_names.size()), params.col_subsample, rng);

        RegressionTree tree;
        detail::grow_tree(tree, X, grad, std::move(rows), cols, params, 0);
        for (size_t i = 0; i < y.size(); ++i)
            pred[i] += params.learning_rate * tree.predict(X[i]);
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

/// Total split gain per feature, normalized to sum to 1. An ensemble with
/// no splits yields all zeros.
inline std::map<std::string, double> feature_importance(const TreeEnsemble& ensemble) {
    std::map<std::string, double> imp;
    for (const auto& name : ensemble.feature_names) imp[name] = 0.0;
    double total = 0.0;
    for (const auto& tree : ensemble.trees)
        for (const auto& node : tree.nodes)
            if (!node.is_leaf) {
                imp[ensemble.feature_names[static_cast<size_t>(node.feature)]] +=
                    node.gain;
                total += node.gain;
            }
    if (total > 0.0)
        for (auto& [name, v] : imp) v /= total;
    return imp;
}

inline nlohmann::json ensemble_to_json(const TreeEnsemble& ens) {
    nlohmann::json j;
    j["feature_names"] = ens.feature_names;
    j["learning_rate"] = ens.learning_rate;
    j["base_prediction"] = ens.base_prediction;
    j["trees"] = nlohmann::json::array();
    for (const auto& tree : ens.trees) {
        nlohmann::json jt = nlohmann::json::array();
        for (const auto& n : tree.nodes)
            jt.push_back({{"leaf", n.is_leaf},
                          {"feature", n.feature},
                          {"threshold", n.threshold},
                          {"gain", n.gain},
                          {"value", n.leaf_value},
                          {"left", n.left},
                          {"right", n.right}});
        j["trees"].push_back(std::move(jt));
    }
    return j;
}

inline TreeEnsemble ensemble_from_json(const nlohmann::json& j) {
    TreeEnsemble ens;
    ens.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    ens.learning_rate = j.at("learning_rate").get<double>();
    ens.base_prediction = j.at("base_prediction").get<double>();
    for (const auto& jt : j.at("trees")) {
        RegressionTree tree;
        for (const auto& jn : jt) {
            TreeNode n;
            n.is_leaf = jn.at("leaf").get<bool>();
            n.feature = jn.at("feature").get<int>();
            n.threshold = jn.at("threshold").get<double>();
            n.gain = jn.at("gain").get<double>();
            n.leaf_value = jn.at("value").get<double>();
            n.left = jn.at("left").get<int>();
            n.right = jn.at("right").get<int>();
            tree.nodes.push_back(n);
        }
        ens.trees.push_back(std::move(tree));
    }
    return ens;
}

}  // namespace metafolio
