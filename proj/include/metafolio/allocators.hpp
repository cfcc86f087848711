// NRP and HRP portfolio construction: inverse-variance weighting,
// correlation-distance clustering, quasi-diagonalization and recursive
// bisection.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "metafolio/covariance.hpp"
#include "metafolio/market_data.hpp"

namespace metafolio {

/// Pairwise correlation distances d = sqrt((1 - rho) / 2), in [0, 1].
struct DistanceMatrix {
    Eigen::MatrixXd d;
};

struct MergeRecord {
    int left = 0;    // node id: leaves 0..N-1, internal N..2N-2
    int right = 0;
    double height = 0.0;
    int size = 0;    // leaves under the merged node
};

/// Single-linkage hierarchy over assets plus the leaf order it induces.
struct ClusterTree {
    std::vector<MergeRecord> merges;  // N-1 records, heights non-decreasing
    std::vector<int> leaf_order;
};

namespace detail {

constexpr double kVarianceFloor = 1e-12;

inline void check_variances(const Eigen::VectorXd& variances) {
    for (long i = 0; i < variances.size(); ++i)
        if (!(variances[i] > kVarianceFloor))
            throw std::runtime_error("degenerate variance");
}

}  // namespace detail

/// Naive risk parity: w_i proportional to 1 / sigma_i^2.
inline WeightVector nrp_weights(const CovarianceEstimate& estimate,
                                const std::vector<std::string>& assets = {}) {
    detail::check_variances(estimate.variances);
    Eigen::VectorXd inv = estimate.variances.cwiseInverse();
    WeightVector w;
    w.assets = assets.empty()
                   ? std::vector<std::string>(static_cast<size_t>(estimate.size()), "")
                   : assets;
    w.weights = inv / inv.sum();
    return w;
}

/// Elementwise d = sqrt((1 - rho) / 2); rounding below zero clips at zero.
inline DistanceMatrix correlation_to_distance(const Eigen::MatrixXd& correlation) {
    const long N = correlation.rows();
    DistanceMatrix out;
    out.d.resize(N, N);
    for (long i = 0; i < N; ++i) {
        for (long j = 0; j < N; ++j) {
            double rho = correlation(i, j);
            if (rho > 1.0 + 1e-8 || rho < -1.0 - 1e-8)
                throw std::runtime_error("invalid correlation");
            rho = std::clamp(rho, -1.0, 1.0);
            out.d(i, j) = std::sqrt(std::max(0.0, 0.5 * (1.0 - rho)));
        }
        out.d(i, i) = 0.0;
    }
    return out;
}

/// Euclidean distance between columns of d: how similarly two assets relate
/// to the whole universe.
inline Eigen::MatrixXd augmented_distance(const DistanceMatrix& dist) {
    const long N = dist.d.rows();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(N, N);
    for (long i = 0; i < N; ++i)
        for (long j = i + 1; j < N; ++j) {
            double v = (dist.d.col(i) - dist.d.col(j)).norm();
            out(i, j) = v;
            out(j, i) = v;
        }
    return out;
}

/// Agglomerative single-linkage clustering. Ties break on the lowest
/// (i, j) pair of cluster ids for determinism.
inline ClusterTree tree_cluster(const Eigen::MatrixXd& d_aug) {
    const long N = d_aug.rows();
    if (N < 2) throw std::runtime_error("insufficient assets");

    struct Active {
        int node;  // current node id
        std::vector<int> leaves;
    };
    std::vector<Active> clusters;
    clusters.reserve(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) clusters.push_back({i, {i}});

    // single linkage: distance between clusters = min over member pairs
    Eigen::MatrixXd dist = d_aug;
    std::vector<std::vector<int>> members(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) members[static_cast<size_t>(i)] = {i};
    std::vector<int> node_id(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) node_id[static_cast<size_t>(i)] = i;
    std::vector<bool> alive(static_cast<size_t>(N), true);

    // content-based orientation key: child order in each merge record is
    // decided by the smallest leaf row-sum, so relabeling the assets
    // permutes the output rather than changing the hierarchy traversal
    Eigen::VectorXd leaf_key = d_aug.rowwise().sum();
    std::vector<double> min_key(static_cast<size_t>(N));
    std::vector<int> min_leaf(static_cast<size_t>(N));
    for (int i = 0; i < N; ++i) {
        min_key[static_cast<size_t>(i)] = leaf_key[i];
        min_leaf[static_cast<size_t>(i)] = i;
    }

    ClusterTree tree;
    int next_id = static_cast<int>(N);
    for (int step = 0; step < N - 1; ++step) {
        long bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (long i = 0; i < N; ++i) {
            if (!alive[static_cast<size_t>(i)]) continue;
            for (long j = i + 1; j < N; ++j) {
                if (!alive[static_cast<size_t>(j)]) continue;
                if (dist(i, j) < best) {
                    best = dist(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        bool i_first =
            min_key[static_cast<size_t>(bi)] < min_key[static_cast<size_t>(bj)] ||
            (min_key[static_cast<size_t>(bi)] == min_key[static_cast<size_t>(bj)] &&
             min_leaf[static_cast<size_t>(bi)] < min_leaf[static_cast<size_t>(bj)]);
        MergeRecord rec;
        rec.left = node_id[static_cast<size_t>(i_first ? bi : bj)];
        rec.right = node_id[static_cast<size_t>(i_first ? bj : bi)];
        rec.height = best;
        rec.size = static_cast<int>(members[static_cast<size_t>(bi)].size() +
                                    members[static_cast<size_t>(bj)].size());
        tree.merges.push_back(rec);

        // merge j into i
        auto& mi = members[static_cast<size_t>(bi)];
        auto& mj = members[static_cast<size_t>(bj)];
        mi.insert(mi.end(), mj.begin(), mj.end());
        alive[static_cast<size_t>(bj)] = false;
        node_id[static_cast<size_t>(bi)] = next_id++;
        min_key[static_cast<size_t>(bi)] = std::min(min_key[static_cast<size_t>(bi)],
                                                    min_key[static_cast<size_t>(bj)]);
        min_leaf[static_cast<size_t>(bi)] = std::min(
            min_leaf[static_cast<size_t>(bi)], min_leaf[static_cast<size_t>(bj)]);
        for (long k = 0; k < N; ++k) {
            if (!alive[static_cast<size_t>(k)] || k == bi) continue;
            double m = std::min(dist(bi, k), dist(bj, k));
            dist(bi, k) = m;
            dist(k, bi) = m;
        }
    }

    // expand merge records depth-first to get the leaf order
    std::vector<std::vector<int>> expansion;
    expansion.reserve(tree.merges.size());
    auto expand = [&](int node) -> const std::vector<int>& {
        return expansion[static_cast<size_t>(node - N)];
    };
    for (const auto& rec : tree.merges) {
        std::vector<int> order;
        if (rec.left < N)
            order.push_back(rec.left);
        else
            order = expand(rec.left);
        if (rec.right < N)
            order.push_back(rec.right);
        else {
            const auto& r = expand(rec.right);
            order.insert(order.end(), r.begin(), r.end());
        }
        expansion.push_back(std::move(order));
    }
    tree.leaf_order = expansion.back();
    return tree;
}

/// Leaf order of the tree: applying it to the correlation matrix places
/// merged clusters in contiguous blocks.
inline std::vector<int> quasi_diagonalize(const ClusterTree& tree) {
    return tree.leaf_order;
}

namespace detail {

/// Cluster variance w' Sigma w with intra-cluster inverse-variance weights.
inline double cluster_variance(const Eigen::MatrixXd& cov,
                               const std::vector<int>& idx) {
    const long k = static_cast<long>(idx.size());
    Eigen::VectorXd iv(k);
    for (long i = 0; i < k; ++i) {
        double v = cov(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(i)]);
        if (!(v > kVarianceFloor)) throw std::runtime_error("degenerate variance");
        iv[i] = 1.0 / v;
    }
    Eigen::VectorXd w = iv / iv.sum();
    double out = 0.0;
    for (long i = 0; i < k; ++i)
        for (long j = 0; j < k; ++j)
            out += w[i] * w[j] *
                   cov(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    return out;
}

}  // namespace detail

/// Top-down recursive bisection over the quasi-diagonal order. Each
/// contiguous segment splits at ceil(len/2); capital splits by inverse
/// cluster variance.
inline WeightVector recursive_bisection(const CovarianceEstimate& estimate,
                                        const std::vector<int>& order,
                                        const std::vector<std::string>& assets = {}) {
    detail::check_variances(estimate.variances);
    const long N = estimate.size();
    Eigen::VectorXd weights = Eigen::VectorXd::Zero(N);

    struct Segment {
        size_t begin, end;  // half-open range into `order`
        double weight;
    };
    std::vector<Segment> stack{{0, order.size(), 1.0}};
    while (!stack.empty()) {
        Segment seg = stack.back();
        stack.pop_back();
        size_t len = seg.end - seg.begin;
        if (len == 1) {
            weights[order[seg.begin]] = seg.weight;
            continue;
        }
        size_t mid = seg.begin + (len + 1) / 2;
        std::vector<int> left(order.begin() + static_cast<long>(seg.begin),
                              order.begin() + static_cast<long>(mid));
        std::vector<int> right(order.begin() + static_cast<long>(mid),
                               order.begin() + static_cast<long>(seg.end));
        double vl = detail::cluster_variance(estimate.covariance, left);
        double vr = detail::cluster_variance(estimate.covariance, right);
        double alpha = 1.0 - vl / (vl + vr);
        stack.push_back({seg.begin, mid, seg.weight * alpha});
        stack.push_back({mid, seg.end, seg.weight * (1.0 - alpha)});
    }

    WeightVector w;
    w.assets = assets.empty() ? std::vector<std::string>(static_cast<size_t>(N), "")
                              : assets;
    w.weights = weights / weights.sum();
    return w;
}

/// Full HRP pipeline: distance transform, single-linkage tree,
/// quasi-diagonalization, recursive bisection.
inline WeightVector hrp_weights(const CovarianceEstimate& estimate,
                                const std::vector<std::string>& assets = {}) {
    DistanceMatrix d = correlation_to_distance(estimate.correlation);
    Eigen::MatrixXd d_aug = augmented_distance(d);
    ClusterTree tree = tree_cluster(d_aug);
    return recursive_bisection(estimate, quasi_diagonalize(tree), assets);
}

}  // namespace metafolio
