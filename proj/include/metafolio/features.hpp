// Predictive feature battery: component-strategy performance, universe
// moments, correlation summaries, entropy/diversification measures and
// spectral statistics of the correlation matrix.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metafolio/allocators.hpp"
#include "metafolio/covariance.hpp"
#include "metafolio/market_data.hpp"
#include "metafolio/stats.hpp"

namespace metafolio {

/// The fixed set of model inputs, keyed by canonical name. Serialization
/// order is alphabetical.
class FeatureVector {
public:
    static const std::vector<std::string>& canonical_names() {
        static const std::vector<std::string> names = [] {
            std::vector<std::string> n = {
                "hrp_avg_ret",  "nrp_avg_ret",  "hrp_real_vol", "nrp_real_vol",
                "hrp_max_dd",   "nrp_max_dd",   "hrp_down_dev", "nrp_down_dev",
                "univ_mean_ret", "univ_std",    "meanCORR",     "stdCORR",
                "knn_entropy",  "quality_ratio", "sgv",         "cophenetic_average",
                "intra_cluster_var", "corr_det", "corr_cond",   "mp_var_fraction"};
            std::sort(n.begin(), n.end());
            return n;
        }();
        return names;
    }

    void set(const std::string& name, double value) {
        if (!std::binary_search(canonical_names().begin(), canonical_names().end(), name))
            throw std::runtime_error("unknown feature: " + name);
        if (!std::isfinite(value))
            throw std::runtime_error("feature assembly failed: non-finite " + name);
        values_[name] = value;
    }

    double get(const std::string& name) const {
        auto it = values_.find(name);
        if (it == values_.end()) throw std::runtime_error("feature mismatch: " + name);
        return it->second;
    }

    bool complete() const { return values_.size() == canonical_names().size(); }

    /// Values in canonical (alphabetical) order.
    std::vector<double> ordered_values() const {
        if (!complete()) throw std::runtime_error("feature assembly failed: incomplete");
        std::vector<double> out;
        out.reserve(values_.size());
        for (const auto& n : canonical_names()) out.push_back(values_.at(n));
        return out;
    }

    const std::map<std::string, double>& map() const { return values_; }

private:
    std::map<std::string, double> values_;  // ordered -> canonical iteration
};

struct PerformanceFeatures {
    double avg_ret = 0.0;
    double real_vol = 0.0;  // annualized, sqrt(252)
    double max_dd = 0.0;    // positive fraction
    double down_dev = 0.0;  // MAR = 0
};

/// Max peak-to-trough decline of the compounded wealth curve, as a
/// positive fraction.
inline double max_drawdown(std::span<const double> returns) {
    double wealth = 1.0, peak = 1.0, dd = 0.0;
    for (double r : returns) {
        wealth *= 1.0 + r;
        peak = std::max(peak, wealth);
        dd = std::max(dd, (peak - wealth) / peak);
    }
    return dd;
}

inline PerformanceFeatures performance_features(std::span<const double> returns) {
    if (returns.size() < 2) throw std::runtime_error("insufficient history");
    PerformanceFeatures out;
    out.avg_ret = stats::mean(returns);
    out.real_vol = stats::sample_std(returns) * std::sqrt(252.0);
    out.max_dd = max_drawdown(returns);
    double ss = 0.0;
    for (double r : returns) {
        double d = std::min(r, 0.0);
        ss += d * d;
    }
    out.down_dev = std::sqrt(ss / static_cast<double>(returns.size()));
    return out;
}

/// Mean and sample std over all (date, asset) cells pooled.
inline std::pair<double, double> universe_moments(const ReturnPanel& window) {
    const long T = window.rows(), N = window.cols();
    if (T == 0 || N == 0) throw std::runtime_error("insufficient history");
    std::vector<double> cells;
    cells.reserve(static_cast<size_t>(T * N));
    for (long t = 0; t < T; ++t)
        for (long n = 0; n < N; ++n) cells.push_back(window.returns(t, n));
    double m = stats::mean(cells);
    double s = cells.size() > 1 ? stats::sample_std(cells) : 0.0;
    return {m, s};
}

/// Mean and population std of the strictly-lower-triangular correlations.
inline std::pair<double, double> correlation_summary(const Eigen::MatrixXd& correlation) {
    const long N = correlation.rows();
    if (N < 2) throw std::runtime_error("insufficient assets");
    std::vector<double> lower;
    lower.reserve(static_cast<size_t>(N * (N - 1) / 2));
    for (long i = 1; i < N; ++i)
        for (long j = 0; j < i; ++j) lower.push_back(correlation(i, j));
    return {stats::mean(lower), stats::population_std(lower)};
}

/// Kozachenko-Leonenko differential entropy of the daily return vectors,
/// in nats. Brute-force k-th nearest neighbor; duplicate points are broken
/// by deterministic seeded jitter at 1e-12 scale.
inline double knn_entropy(const ReturnPanel& window, int k = 3,
                          std::uint64_t jitter_seed = 0) {
    const long T = window.rows(), d = window.cols();
    if (T <= k) throw std::runtime_error("insufficient history");

    Eigen::MatrixXd pts = window.returns;
    bool has_dup = false;
    for (long i = 0; i < T && !has_dup; ++i)
        for (long j = i + 1; j < T; ++j)
            if ((pts.row(i) - pts.row(j)).norm() == 0.0) { has_dup = true; break; }
    if (has_dup) {
        std::mt19937_64 rng(jitter_seed);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (long i = 0; i < T; ++i)
            for (long j = 0; j < d; ++j) pts(i, j) += 1e-12 * u(rng);
    }

    double sum_log_eps = 0.0;
    std::vector<double> dist(static_cast<size_t>(T));
    for (long i = 0; i < T; ++i) {
        size_t m = 0;
        for (long j = 0; j < T; ++j)
            if (j != i) dist[m++] = (pts.row(i) - pts.row(j)).norm();
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.begin() + static_cast<long>(m));
        double eps = dist[static_cast<size_t>(k - 1)];
        if (eps <= 0.0) throw std::runtime_error("feature assembly failed: coincident points");
        sum_log_eps += std::log(eps);
    }

    double dd = static_cast<double>(d);
    double log_unit_ball =
        0.5 * dd * std::log(M_PI) - std::lgamma(0.5 * dd + 1.0);
    return stats::digamma(static_cast<double>(T)) - stats::digamma(static_cast<double>(k)) +
           log_unit_ball + dd / static_cast<double>(T) * sum_log_eps;
}

/// Effective number of independent risk factors as a fraction of N:
/// exp(entropy of normalized eigenvalue spectrum) / N, in (0, 1].
inline double quality_ratio(const Eigen::MatrixXd& correlation) {
    const long N = correlation.rows();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(correlation);
    double entropy = 0.0;
    for (long i = 0; i < N; ++i) {
        double p = std::max(0.0, es.eigenvalues()[i]) / static_cast<double>(N);
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return std::exp(entropy) / static_cast<double>(N);
}

/// Standardized generalized variance: det(Sigma)^(1/N).
inline double sgv(const Eigen::MatrixXd& covariance) {
    const long N = covariance.rows();
    double det = covariance.determinant();
    if (det < -1e-10) throw std::runtime_error("invalid covariance");
    return std::pow(std::max(det, 0.0), 1.0 / static_cast<double>(N));
}

namespace detail {

/// Leaf sets under each internal node of the tree.
inline std::vector<std::vector<int>> merge_leaf_sets(const ClusterTree& tree, long N) {
    std::vector<std::vector<int>> sets;
    sets.reserve(tree.merges.size());
    auto leaves_of = [&](int node) -> std::vector<int> {
        if (node < N) return {node};
        return sets[static_cast<size_t>(node - N)];
    };
    for (const auto& rec : tree.merges) {
        std::vector<int> s = leaves_of(rec.left);
        std::vector<int> r = leaves_of(rec.right);
        s.insert(s.end(), r.begin(), r.end());
        sets.push_back(std::move(s));
    }
    return sets;
}

/// Partition induced by cutting the tree into K clusters (undo the last
/// K-1 merges).
inline std::vector<std::vector<int>> cut_tree(const ClusterTree& tree, long N, int K) {
    int applied = static_cast<int>(N) - K;
    std::vector<int> parent(static_cast<size_t>(2 * N - 1));
    for (size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
    std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<size_t>(x)] != x) x = parent[static_cast<size_t>(x)];
        return x;
    };
    for (int m = 0; m < applied; ++m) {
        const auto& rec = tree.merges[static_cast<size_t>(m)];
        int id = static_cast<int>(N) + m;
        parent[static_cast<size_t>(find(rec.left))] = id;
        parent[static_cast<size_t>(find(rec.right))] = id;
    }
    std::map<int, std::vector<int>> groups;
    for (int i = 0; i < N; ++i) groups[find(i)].push_back(i);
    std::vector<std::vector<int>> out;
    out.reserve(groups.size());
    for (auto& [root, g] : groups) out.push_back(std::move(g));
    return out;
}

}  // namespace detail

/// cophenetic_average: Pearson correlation between original distances and
/// the merge heights at which pairs first join. intra_cluster_var: mean
/// over tree-cut clusters (K = ceil(sqrt(N))) of the average squared
/// distance from members to the cluster medoid.
inline std::pair<double, double> cluster_features(const ClusterTree& tree,
                                                  const DistanceMatrix& dist,
                                                  const Eigen::MatrixXd& correlation) {
    (void)correlation;
    const long N = dist.d.rows();

    double cophenetic = 0.0;
    if (N >= 3) {
        // cophenetic distance per pair: height of the first merge uniting them
        Eigen::MatrixXd coph = Eigen::MatrixXd::Zero(N, N);
        auto sets = detail::merge_leaf_sets(tree, N);
        auto leaves_of = [&](int node) -> std::vector<int> {
            if (node < N) return {node};
            return sets[static_cast<size_t>(node - N)];
        };
        for (const auto& rec : tree.merges) {
            for (int a : leaves_of(rec.left))
                for (int b : leaves_of(rec.right)) {
                    coph(a, b) = rec.height;
                    coph(b, a) = rec.height;
                }
        }
        std::vector<double> orig, tree_d;
        for (long i = 1; i < N; ++i)
            for (long j = 0; j < i; ++j) {
                orig.push_back(dist.d(i, j));
                tree_d.push_back(coph(i, j));
            }
        cophenetic = stats::pearson_correlation(orig, tree_d);
    }

    int K = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(N))));
    auto clusters = detail::cut_tree(tree, N, K);
    double total = 0.0;
    for (const auto& c : clusters) {
        if (c.size() == 1) continue;  // singleton contributes 0
        // medoid: member minimizing the sum of squared distances to the rest
        size_t medoid = 0;
        double best = std::numeric_limits<double>::infinity();
        for (size_t i = 0; i < c.size(); ++i) {
            double s = 0.0;
            for (size_t j = 0; j < c.size(); ++j) {
                double dij = dist.d(c[i], c[j]);
                s += dij * dij;
            }
            if (s < best) { best = s; medoid = i; }
        }
        double ss = 0.0;
        for (size_t j = 0; j < c.size(); ++j) {
            double dij = dist.d(c[medoid], c[j]);
            ss += dij * dij;
        }
        total += ss / static_cast<double>(c.size());
    }
    double intra = total / static_cast<double>(clusters.size());
    return {cophenetic, intra};
}

struct SpectrumFeatures {
    double corr_det = 0.0;
    double corr_cond = 0.0;
    double mp_var_fraction = 0.0;
};

/// Determinant, condition number, and the eigenvalue mass above the
/// Marchenko-Pastur upper edge (1 + sqrt(N/T))^2 as a fraction of N.
inline SpectrumFeatures matrix_spectrum_features(const Eigen::MatrixXd& correlation,
                                                 long T) {
    const long N = correlation.rows();
    if (T <= N) throw std::runtime_error("insufficient history");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(correlation);
    SpectrumFeatures out;
    out.corr_det = correlation.determinant();
    double lmin = es.eigenvalues().minCoeff();
    double lmax = es.eigenvalues().maxCoeff();
    out.corr_cond = lmin < 1e-12 ? 1e12 : std::min(lmax / lmin, 1e12);
    double edge = std::pow(1.0 + std::sqrt(static_cast<double>(N) / static_cast<double>(T)), 2.0);
    double above = 0.0;
    for (long i = 0; i < N; ++i)
        if (es.eigenvalues()[i] > edge) above += es.eigenvalues()[i];
    out.mp_var_fraction = above / static_cast<double>(N);
    return out;
}

/// Everything assemble_features needs for one decision date.
struct FeatureInputs {
    std::span<const double> hrp_returns;  // trailing T_m component returns
    std::span<const double> nrp_returns;
    const ReturnPanel* recent_window = nullptr;  // trailing T_m panel
    const CovarianceEstimate* estimate = nullptr;
    long fit_window_length = 0;  // T_r, for the Marchenko-Pastur edge
    int knn_k = 3;
    std::uint64_t knn_jitter_seed = 0;
};

inline FeatureVector assemble_features(const FeatureInputs& in) {
    FeatureVector fv;
    PerformanceFeatures hrp = performance_features(in.hrp_returns);
    PerformanceFeatures nrp = performance_features(in.nrp_returns);
    fv.set("hrp_avg_ret", hrp.avg_ret);
    fv.set("hrp_real_vol", hrp.real_vol);
    fv.set("hrp_max_dd", hrp.max_dd);
    fv.set("hrp_down_dev", hrp.down_dev);
    fv.set("nrp_avg_ret", nrp.avg_ret);
    fv.set("nrp_real_vol", nrp.real_vol);
    fv.set("nrp_max_dd", nrp.max_dd);
    fv.set("nrp_down_dev", nrp.down_dev);

    auto [um, us] = universe_moments(*in.recent_window);
    fv.set("univ_mean_ret", um);
    fv.set("univ_std", us);

    const Eigen::MatrixXd& corr = in.estimate->correlation;
    auto [mc, sc] = correlation_summary(corr);
    fv.set("meanCORR", mc);
    fv.set("stdCORR", sc);

    fv.set("knn_entropy", knn_entropy(*in.recent_window, in.knn_k, in.knn_jitter_seed));
    fv.set("quality_ratio", quality_ratio(corr));
    fv.set("sgv", sgv(in.estimate->covariance));

    DistanceMatrix dist = correlation_to_distance(corr);
    ClusterTree tree = tree_cluster(augmented_distance(dist));
    auto [coph, intra] = cluster_features(tree, dist, corr);
    fv.set("cophenetic_average", coph);
    fv.set("intra_cluster_var", intra);

    SpectrumFeatures spec = matrix_spectrum_features(corr, in.fit_window_length);
    fv.set("corr_det", spec.corr_det);
    fv.set("corr_cond", spec.corr_cond);
    fv.set("mp_var_fraction", spec.mp_var_fraction);

    if (!fv.complete()) throw std::runtime_error("feature assembly failed");
    return fv;
}

}  // namespace metafolio
