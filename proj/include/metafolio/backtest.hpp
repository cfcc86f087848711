// Walk-forward engine: rolls covariance/feature windows, rebalances the
// component strategies, invokes the meta-learner, applies transaction
// costs and aggregates comparative statistics. Also hosts the synthetic
// regime-switching market generator and the return-density surface.
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "metafolio/allocators.hpp"
#include "metafolio/covariance.hpp"
#include "metafolio/features.hpp"
#include "metafolio/market_data.hpp"
#include "metafolio/meta_learner.hpp"

namespace metafolio {

/// Walk-forward window lengths, in trading days.
struct WindowConfig {
    int t_r = 756;  // covariance/training lookback
    int t_m = 63;   // performance-feature lookback
    int t_h = 21;   // holding period
    int t_a = 21;   // advance step

    void validate() const {
        if (t_r <= 0 || t_m <= 0 || t_h <= 0 || t_a <= 0)
            throw std::runtime_error("window lengths must be positive");
        if (t_m > t_r) throw std::runtime_error("T_m must not exceed T_r");
        if (t_a > t_h) throw std::runtime_error("T_a must not exceed T_h");
    }
};

/// Proportional cost per unit of one-way turnover.
struct CostModel {
    double rate = 0.001;

    void validate() const {
        if (rate < 0.0) throw std::runtime_error("cost rate must be >= 0");
    }
};

enum class CovarianceEstimatorKind { Dcc, Sample, Ewma };

enum class DecisionMode {
    Learner,     // trained meta-learner (cold start follows HRP)
    AlwaysHrp,   // forced constant choice
    AlwaysNrp,
    OracleBest,  // ex-post better strategy; test-only sanity upper bound
};

struct LearnerConfig {
    int hyperopt_budget = 25;
    int hyperopt_cadence = 6;  // re-optimize every N trainings
    size_t min_examples = 20;
    SearchBox search_box;
};

struct BacktestConfig {
    WindowConfig windows;
    CostModel cost;
    CovarianceEstimatorKind estimator = CovarianceEstimatorKind::Dcc;
    DecisionMode mode = DecisionMode::Learner;
    LearnerConfig learner;
    std::uint64_t seed = 42;
};

struct DecisionRecord {
    Date as_of;
    double predicted_spread = 0.0;
    StrategyChoice choice = StrategyChoice::HRP;
    bool cold_start = false;
    bool covariance_fallback = false;
    WeightVector hrp_weights;
    WeightVector nrp_weights;
    FeatureVector features;
    double realized_target = std::numeric_limits<double>::quiet_NaN();
};

struct StrategyMetrics {
    double sharpe = 0.0;
    double cumulative_return = 0.0;
    double max_drawdown = 0.0;
    double realized_vol = 0.0;
};

inline StrategyMetrics compute_metrics(std::span<const double> returns) {
    StrategyMetrics m;
    if (returns.size() < 2) return m;
    double sd = stats::sample_std(returns);
    m.sharpe = sd > 0.0 ? stats::mean(returns) / sd * std::sqrt(252.0) : 0.0;
    double wealth = 1.0;
    for (double r : returns) wealth *= 1.0 + r;
    m.cumulative_return = wealth - 1.0;
    m.max_drawdown = max_drawdown(returns);
    m.realized_vol = sd * std::sqrt(252.0);
    return m;
}

struct BacktestReport {
    int universe_id = 0;
    std::vector<std::string> assets;
    std::vector<Date> dates;  // evaluation span, first decision onward
    std::vector<double> hrp_returns, nrp_returns, mpm_returns;  // daily, net
    std::vector<double> hrp_wealth, nrp_wealth, mpm_wealth;     // start at 1.0
    std::vector<DecisionRecord> decisions;
    StrategyMetrics hrp_metrics, nrp_metrics, mpm_metrics;
    double mpm_turnover = 0.0;
    double mpm_cost_drag = 0.0;  // sum of cost fractions deducted
    std::vector<std::map<std::string, double>> importance_history;
    std::vector<std::string> log;  // fallbacks and non-fatal errors
    BacktestConfig config;
};

/// Cost fraction charged at a rebalance: rate * sum |w_new - w_drifted|.
inline double apply_costs(const WeightVector& drifted_weights,
                          const WeightVector& new_weights, double rate) {
    if (drifted_weights.assets != new_weights.assets)
        throw std::runtime_error("asset mismatch");
    return rate * (new_weights.weights - drifted_weights.weights).cwiseAbs().sum();
}

namespace detail {

/// Buy-and-hold simulation over rows [begin, end): appends gross daily
/// returns and drifts the weights in place.
inline void simulate_drift(const Eigen::MatrixXd& returns, long begin, long end,
                           Eigen::VectorXd& weights, std::vector<double>* out) {
    for (long t = begin; t < end; ++t) {
        Eigen::VectorXd r = returns.row(t);
        double gross = weights.dot(r);
        if (out) out->push_back(gross);
        weights = weights.cwiseProduct(Eigen::VectorXd::Ones(r.size()) + r) /
                  (1.0 + gross);
    }
}

inline ReturnPanel slice_panel(const ReturnPanel& panel, long begin, long end) {
    ReturnPanel out;
    out.assets = panel.assets;
    out.dates.assign(panel.dates.begin() + begin, panel.dates.begin() + end);
    out.returns = panel.returns.middleRows(begin, end - begin);
    return out;
}

}  // namespace detail

/// Covariance estimate for one fit window, honoring the configured
/// estimator and the EWMA fallback policy.
inline CovarianceEstimate estimate_covariance(const ReturnPanel& window,
                                              CovarianceEstimatorKind kind,
                                              bool* fell_back = nullptr,
                                              std::string* note = nullptr) {
    if (fell_back) *fell_back = false;
    switch (kind) {
        case CovarianceEstimatorKind::Sample:
            return sample_covariance(window);
        case CovarianceEstimatorKind::Ewma:
            return ewma_covariance(window);
        case CovarianceEstimatorKind::Dcc:
            break;
    }
    try {
        DccParams params = fit_dcc(window);
        CovarianceEstimate est = forecast_covariance(params, window);
        std::string why;
        if (!est.valid(&why)) throw DccFitError("dcc fit failed: " + why);
        return est;
    } catch (const DccFitError& e) {
        if (fell_back) *fell_back = true;
        if (note) *note = std::string("covariance fallback (ewma): ") + e.what();
        return ewma_covariance(window);
    }
}

/// The full walk-forward protocol. Every decision uses only data strictly
/// before its decision date; identical (panel, config) inputs give
/// bit-identical reports.
inline BacktestReport run_backtest(const ReturnPanel& panel,
                                   const BacktestConfig& config,
                                   int universe_id = 0) {
    config.windows.validate();
    config.cost.validate();
    const long T = panel.rows();
    const long t_r = config.windows.t_r, t_m = config.windows.t_m;
    const long t_h = config.windows.t_h, t_a = config.windows.t_a;
    if (T < t_r + t_h + 1) throw std::runtime_error("insufficient history");

    std::vector<long> decision_idx;
    for (long t = t_r; t + t_h <= T; t += t_a) decision_idx.push_back(t);
    const long t_last = decision_idx.back();
    const long span_end = t_last + t_h;

    BacktestReport report;
    report.universe_id = universe_id;
    report.assets = panel.assets;
    report.config = config;
    report.dates.assign(panel.dates.begin() + t_r, panel.dates.begin() + span_end);

    const long N = panel.cols();
    Eigen::VectorXd hrp_w = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd nrp_w = Eigen::VectorXd::Zero(N);
    Eigen::VectorXd mpm_w = Eigen::VectorXd::Zero(N);

    std::vector<TrainingExample> examples;       // realized, chronological
    std::vector<DecisionRecord> pending;         // decisions awaiting targets
    HyperParams current_params;                  // defaults until first hyperopt
    bool have_model_params = false;
    int trainings = 0;

    for (size_t k = 0; k < decision_idx.size(); ++k) {
        const long t = decision_idx[k];
        const Date as_of = panel.dates[static_cast<size_t>(t)];

        // realize targets for decisions whose holding window has completed
        for (auto& rec : report.decisions) {
            if (!std::isnan(rec.realized_target)) continue;
            long t_dec = -1;
            for (long d : decision_idx)
                if (panel.dates[static_cast<size_t>(d)] == rec.as_of) t_dec = d;
            if (t_dec < 0 || t_dec + t_h > t) continue;
            size_t off = static_cast<size_t>(t_dec - t_r);
            std::span<const double> hrp_fw(report.hrp_returns.data() + off,
                                           static_cast<size_t>(t_h));
            std::span<const double> nrp_fw(report.nrp_returns.data() + off,
                                           static_cast<size_t>(t_h));
            try {
                rec.realized_target = make_target(hrp_fw, nrp_fw);
                TrainingExample ex;
                ex.features = rec.features;
                ex.target = rec.realized_target;
                ex.as_of = rec.as_of;
                examples.push_back(std::move(ex));
            } catch (const std::exception& e) {
                report.log.push_back("target skipped at " + rec.as_of.to_string() +
                                     ": " + e.what());
                rec.realized_target = 0.0;  // mark handled, excluded from training
            }
        }

        // 1. covariance on the trailing T_r window
        ReturnPanel fit_window = detail::slice_panel(panel, t - t_r, t);
        bool fell_back = false;
        std::string note;
        CovarianceEstimate estimate;
        try {
            estimate = estimate_covariance(fit_window, config.estimator, &fell_back, &note);
        } catch (const std::exception& e) {
            fell_back = true;
            note = std::string("covariance fallback (ewma): ") + e.what();
            estimate = ewma_covariance(fit_window);
        }
        if (fell_back) report.log.push_back(as_of.to_string() + ": " + note);

        // 2. component weights
        WeightVector w_hrp = hrp_weights(estimate, panel.assets);
        WeightVector w_nrp = nrp_weights(estimate, panel.assets);

        // 3. feature battery: backcast each component's fresh weights over
        //    the trailing T_m window
        Eigen::VectorXd bw = w_hrp.weights;
        std::vector<double> hrp_recent, nrp_recent;
        detail::simulate_drift(panel.returns, t - t_m, t, bw, &hrp_recent);
        bw = w_nrp.weights;
        detail::simulate_drift(panel.returns, t - t_m, t, bw, &nrp_recent);
        ReturnPanel recent = detail::slice_panel(panel, t - t_m, t);

        FeatureInputs fin;
        fin.hrp_returns = hrp_recent;
        fin.nrp_returns = nrp_recent;
        fin.recent_window = &recent;
        fin.estimate = &estimate;
        fin.fit_window_length = t_r;
        fin.knn_jitter_seed = config.seed;
        FeatureVector features = assemble_features(fin);

        // 4. decide
        DecisionRecord rec;
        rec.as_of = as_of;
        rec.covariance_fallback = fell_back;
        rec.hrp_weights = w_hrp;
        rec.nrp_weights = w_nrp;
        rec.features = features;

        switch (config.mode) {
            case DecisionMode::AlwaysHrp:
                rec.predicted_spread = 0.0;
                rec.choice = StrategyChoice::HRP;
                break;
            case DecisionMode::AlwaysNrp:
                rec.predicted_spread = -1.0;
                rec.choice = StrategyChoice::NRP;
                break;
            case DecisionMode::OracleBest: {
                // ex-post cheat: peek at the holding-period spread
                Eigen::VectorXd wh = w_hrp.weights, wn = w_nrp.weights;
                std::vector<double> fh, fn;
                detail::simulate_drift(panel.returns, t, t + t_h, wh, &fh);
                detail::simulate_drift(panel.returns, t, t + t_h, wn, &fn);
                double spread = 0.0;
                try {
                    spread = make_target(fh, fn);
                } catch (const std::exception&) {
                }
                rec.predicted_spread = spread;
                rec.choice = decide(spread, as_of).choice;
                break;
            }
            case DecisionMode::Learner: {
                if (examples.size() < config.learner.min_examples) {
                    rec.cold_start = true;
                    rec.predicted_spread = 0.0;
                    rec.choice = StrategyChoice::HRP;  // lower-variance component
                } else {
                    if (!have_model_params ||
                        trainings % config.learner.hyperopt_cadence == 0) {
                        try {
                            auto opt = bayes_optimize(
                                examples, config.learner.hyperopt_budget,
                                config.seed + static_cast<std::uint64_t>(k),
                                config.learner.search_box);
                            current_params = opt.best;
                            have_model_params = true;
                        } catch (const std::exception& e) {
                            report.log.push_back(as_of.to_string() +
                                                 ": hyperopt skipped: " + e.what());
                        }
                    }
                    ++trainings;
                    TreeEnsemble model = train_gbt(examples, current_params, config.seed);
                    report.importance_history.push_back(feature_importance(model));
                    rec.predicted_spread = predict(model, features);
                    StrategyDecision d = decide(rec.predicted_spread, as_of);
                    rec.choice = d.choice;
                }
                break;
            }
        }

        // 5. rebalance and accrue the period
        const Eigen::VectorXd& chosen =
            rec.choice == StrategyChoice::HRP ? w_hrp.weights : w_nrp.weights;
        double hrp_cost = 0.0, nrp_cost = 0.0, mpm_cost = 0.0;
        if (k > 0) {
            WeightVector drifted_h{panel.assets, hrp_w}, drifted_n{panel.assets, nrp_w};
            WeightVector drifted_m{panel.assets, mpm_w};
            hrp_cost = apply_costs(drifted_h, w_hrp, config.cost.rate);
            nrp_cost = apply_costs(drifted_n, w_nrp, config.cost.rate);
            WeightVector target_m{panel.assets, chosen};
            mpm_cost = apply_costs(drifted_m, target_m, config.cost.rate);
            report.mpm_turnover += (chosen - mpm_w).cwiseAbs().sum();
        }
        report.mpm_cost_drag += mpm_cost;
        hrp_w = w_hrp.weights;
        nrp_w = w_nrp.weights;
        mpm_w = chosen;

        const long period_end = (k + 1 < decision_idx.size()) ? decision_idx[k + 1]
                                                              : t + t_h;
        std::vector<double> hrp_gross, nrp_gross, mpm_gross;
        detail::simulate_drift(panel.returns, t, period_end, hrp_w, &hrp_gross);
        detail::simulate_drift(panel.returns, t, period_end, nrp_w, &nrp_gross);
        detail::simulate_drift(panel.returns, t, period_end, mpm_w, &mpm_gross);
        hrp_gross.front() -= hrp_cost;
        nrp_gross.front() -= nrp_cost;
        mpm_gross.front() -= mpm_cost;
        report.hrp_returns.insert(report.hrp_returns.end(), hrp_gross.begin(),
                                  hrp_gross.end());
        report.nrp_returns.insert(report.nrp_returns.end(), nrp_gross.begin(),
                                  nrp_gross.end());
        report.mpm_returns.insert(report.mpm_returns.end(), mpm_gross.begin(),
                                  mpm_gross.end());

        report.decisions.push_back(std::move(rec));
    }

    auto build_wealth = [](const std::vector<double>& rets) {
        std::vector<double> w;
        w.reserve(rets.size() + 1);
        w.push_back(1.0);
        for (double r : rets) w.push_back(w.back() * (1.0 + r));
        return w;
    };
    report.hrp_wealth = build_wealth(report.hrp_returns);
    report.nrp_wealth = build_wealth(report.nrp_returns);
    report.mpm_wealth = build_wealth(report.mpm_returns);
    report.hrp_metrics = compute_metrics(report.hrp_returns);
    report.nrp_metrics = compute_metrics(report.nrp_returns);
    report.mpm_metrics = compute_metrics(report.mpm_returns);
    return report;
}

// ---------------------------------------------------------------------------
// Cross-universe significance testing
// ---------------------------------------------------------------------------

struct PairedComparison {
    std::string name;  // e.g. "sharpe: mpm - hrp"
    double mean_delta = 0.0;
    double t_statistic = 0.0;
    double p_value = 0.5;  // one-sided, H1: mean delta > 0
    std::vector<double> deltas;
};

struct SignificanceSummary {
    std::vector<PairedComparison> comparisons;
};

/// Paired one-sided t-test on per-universe deltas, H1: mean > 0.
inline PairedComparison paired_t_test(const std::string& name,
                                      const std::vector<double>& deltas) {
    if (deltas.size() < 2) throw std::runtime_error("insufficient sample");
    PairedComparison out;
    out.name = name;
    out.deltas = deltas;
    out.mean_delta = stats::mean(deltas);
    double sd = stats::sample_std(deltas);
    const double n = static_cast<double>(deltas.size());
    if (sd == 0.0) {
        out.t_statistic = out.mean_delta == 0.0
                              ? 0.0
                              : std::copysign(std::numeric_limits<double>::infinity(),
                                              out.mean_delta);
        out.p_value = out.mean_delta > 0.0 ? 0.0 : (out.mean_delta < 0.0 ? 1.0 : 0.5);
        return out;
    }
    out.t_statistic = out.mean_delta / (sd / std::sqrt(n));
    boost::math::students_t dist(n - 1.0);
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.t_statistic));
    return out;
}

inline SignificanceSummary compare_strategies(const std::vector<BacktestReport>& reports) {
    if (reports.size() < 2) throw std::runtime_error("insufficient sample");
    std::vector<double> sh_hrp, sh_nrp, cr_hrp, cr_nrp;
    for (const auto& r : reports) {
        sh_hrp.push_back(r.mpm_metrics.sharpe - r.hrp_metrics.sharpe);
        sh_nrp.push_back(r.mpm_metrics.sharpe - r.nrp_metrics.sharpe);
        cr_hrp.push_back(r.mpm_metrics.cumulative_return - r.hrp_metrics.cumulative_return);
        cr_nrp.push_back(r.mpm_metrics.cumulative_return - r.nrp_metrics.cumulative_return);
    }
    SignificanceSummary s;
    s.comparisons.push_back(paired_t_test("sharpe: mpm - hrp", sh_hrp));
    s.comparisons.push_back(paired_t_test("sharpe: mpm - nrp", sh_nrp));
    s.comparisons.push_back(paired_t_test("cumret: mpm - hrp", cr_hrp));
    s.comparisons.push_back(paired_t_test("cumret: mpm - nrp", cr_nrp));
    return s;
}

// ---------------------------------------------------------------------------
// Synthetic regime-switching market
// ---------------------------------------------------------------------------

struct RegimeSpec {
    std::string name;
    Eigen::VectorXd daily_mean;
    Eigen::MatrixXd covariance;
    int min_duration = 60;  // trading days
    int max_duration = 180;
};

struct MarketSpec {
    std::vector<std::string> tickers;
    std::vector<RegimeSpec> regimes;  // cycled in order
    long days = 2520;
    Date start{2005, 1, 3};
};

/// Regime-switching multivariate Gaussian returns compounded into prices.
/// Deterministic given the seed.
inline PricePanel generate_synthetic_market(const MarketSpec& spec,
                                            std::uint64_t seed) {
    if (spec.regimes.empty()) throw std::runtime_error("invalid spec: no regimes");
    const long N = static_cast<long>(spec.tickers.size());
    if (N < 1) throw std::runtime_error("invalid spec: no tickers");

    std::vector<Eigen::MatrixXd> chol;
    for (const auto& r : spec.regimes) {
        if (r.daily_mean.size() != N || r.covariance.rows() != N ||
            r.covariance.cols() != N)
            throw std::runtime_error("invalid spec: shape mismatch");
        Eigen::LLT<Eigen::MatrixXd> llt(r.covariance);
        if (llt.info() != Eigen::Success)
            throw std::runtime_error("invalid spec: regime covariance not PSD");
        chol.push_back(llt.matrixL());
        if (r.min_duration < 1 || r.max_duration < r.min_duration)
            throw std::runtime_error("invalid spec: bad duration range");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    PricePanel panel;
    panel.assets = spec.tickers;
    panel.prices.resize(spec.days + 1, N);
    panel.prices.row(0).setConstant(100.0);
    panel.dates.reserve(static_cast<size_t>(spec.days + 1));
    Date d = spec.start;
    panel.dates.push_back(d);

    size_t regime = 0;
    long remaining = 0;
    for (long t = 1; t <= spec.days; ++t) {
        if (remaining == 0) {
            if (t > 1) regime = (regime + 1) % spec.regimes.size();
            const auto& r = spec.regimes[regime];
            std::uniform_int_distribution<int> dur(r.min_duration, r.max_duration);
            remaining = dur(rng);
        }
        --remaining;
        Eigen::VectorXd z(N);
        for (long n = 0; n < N; ++n) z[n] = gauss(rng);
        Eigen::VectorXd ret =
            spec.regimes[regime].daily_mean + chol[regime] * z;
        for (long n = 0; n < N; ++n) {
            double p = panel.prices(t - 1, n) * (1.0 + ret[n]);
            if (!(p > 0.0)) throw std::runtime_error("invalid spec: price hit zero");
            panel.prices(t, n) = p;
        }
        d = d.next();
        panel.dates.push_back(d);
    }
    return panel;
}

// ---------------------------------------------------------------------------
// Return-density surface (Fig. 1 style raw data)
// ---------------------------------------------------------------------------

struct DensitySurface {
    std::vector<double> grid;                   // fixed return grid
    std::vector<std::vector<double>> buckets;   // density per bucket on grid
};

/// Per-bucket Gaussian kernel density of daily returns on a fixed grid,
/// normalized so each bucket integrates to 1 on the grid.
inline DensitySurface strategy_density_surface(std::span<const double> returns,
                                               long bucket, int grid_points = 201) {
    if (bucket < 1 || static_cast<size_t>(bucket) > returns.size())
        throw std::runtime_error("insufficient history");

    double lo = *std::min_element(returns.begin(), returns.end());
    double hi = *std::max_element(returns.begin(), returns.end());
    double pad = std::max(1e-6, 0.25 * (hi - lo));
    lo -= pad;
    hi += pad;

    DensitySurface out;
    out.grid.resize(static_cast<size_t>(grid_points));
    double step = (hi - lo) / (grid_points - 1);
    for (int i = 0; i < grid_points; ++i) out.grid[static_cast<size_t>(i)] = lo + i * step;

    const long n_buckets = static_cast<long>(returns.size()) / bucket;
    for (long b = 0; b < n_buckets; ++b) {
        std::span<const double> chunk = returns.subspan(
            static_cast<size_t>(b * bucket), static_cast<size_t>(bucket));
        std::vector<double> density(static_cast<size_t>(grid_points), 0.0);
        double sd = stats::population_std(chunk);
        if (sd <= 0.0) {
            // degenerate bucket: a grid-cell spike at the constant value
            double v = chunk[0];
            size_t nearest = static_cast<size_t>(std::clamp(
                std::lround((v - lo) / step), 0l, static_cast<long>(grid_points - 1)));
            density[nearest] = 1.0 / step;
        } else {
            double bw = 1.06 * sd * std::pow(static_cast<double>(bucket), -0.2);
            for (int i = 0; i < grid_points; ++i) {
                double acc = 0.0;
                for (double r : chunk) {
                    double z = (out.grid[static_cast<size_t>(i)] - r) / bw;
                    acc += std::exp(-0.5 * z * z);
                }
                density[static_cast<size_t>(i)] =
                    acc / (static_cast<double>(bucket) * bw * std::sqrt(2.0 * M_PI));
            }
        }
        // trapezoid normalization on the grid
        double integral = 0.0;
        for (int i = 0; i + 1 < grid_points; ++i)
            integral += 0.5 * (density[static_cast<size_t>(i)] +
                               density[static_cast<size_t>(i + 1)]) * step;
        if (integral > 0.0)
            for (auto& v : density) v /= integral;
        out.buckets.push_back(std::move(density));
    }
    return out;
}

}  // namespace metafolio
