// Time-varying covariance estimation: per-asset GARCH(1,1) with DCC
// correlation dynamics, plus sample and EWMA estimators.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "metafolio/dates.hpp"
#include "metafolio/market_data.hpp"
#include "metafolio/nelder_mead.hpp"

namespace metafolio {

/// One conditional covariance snapshot. correlation[i][j] equals
/// covariance[i][j] / sqrt(var_i * var_j).
struct CovarianceEstimate {
    Date as_of;
    Eigen::MatrixXd covariance;
    Eigen::MatrixXd correlation;
    Eigen::VectorXd variances;

    long size() const { return variances.size(); }

    /// Checks the type invariants: symmetry, PSD within tolerance,
    /// unit diagonal, consistent correlation.
    bool valid(std::string* why = nullptr) const;
};

struct GarchParams {
    double omega = 0.0;  // > 0
    double alpha = 0.0;  // >= 0
    double beta = 0.0;   // >= 0, alpha + beta < 1
    double mean = 0.0;   // constant mean of the fitted series
};

/// Fitted DCC model: univariate GARCH(1,1) per asset plus correlation
/// dynamics Q_t = (1-a-b) Qbar + a z z' + b Q_{t-1}.
struct DccParams {
    std::vector<GarchParams> garch;
    double a = 0.0;
    double b = 0.0;
    Eigen::MatrixXd qbar;
};

/// Thrown when the DCC estimator cannot produce valid parameters.
/// `use_fallback` signals that the caller should switch to the EWMA
/// estimator rather than abort the walk-forward.
class DccFitError : public std::runtime_error {
public:
    explicit DccFitError(const std::string& msg, bool use_fallback = true)
        : std::runtime_error(msg), use_fallback_(use_fallback) {}
    bool use_fallback() const { return use_fallback_; }

private:
    bool use_fallback_;
};

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

constexpr double kMaxPersistence = 0.999;
constexpr double kDegenerateVariance = 1e-12;

/// GARCH(1,1) conditional variances, h_1 initialized at the sample variance.
inline Eigen::VectorXd garch_variances(const Eigen::VectorXd& eps,
                                       const GarchParams& p) {
    const long T = eps.size();
    Eigen::VectorXd h(T);
    double var0 = eps.squaredNorm() / static_cast<double>(T);
    h[0] = var0;
    for (long t = 1; t < T; ++t)
        h[t] = p.omega + p.alpha * eps[t - 1] * eps[t - 1] + p.beta * h[t - 1];
    return h;
}

inline double garch_nll(const Eigen::VectorXd& eps, const GarchParams& p) {
    Eigen::VectorXd h = garch_variances(eps, p);
    double nll = 0.0;
    for (long t = 0; t < eps.size(); ++t) {
        if (!(h[t] > 0.0)) return 1e30;
        nll += std::log(h[t]) + eps[t] * eps[t] / h[t];
    }
    return 0.5 * nll;
}

inline GarchParams decode_garch(const Eigen::VectorXd& x) {
    GarchParams p;
    p.omega = std::exp(x[0]);
    double s = kMaxPersistence * sigmoid(x[1]);
    double r = sigmoid(x[2]);
    p.alpha = s * r;
    p.beta = s * (1.0 - r);
    return p;
}

}  // namespace detail

/// QMLE fit of a univariate GARCH(1,1) with constant mean. The series is
/// standardized internally so the fitted (alpha, beta) are scale-free.
inline GarchParams fit_garch(const Eigen::VectorXd& series) {
    const long T = series.size();
    if (T < 50) throw std::runtime_error("insufficient history");
    GarchParams out;
    out.mean = series.mean();
    Eigen::VectorXd eps = series.array() - out.mean;
    double var = eps.squaredNorm() / static_cast<double>(T);
    if (var < detail::kDegenerateVariance)
        throw DccFitError("degenerate variance");
    double scale = std::sqrt(var);
    Eigen::VectorXd z = eps / scale;  // unit variance

    Eigen::VectorXd x0(3);
    double s0 = 0.95, r0 = 0.05 / 0.95;
    x0[0] = std::log(1.0 - s0);  // variance targeting at unit variance
    x0[1] = detail::logit(s0 / detail::kMaxPersistence);
    x0[2] = detail::logit(r0);

    auto obj = [&](const Eigen::VectorXd& x) {
        return detail::garch_nll(z, detail::decode_garch(x));
    };
    auto res = nelder_mead(obj, x0, 0.4, 800, 1e-12);
    GarchParams p = detail::decode_garch(res.x);
    out.omega = p.omega * var;
    out.alpha = p.alpha;
    out.beta = p.beta;
    return out;
}

namespace detail {

/// Standardized residuals z_t = eps_t / sqrt(h_t) for each asset column.
inline Eigen::MatrixXd standardized_residuals(const Eigen::MatrixXd& returns,
                                              const std::vector<GarchParams>& garch) {
    const long T = returns.rows(), N = returns.cols();
    Eigen::MatrixXd z(T, N);
    for (long n = 0; n < N; ++n) {
        Eigen::VectorXd eps = returns.col(n).array() - garch[static_cast<size_t>(n)].mean;
        Eigen::VectorXd h = garch_variances(eps, garch[static_cast<size_t>(n)]);
        z.col(n) = eps.array() / h.array().sqrt();
    }
    return z;
}

inline Eigen::MatrixXd sample_correlation_of(const Eigen::MatrixXd& z) {
    const long T = z.rows(), N = z.cols();
    Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(T - 1);
    Eigen::VectorXd sd = cov.diagonal().array().sqrt();
    Eigen::MatrixXd corr(N, N);
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < N; ++j) corr(i, j) = cov(i, j) / (sd[i] * sd[j]);
    corr.diagonal().setOnes();
    return corr;
}

/// Negative log-likelihood of the DCC correlation stage on residuals z.
inline double dcc_nll(const Eigen::MatrixXd& z, const Eigen::MatrixXd& qbar,
                      double a, double b) {
    const long T = z.rows(), N = z.cols();
    Eigen::MatrixXd q = qbar;
    double nll = 0.0;
    for (long t = 0; t < T; ++t) {
        if (t > 0) {
            Eigen::VectorXd zp = z.row(t - 1);
            q = (1.0 - a - b) * qbar + a * (zp * zp.transpose()) + b * q;
        }
        Eigen::VectorXd d = q.diagonal().array().sqrt();
        Eigen::MatrixXd r = q.array() / (d * d.transpose()).array();
        Eigen::LLT<Eigen::MatrixXd> llt(r);
        if (llt.info() != Eigen::Success) return 1e30;
        double logdet = 0.0;
        for (long i = 0; i < N; ++i) logdet += 2.0 * std::log(llt.matrixL()(i, i));
        Eigen::VectorXd zi = z.row(t);
        double quad = zi.dot(llt.solve(zi));
        nll += logdet + quad - zi.squaredNorm();
    }
    return 0.5 * nll;
}

}  // namespace detail

/// Two-stage QMLE: univariate GARCH(1,1) per asset, then (a, b) on the
/// standardized residuals with Qbar fixed at their sample correlation.
inline DccParams fit_dcc(const ReturnPanel& window) {
    const long T = window.rows(), N = window.cols();
    if (T < 250) throw std::runtime_error("insufficient history");
    if (N < 2) throw std::runtime_error("insufficient assets");

    DccParams params;
    params.garch.reserve(static_cast<size_t>(N));
    for (long n = 0; n < N; ++n) params.garch.push_back(fit_garch(window.returns.col(n)));

    Eigen::MatrixXd z = detail::standardized_residuals(window.returns, params.garch);
    params.qbar = detail::sample_correlation_of(z);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(params.qbar);
    if (es.eigenvalues().minCoeff() < 1e-10)
        throw DccFitError("dcc fit failed: degenerate unconditional correlation");

    Eigen::VectorXd x0(2);
    double s0 = 0.97, r0 = 0.02 / 0.97;
    x0[0] = detail::logit(s0 / detail::kMaxPersistence);
    x0[1] = detail::logit(r0);
    auto obj = [&](const Eigen::VectorXd& x) {
        double s = detail::kMaxPersistence * detail::sigmoid(x[0]);
        double r = detail::sigmoid(x[1]);
        return detail::dcc_nll(z, params.qbar, s * r, s * (1.0 - r));
    };
    auto res = nelder_mead(obj, x0, 0.5, 300, 1e-10);
    if (res.value >= 1e29) throw DccFitError("dcc fit failed: optimizer diverged");
    double s = detail::kMaxPersistence * detail::sigmoid(res.x[0]);
    double r = detail::sigmoid(res.x[1]);
    params.a = s * r;
    params.b = s * (1.0 - r);
    return params;
}

/// Clip negative eigenvalues and rebuild; correlation diagonal renormalized
/// by the caller where needed.
inline Eigen::MatrixXd psd_repair(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(1e-10);
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

namespace detail {

inline CovarianceEstimate estimate_from_covariance(const Date& as_of,
                                                   Eigen::MatrixXd cov) {
    cov = 0.5 * (cov + cov.transpose().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.eigenvalues().minCoeff() < -1e-8 * es.eigenvalues().maxCoeff())
        cov = psd_repair(cov);
    CovarianceEstimate est;
    est.as_of = as_of;
    est.covariance = cov;
    est.variances = cov.diagonal();
    const long N = cov.rows();
    est.correlation.resize(N, N);
    Eigen::VectorXd sd = est.variances.array().sqrt();
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < N; ++j)
            est.correlation(i, j) = cov(i, j) / (sd[i] * sd[j]);
    est.correlation.diagonal().setOnes();
    // rounding can push off-diagonals just past 1
    est.correlation = est.correlation.cwiseMin(1.0).cwiseMax(-1.0);
    for (long i = 0; i < N; ++i)
        for (long j = 0; j < N; ++j)
            est.covariance(i, j) = est.correlation(i, j) * sd[i] * sd[j];
    return est;
}

}  // namespace detail

/// One-step-ahead conditional covariance H = D R D from fitted DCC params.
inline CovarianceEstimate forecast_covariance(const DccParams& params,
                                              const ReturnPanel& window) {
    const long T = window.rows(), N = window.cols();
    if (static_cast<long>(params.garch.size()) != N)
        throw std::runtime_error("asset mismatch");

    Eigen::VectorXd h_next(N);
    Eigen::MatrixXd z = detail::standardized_residuals(window.returns, params.garch);
    for (long n = 0; n < N; ++n) {
        const GarchParams& g = params.garch[static_cast<size_t>(n)];
        Eigen::VectorXd eps = window.returns.col(n).array() - g.mean;
        Eigen::VectorXd h = detail::garch_variances(eps, g);
        h_next[n] = g.omega + g.alpha * eps[T - 1] * eps[T - 1] + g.beta * h[T - 1];
    }

    Eigen::MatrixXd q = params.qbar;
    for (long t = 1; t <= T; ++t) {
        Eigen::VectorXd zp = z.row(t - 1);
        q = (1.0 - params.a - params.b) * params.qbar +
            params.a * (zp * zp.transpose()) + params.b * q;
    }
    Eigen::VectorXd qd = q.diagonal().array().sqrt();
    Eigen::MatrixXd r = q.array() / (qd * qd.transpose()).array();

    Eigen::VectorXd d = h_next.array().sqrt();
    Eigen::MatrixXd cov = r.array() * (d * d.transpose()).array();
    return detail::estimate_from_covariance(window.dates.back(), cov);
}

/// Unbiased sample covariance of the window.
inline CovarianceEstimate sample_covariance(const ReturnPanel& window) {
    const long T = window.rows(), N = window.cols();
    if (T < N + 1) throw std::runtime_error("insufficient history");
    Eigen::MatrixXd centered = window.returns.rowwise() - window.returns.colwise().mean();
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(T - 1);
    return detail::estimate_from_covariance(window.dates.back(), cov);
}

/// Exponentially weighted covariance, the fallback when the DCC fit fails.
inline CovarianceEstimate ewma_covariance(const ReturnPanel& window,
                                          double decay = 0.94) {
    const long T = window.rows(), N = window.cols();
    if (T < 2) throw std::runtime_error("insufficient history");
    Eigen::RowVectorXd mu = window.returns.colwise().mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(N, N);
    double wsum = 0.0, w = 1.0;
    for (long t = T - 1; t >= 0; --t) {
        Eigen::VectorXd x = (window.returns.row(t) - mu).transpose();
        cov += w * (x * x.transpose());
        wsum += w;
        w *= decay;
    }
    cov /= wsum;
    return detail::estimate_from_covariance(window.dates.back(), cov);
}

inline bool CovarianceEstimate::valid(std::string* why) const {
    const long N = size();
    auto fail = [&](const std::string& msg) {
        if (why) *why = msg;
        return false;
    };
    if (covariance.rows() != N || covariance.cols() != N ||
        correlation.rows() != N || correlation.cols() != N)
        return fail("shape mismatch");
    for (long i = 0; i < N; ++i) {
        if (correlation(i, i) != 1.0) return fail("correlation diagonal not 1");
        for (long j = 0; j < N; ++j) {
            if (std::abs(covariance(i, j) - covariance(j, i)) > 1e-10)
                return fail("covariance not symmetric");
            if (correlation(i, j) < -1.0 || correlation(i, j) > 1.0)
                return fail("correlation out of range");
            double expect = covariance(i, j) / std::sqrt(variances[i] * variances[j]);
            if (std::abs(correlation(i, j) - expect) > 1e-10)
                return fail("correlation inconsistent with covariance");
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
    if (es.eigenvalues().minCoeff() < -1e-8 * es.eigenvalues().maxCoeff())
        return fail("covariance not PSD");
    return true;
}

}  // namespace metafolio
