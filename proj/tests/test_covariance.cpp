#include <gtest/gtest.h>

#include <random>

#include "metafolio/backtest.hpp"
#include "metafolio/covariance.hpp"

using namespace metafolio;

namespace {

ReturnPanel panel_from(const Eigen::MatrixXd& returns) {
    ReturnPanel p;
    long n = returns.cols();
    for (long i = 0; i < n; ++i) p.assets.push_back("A" + std::to_string(i));
    Date d{2010, 1, 1};
    for (long t = 0; t < returns.rows(); ++t) {
        p.dates.push_back(d);
        d = d.next();
    }
    p.returns = returns;
    return p;
}

/// GARCH(1,1) + constant correlation simulator.
Eigen::MatrixXd simulate_garch_cc(long T, const Eigen::MatrixXd& corr, double omega,
                                  double alpha, double beta, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const long N = corr.rows();
    Eigen::LLT<Eigen::MatrixXd> llt(corr);
    Eigen::MatrixXd L = llt.matrixL();
    Eigen::MatrixXd out(T, N);
    Eigen::VectorXd h = Eigen::VectorXd::Constant(N, omega / (1.0 - alpha - beta));
    Eigen::VectorXd eps_prev = Eigen::VectorXd::Zero(N);
    for (long t = 0; t < T; ++t) {
        if (t > 0)
            for (long n = 0; n < N; ++n)
                h[n] = omega + alpha * eps_prev[n] * eps_prev[n] + beta * h[n];
        Eigen::VectorXd z(N);
        for (long n = 0; n < N; ++n) z[n] = g(rng);
        Eigen::VectorXd corr_z = L * z;
        for (long n = 0; n < N; ++n) {
            out(t, n) = std::sqrt(h[n]) * corr_z[n];
            eps_prev[n] = out(t, n);
        }
    }
    return out;
}

Eigen::MatrixXd iid_gaussian(long T, long N, double sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sd);
    Eigen::MatrixXd out(T, N);
    for (long t = 0; t < T; ++t)
        for (long n = 0; n < N; ++n) out(t, n) = g(rng);
    return out;
}

}  // namespace

TEST(SampleCovariance, IdenticalColumns) {
    Eigen::MatrixXd r = iid_gaussian(100, 1, 0.01, 1);
    Eigen::MatrixXd both(100, 2);
    both << r, r;
    CovarianceEstimate est = sample_covariance(panel_from(both));
    EXPECT_NEAR(est.correlation(0, 1), 1.0, 1e-12);
}

TEST(SampleCovariance, AntitheticColumns) {
    Eigen::MatrixXd r = iid_gaussian(100, 1, 0.01, 2);
    Eigen::MatrixXd both(100, 2);
    both << r, -r;
    CovarianceEstimate est = sample_covariance(panel_from(both));
    EXPECT_NEAR(est.correlation(0, 1), -1.0, 1e-12);
}

TEST(SampleCovariance, RecoversKnownSigma) {
    Eigen::Matrix3d sigma;
    sigma << 4e-4, 1e-4, 0.0,
             1e-4, 2.25e-4, 0.5e-4,
             0.0, 0.5e-4, 1e-4;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::LLT<Eigen::Matrix3d> llt(sigma);
    Eigen::MatrixXd r(500, 3);
    for (long t = 0; t < 500; ++t) {
        Eigen::Vector3d z(g(rng), g(rng), g(rng));
        r.row(t) = (llt.matrixL() * z).transpose();
    }
    CovarianceEstimate est = sample_covariance(panel_from(r));
    EXPECT_LT((est.covariance - sigma).norm(), 0.1 * sigma.norm());
}

TEST(SampleCovariance, InsufficientHistory) {
    Eigen::MatrixXd r = iid_gaussian(3, 3, 0.01, 3);
    EXPECT_THROW(sample_covariance(panel_from(r)), std::runtime_error);
}

TEST(CovarianceEstimate, InvariantsHoldForAllEstimators) {
    Eigen::MatrixXd r = iid_gaussian(400, 4, 0.012, 9);
    std::string why;
    CovarianceEstimate s = sample_covariance(panel_from(r));
    EXPECT_TRUE(s.valid(&why)) << why;
    CovarianceEstimate e = ewma_covariance(panel_from(r));
    EXPECT_TRUE(e.valid(&why)) << why;
    DccParams p = fit_dcc(panel_from(r));
    CovarianceEstimate f = forecast_covariance(p, panel_from(r));
    EXPECT_TRUE(f.valid(&why)) << why;
}

TEST(FitDcc, InsufficientHistory) {
    Eigen::MatrixXd r = iid_gaussian(100, 2, 0.01, 4);
    EXPECT_THROW(fit_dcc(panel_from(r)), std::runtime_error);
}

TEST(FitDcc, IidReturnsGiveWeakDynamics) {
    Eigen::MatrixXd r = iid_gaussian(2000, 3, 0.01, 42);
    ReturnPanel panel = panel_from(r);
    DccParams p = fit_dcc(panel);
    for (const auto& g : p.garch) {
        EXPECT_LT(g.alpha, 0.08);
        EXPECT_LT(g.alpha + g.beta, 1.0);
    }
    EXPECT_LT(p.a, 0.05);
    // conditional correlation close to the sample correlation
    CovarianceEstimate fc = forecast_covariance(p, panel);
    CovarianceEstimate sc = sample_covariance(panel);
    EXPECT_LT((fc.correlation - sc.correlation).cwiseAbs().maxCoeff(), 0.05);
}

TEST(FitDcc, RecoversGarchParameters) {
    // 10-seed median recovery of (alpha, beta)
    Eigen::Matrix3d corr;
    corr << 1.0, 0.5, 0.2,
            0.5, 1.0, 0.3,
            0.2, 0.3, 1.0;
    std::vector<double> alphas, betas;
    double max_corr_err = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        Eigen::MatrixXd r = simulate_garch_cc(4000, corr, 1e-6, 0.08, 0.90, seed);
        ReturnPanel panel = panel_from(r);
        DccParams p = fit_dcc(panel);
        for (const auto& g : p.garch) {
            alphas.push_back(g.alpha);
            betas.push_back(g.beta);
        }
        CovarianceEstimate fc = forecast_covariance(p, panel);
        max_corr_err = std::max(
            max_corr_err, (fc.correlation - corr).cwiseAbs().maxCoeff());
    }
    std::sort(alphas.begin(), alphas.end());
    std::sort(betas.begin(), betas.end());
    double med_alpha = alphas[alphas.size() / 2];
    double med_beta = betas[betas.size() / 2];
    EXPECT_NEAR(med_alpha, 0.08, 0.05);
    EXPECT_NEAR(med_beta, 0.90, 0.05);
    EXPECT_LT(max_corr_err, 0.1);
}

TEST(FitDcc, IdenticalColumnsTakeFallbackPath) {
    Eigen::MatrixXd r = iid_gaussian(300, 1, 0.01, 6);
    Eigen::MatrixXd both(300, 2);
    both << r, r;
    try {
        fit_dcc(panel_from(both));
        FAIL() << "expected DccFitError";
    } catch (const DccFitError& e) {
        EXPECT_TRUE(e.use_fallback());
    }
    // the fallback estimator still produces a usable estimate
    bool fell_back = false;
    CovarianceEstimate est = estimate_covariance(
        panel_from(both), CovarianceEstimatorKind::Dcc, &fell_back);
    EXPECT_TRUE(fell_back);
    std::string why;
    EXPECT_TRUE(est.valid(&why)) << why;
}

TEST(ForecastCovariance, DynamicsOffEqualsUnconditional) {
    Eigen::MatrixXd r = iid_gaussian(500, 2, 0.01, 7);
    ReturnPanel panel = panel_from(r);
    DccParams p;
    for (long n = 0; n < 2; ++n) {
        GarchParams g;
        g.mean = panel.returns.col(n).mean();
        Eigen::VectorXd eps = panel.returns.col(n).array() - g.mean;
        g.omega = eps.squaredNorm() / 500.0;
        g.alpha = 0.0;
        g.beta = 0.0;
        p.garch.push_back(g);
    }
    p.a = 0.0;
    p.b = 0.0;
    Eigen::MatrixXd z = detail::standardized_residuals(panel.returns, p.garch);
    p.qbar = detail::sample_correlation_of(z);

    CovarianceEstimate fc = forecast_covariance(p, panel);
    for (long n = 0; n < 2; ++n)
        EXPECT_NEAR(fc.variances[n], p.garch[static_cast<size_t>(n)].omega, 1e-8);
    EXPECT_NEAR(fc.correlation(0, 1), p.qbar(0, 1), 1e-8);
}

TEST(ForecastCovariance, ShockRaisesForecastVariance) {
    Eigen::MatrixXd r = simulate_garch_cc(1500, Eigen::MatrixXd::Identity(2, 2),
                                          1e-6, 0.10, 0.85, 11);
    // inject a large shock at the window end
    r(1499, 0) = 0.08;
    ReturnPanel panel = panel_from(r);
    DccParams p = fit_dcc(panel);
    ASSERT_GT(p.garch[0].alpha, 0.0);
    CovarianceEstimate fc = forecast_covariance(p, panel);
    double uncond = p.garch[0].omega / (1.0 - p.garch[0].alpha - p.garch[0].beta);
    EXPECT_GT(fc.variances[0], uncond);
}

TEST(ForecastCovariance, IdentityGeneratorGivesNearZeroCorrelation) {
    Eigen::MatrixXd r = iid_gaussian(2000, 3, 0.01, 13);
    ReturnPanel panel = panel_from(r);
    DccParams p = fit_dcc(panel);
    CovarianceEstimate fc = forecast_covariance(p, panel);
    for (long i = 0; i < 3; ++i)
        for (long j = 0; j < i; ++j) EXPECT_NEAR(fc.correlation(i, j), 0.0, 0.1);
}

TEST(ForecastCovariance, DeterministicAndScaleEquivariant) {
    Eigen::MatrixXd r = simulate_garch_cc(600, Eigen::MatrixXd::Identity(2, 2),
                                          1e-6, 0.06, 0.9, 17);
    ReturnPanel panel = panel_from(r);
    DccParams p1 = fit_dcc(panel);
    DccParams p2 = fit_dcc(panel);
    CovarianceEstimate f1 = forecast_covariance(p1, panel);
    CovarianceEstimate f2 = forecast_covariance(p2, panel);
    EXPECT_TRUE((f1.covariance.array() == f2.covariance.array()).all());

    const double c = 3.7;
    ReturnPanel scaled = panel;
    scaled.returns *= c;
    DccParams ps = fit_dcc(scaled);
    CovarianceEstimate fs = forecast_covariance(ps, scaled);
    EXPECT_LT(((fs.covariance / (c * c)) - f1.covariance).cwiseAbs().maxCoeff() /
                  f1.covariance.cwiseAbs().maxCoeff(),
              1e-6);
    EXPECT_LT((fs.correlation - f1.correlation).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EwmaCovariance, DegenerateInputStillValid) {
    Eigen::MatrixXd r = iid_gaussian(50, 1, 0.01, 19);
    Eigen::MatrixXd both(50, 2);
    both << r, r;
    CovarianceEstimate est = ewma_covariance(panel_from(both));
    std::string why;
    EXPECT_TRUE(est.valid(&why)) << why;
}
