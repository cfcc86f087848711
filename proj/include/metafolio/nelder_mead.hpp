// Derivative-free simplex minimizer used by the GARCH/DCC estimators.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <functional>
#include <vector>

namespace metafolio {

struct NelderMeadResult {
    Eigen::VectorXd x;
    double value = 0.0;
    int iterations = 0;
};

/// Standard Nelder-Mead on an unconstrained objective. Deterministic:
/// the initial simplex is built from fixed additive offsets, so identical
/// inputs give identical trajectories.
inline NelderMeadResult nelder_mead(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
    double step = 0.25, int max_iter = 600, double ftol = 1e-10) {
    const long n = x0.size();
    struct Vertex {
        Eigen::VectorXd x;
        double fx;
    };
    std::vector<Vertex> simplex;
    simplex.reserve(static_cast<size_t>(n) + 1);
    simplex.push_back({x0, f(x0)});
    for (long i = 0; i < n; ++i) {
        Eigen::VectorXd xi = x0;
        xi[i] += step;
        simplex.push_back({xi, f(xi)});
    }
    auto by_value = [](const Vertex& a, const Vertex& b) { return a.fx < b.fx; };

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        std::sort(simplex.begin(), simplex.end(), by_value);
        if (std::abs(simplex.back().fx - simplex.front().fx) <
            ftol * (1.0 + std::abs(simplex.front().fx)))
            break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (size_t i = 0; i + 1 < simplex.size(); ++i) centroid += simplex[i].x;
        centroid /= static_cast<double>(n);
        Vertex& worst = simplex.back();

        Eigen::VectorXd xr = centroid + (centroid - worst.x);
        double fr = f(xr);
        if (fr < simplex.front().fx) {
            Eigen::VectorXd xe = centroid + 2.0 * (centroid - worst.x);
            double fe = f(xe);
            if (fe < fr)
                worst = {xe, fe};
            else
                worst = {xr, fr};
        } else if (fr < simplex[simplex.size() - 2].fx) {
            worst = {xr, fr};
        } else {
            Eigen::VectorXd xc = centroid + 0.5 * (worst.x - centroid);
            double fc = f(xc);
            if (fc < worst.fx) {
                worst = {xc, fc};
            } else {
                // shrink toward the best vertex
                for (size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i].x = simplex[0].x + 0.5 * (simplex[i].x - simplex[0].x);
                    simplex[i].fx = f(simplex[i].x);
                }
            }
        }
    }
    std::sort(simplex.begin(), simplex.end(), by_value);
    return {simplex.front().x, simplex.front().fx, iter};
}

}  // namespace metafolio
