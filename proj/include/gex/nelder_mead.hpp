#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace gex {

struct NelderMeadOptions {
    double tol = 1e-8;        // convergence tolerance on the objective spread
    int max_iter = 5000;
    double initial_step = 0.1;  // per-coordinate simplex offset
    std::vector<double>* trace = nullptr;  // per-iteration best objective, if set
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fval = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    double simplex_spread = std::numeric_limits<double>::infinity();
};

// Minimises f over R^n from x0. f may return +inf to reject a candidate.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0,
                                    const NelderMeadOptions& opts = {}) {
    const int n = static_cast<int>(x0.size());
    const double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;

    std::vector<Eigen::VectorXd> pts(n + 1, x0);
    std::vector<double> fv(n + 1);
    fv[0] = f(pts[0]);
    for (int i = 0; i < n; ++i) {
        double step = opts.initial_step;
        if (std::fabs(x0[i]) > 1.0) step *= std::fabs(x0[i]);
        // keep each starting vertex inside the feasible region when the
        // objective rejects it; a hard constraint boundary may sit arbitrarily
        // close to x0 along this coordinate
        for (int tries = 0; tries < 60; ++tries) {
            pts[i + 1][i] = x0[i] + step;
            fv[i + 1] = f(pts[i + 1]);
            if (std::isfinite(fv[i + 1]) || !std::isfinite(fv[0])) break;
            step *= 0.5;
        }
    }

    std::vector<int> order(n + 1);
    NelderMeadResult res;
    for (res.iterations = 0; res.iterations < opts.max_iter; ++res.iterations) {
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        const int lo = order[0], hi = order[n], next_hi = order[n - 1];
        if (opts.trace) opts.trace->push_back(fv[lo]);

        res.simplex_spread = std::fabs(fv[hi] - fv[lo]);
        if (std::isfinite(fv[lo]) && std::isfinite(fv[hi]) &&
            res.simplex_spread <= opts.tol * (std::fabs(fv[lo]) + opts.tol)) {
            res.converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int i = 0; i <= n; ++i)
            if (i != hi) centroid += pts[i];
        centroid /= n;

        const Eigen::VectorXd xr = centroid + alpha * (centroid - pts[hi]);
        const double fr = f(xr);
        if (fr < fv[lo]) {
            const Eigen::VectorXd xe = centroid + gamma * (xr - centroid);
            const double fe = f(xe);
            if (fe < fr) {
                pts[hi] = xe;
                fv[hi] = fe;
            } else {
                pts[hi] = xr;
                fv[hi] = fr;
            }
        } else if (fr < fv[next_hi]) {
            pts[hi] = xr;
            fv[hi] = fr;
        } else {
            const bool outside = fr < fv[hi];
            const Eigen::VectorXd base = outside ? xr : pts[hi];
            const Eigen::VectorXd xc = centroid + rho * (base - centroid);
            const double fc = f(xc);
            if (fc < std::min(fr, fv[hi])) {
                pts[hi] = xc;
                fv[hi] = fc;
            } else {
                for (int i = 0; i <= n; ++i) {
                    if (i == lo) continue;
                    pts[i] = pts[lo] + sigma * (pts[i] - pts[lo]);
                    fv[i] = f(pts[i]);
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i <= n; ++i)
        if (fv[i] < fv[best]) best = i;
    res.x = pts[best];
    res.fval = fv[best];
    return res;
}

}  // namespace gex
