#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "rsrisk/errors.hpp"

// Derivative-free simplex minimizer (standard Nelder-Mead coefficients).

namespace rsrisk::nm {

struct Result {
    std::vector<double> x;
    double fx = 0.0;
    int iterations = 0;
    int evaluations = 0;
    bool converged = false;
    std::vector<double> trace; // best value after each improving iteration
};

// Minimizes f starting from x0; the initial simplex offsets each coordinate
// by `step`.  Stops when the simplex f-spread drops below
// tol * (1 + |f_best|) or after max_iter iterations.
inline Result minimize(const std::function<double(const std::vector<double>&)>& f,
                       std::vector<double> x0, double step, int max_iter, double tol) {
    const std::size_t n = x0.size();
    if (n == 0) throw ArgumentError("nelder_mead: empty start vector");

    constexpr double kReflect = 1.0;
    constexpr double kExpand = 2.0;
    constexpr double kContract = 0.5;
    constexpr double kShrink = 0.5;

    Result res;
    std::vector<std::vector<double>> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (std::size_t i = 1; i <= n; ++i) xs[i][i - 1] += step;
    for (std::size_t i = 0; i <= n; ++i) {
        fs[i] = f(xs[i]);
        ++res.evaluations;
    }

    std::vector<std::size_t> order(n + 1);
    std::vector<double> centroid(n), xr(n), xe(n), xc(n);
    double best_seen = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < max_iter; ++iter) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(),
                  [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
        const std::size_t best = order[0];
        const std::size_t worst = order[n];
        const std::size_t second_worst = order[n - 1];
        res.iterations = iter + 1;
        if (fs[best] < best_seen) {
            best_seen = fs[best];
            res.trace.push_back(best_seen);
        }
        if (std::fabs(fs[worst] - fs[best]) <= tol * (1.0 + std::fabs(fs[best]))) {
            res.converged = true;
            break;
        }

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= n; ++i) {
            if (i == worst) continue;
            for (std::size_t j = 0; j < n; ++j) centroid[j] += xs[i][j];
        }
        for (double& c : centroid) c /= static_cast<double>(n);

        for (std::size_t j = 0; j < n; ++j) {
            xr[j] = centroid[j] + kReflect * (centroid[j] - xs[worst][j]);
        }
        const double fr = f(xr);
        ++res.evaluations;

        if (fr < fs[best]) {
            for (std::size_t j = 0; j < n; ++j) {
                xe[j] = centroid[j] + kExpand * (xr[j] - centroid[j]);
            }
            const double fe = f(xe);
            ++res.evaluations;
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second_worst]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            const std::vector<double>& toward = outside ? xr : xs[worst];
            for (std::size_t j = 0; j < n; ++j) {
                xc[j] = centroid[j] + kContract * (toward[j] - centroid[j]);
            }
            const double fc = f(xc);
            ++res.evaluations;
            if (fc < (outside ? fr : fs[worst])) {
                xs[worst] = xc;
                fs[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= n; ++i) {
                    if (i == best) continue;
                    for (std::size_t j = 0; j < n; ++j) {
                        xs[i][j] = xs[best][j] + kShrink * (xs[i][j] - xs[best][j]);
                    }
                    fs[i] = f(xs[i]);
                    ++res.evaluations;
                }
            }
        }
    }

    const std::size_t best =
        static_cast<std::size_t>(std::min_element(fs.begin(), fs.end()) - fs.begin());
    res.x = xs[best];
    res.fx = fs[best];
    if (res.fx < best_seen) res.trace.push_back(res.fx);
    return res;
}

} // namespace rsrisk::nm
