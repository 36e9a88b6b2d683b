#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <sstream>
#include <vector>

#include "rsrisk/errors.hpp"

// Adaptive Gauss-Kronrod (7-15) integration on finite intervals.

namespace rsrisk::quad {

namespace detail {

inline constexpr double kKronrodNodes[8] = {
    0.9914553711208126392068547, 0.9491079123427585245261897,
    0.8648644233597690727897128, 0.7415311855993944398638648,
    0.5860872354676911302941448, 0.4058451513773971669066064,
    0.2077849550078984676006894, 0.0};

inline constexpr double kKronrodWeights[8] = {
    0.0229353220105292249637320, 0.0630920926299785532907007,
    0.1047900103222501838398763, 0.1406532597155259187451896,
    0.1690047266392679028265834, 0.1903505780647854099132564,
    0.2044329400752988924141620, 0.2094821410847278280129992};

inline constexpr double kGaussWeights[4] = {
    0.1294849661688696932706114, 0.2797053914892766679014678,
    0.3818300505051189449503698, 0.4179591836734693877551020};

struct Panel {
    double a, b;
    double value;
    double error;
    bool operator<(const Panel& o) const { return error < o.error; }
};

template <typename F>
Panel gk15(const F& f, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double fk[15];
    for (int i = 0; i < 7; ++i) {
        fk[i] = f(c - h * kKronrodNodes[i]);
        fk[14 - i] = f(c + h * kKronrodNodes[i]);
    }
    fk[7] = f(c);
    double ik = 0.0;
    for (int i = 0; i < 7; ++i) ik += kKronrodWeights[i] * (fk[i] + fk[14 - i]);
    ik += kKronrodWeights[7] * fk[7];
    double ig = 0.0;
    for (int i = 0; i < 3; ++i) ig += kGaussWeights[i] * (fk[2 * i + 1] + fk[13 - 2 * i]);
    ig += kGaussWeights[3] * fk[7];
    Panel p;
    p.a = a;
    p.b = b;
    p.value = ik * h;
    p.error = std::fabs((ik - ig) * h);
    return p;
}

} // namespace detail

struct Result {
    double value = 0.0;
    double error = 0.0;
    std::size_t panels = 0;
};

// Adaptive bisection until the summed error estimate drops below abs_tol or
// the panel budget is exhausted (the caller inspects `error` in that case).
template <typename F>
Result integrate_result(const F& f, double a, double b, double abs_tol,
                        std::size_t max_panels = 4000) {
    std::priority_queue<detail::Panel> heap;
    detail::Panel root = detail::gk15(f, a, b);
    double total = root.value;
    double err = root.error;
    heap.push(root);
    while (err > abs_tol && heap.size() < max_panels) {
        const detail::Panel worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        if (mid <= worst.a || mid >= worst.b) { // interval at machine resolution
            heap.push(detail::Panel{worst.a, worst.b, worst.value, 0.0});
            err -= worst.error;
            continue;
        }
        const detail::Panel left = detail::gk15(f, worst.a, mid);
        const detail::Panel right = detail::gk15(f, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    Result r;
    r.value = total;
    r.error = err;
    r.panels = heap.size();
    return r;
}

template <typename F>
double integrate(const F& f, double a, double b, double abs_tol,
                 std::size_t max_panels = 4000) {
    const Result r = integrate_result(f, a, b, abs_tol, max_panels);
    if (r.error > abs_tol) {
        std::ostringstream os;
        os << "quadrature did not converge: requested abs tol " << abs_tol
           << ", achieved " << r.error << " with " << r.panels << " panels";
        throw NumericError(os.str());
    }
    return r.value;
}

// Integral over a list of contiguous breakpoints; tolerance is split evenly.
template <typename F>
double integrate_segments(const F& f, const std::vector<double>& pts, double abs_tol,
                          std::size_t max_panels = 4000) {
    double total = 0.0;
    const double per = abs_tol / static_cast<double>(std::max<std::size_t>(1, pts.size() - 1));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        if (pts[i] == pts[i + 1]) continue;
        total += integrate(f, pts[i], pts[i + 1], per, max_panels);
    }
    return total;
}

} // namespace rsrisk::quad
