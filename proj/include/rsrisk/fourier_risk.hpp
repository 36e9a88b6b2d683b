#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <sstream>
#include <vector>

#include "rsrisk/fft.hpp"
#include "rsrisk/ghyp.hpp"
#include "rsrisk/quadrature.hpp"
#include "rsrisk/regime.hpp"

// Risk-measure engine: distribution function by damped Fourier inversion on
// an FFT grid, a single-point adaptive-quadrature variant used as the
// refinement oracle, VaR by bracketed root search and expected shortfall from
// the transformed truncated first moment.

namespace rsrisk {

// A characteristic function together with its strip of regularity.
struct CharFn {
    std::function<std::complex<double>(std::complex<double>)> phi;
    Strip strip;
};

inline CharFn make_char_fn(const GhypDist& dist) {
    return CharFn{[dist](std::complex<double> u) { return dist.cf(u); }, dist.strip()};
}

struct InversionConfig {
    std::size_t grid_size = 1 << 14; // power of two
    double freq_step = 0.0;          // Delta v of the frequency grid
    double damping = 0.0;            // contour shift (the transform's delta)
    double center = 0.0;             // y-grid center

    void validate() const {
        if (!fft::is_power_of_two(grid_size) || grid_size < 8) {
            throw ConfigError("inversion: grid_size must be a power of two >= 8");
        }
        if (!(freq_step > 0.0)) throw ConfigError("inversion: freq_step must be positive");
        if (!(damping > 0.0)) throw ConfigError("inversion: damping must be positive");
    }
};

// Distribution function sampled on an ascending y grid.
struct CdfCurve {
    std::vector<double> y;
    std::vector<double> F;

    double y_min() const { return y.front(); }
    double y_max() const { return y.back(); }

    // Linear interpolation; only used for bracketing, never as a final value.
    double interpolate(double yq) const {
        if (yq <= y.front()) return F.front();
        if (yq >= y.back()) return F.back();
        const auto it = std::upper_bound(y.begin(), y.end(), yq);
        const std::size_t j = static_cast<std::size_t>(it - y.begin());
        const double t = (yq - y[j - 1]) / (y[j] - y[j - 1]);
        return F[j - 1] + t * (F[j] - F[j - 1]);
    }
};

namespace detail {

inline void check_damping(const CharFn& cf, double damping) {
    if (!(damping > 0.0) || !(damping < cf.strip.upper)) {
        std::ostringstream os;
        os << "damping " << damping << " outside the usable strip (0, " << cf.strip.upper << ")";
        throw StripError(os.str());
    }
}

// Integral over v in [0, inf) of a damped-transform integrand.  The upper
// limit is chosen by the integrand's remaining-contribution size, and the
// initial panels are sized against the e^{-ivy} oscillation so the adaptive
// error estimate never sees a panel spanning thousands of periods.
template <typename F, typename M>
double transform_integral(const F& integrand, const M& magnitude, double y, double tol_i,
                          const char* what) {
    double v_hi = 1.0;
    while (magnitude(v_hi) * (1.0 + v_hi) > tol_i / 8.0 && v_hi < 1e8) v_hi *= 2.0;
    if (v_hi >= 1e8) {
        throw NumericError(std::string(what) + ": characteristic function decays too slowly");
    }
    const double per_osc = 2.0 * kPi / std::max(std::fabs(y), 1e-12);
    const std::size_t n0 = static_cast<std::size_t>(
        std::min(256.0, std::max(1.0, std::ceil(v_hi / (4.0 * per_osc)))));
    std::vector<double> pts(n0 + 1);
    for (std::size_t i = 0; i <= n0; ++i) {
        pts[i] = v_hi * static_cast<double>(i) / static_cast<double>(n0);
    }
    double total = 0.0, err = 0.0;
    const double per = tol_i / static_cast<double>(n0);
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        const auto res = quad::integrate_result(integrand, pts[i], pts[i + 1], per, 40000 / n0 + 64);
        total += res.value;
        err += res.error;
    }
    if (err > tol_i * 4.0) {
        std::ostringstream os;
        os << what << " quadrature did not converge: requested " << tol_i << ", achieved " << err;
        throw NumericError(os.str());
    }
    return total;
}

} // namespace detail

// Distribution function on the config's y grid via the damped transform
//   F(y) = e^{dy}/(2pi) int e^{-ivy} phi(v+id) / (d-iv) dv
// discretized with Simpson weights and evaluated by FFT.  The frequency grid
// is internally refined so that the emitted y range sits well inside the
// transform's Nyquist window (the outer part of a raw FFT grid is unusable,
// so it is computed but not emitted).
inline CdfCurve cdf_fft(const CharFn& cf, const InversionConfig& cfg) {
    constexpr std::size_t kRefine = 8;
    cfg.validate();
    detail::check_damping(cf, cfg.damping);
    const std::size_t n = cfg.grid_size;
    const std::size_t n_int = n * kRefine;
    const double dv = cfg.freq_step;
    const double dv_int = dv / static_cast<double>(kRefine);
    const double dy = 2.0 * kPi / (static_cast<double>(n) * dv); // also the internal spacing
    const std::complex<double> shift(0.0, cfg.damping);

    // truncation check at both frequency-grid edges
    const double v_edge = (static_cast<double>(n) / 2.0) * dv;
    for (double v : {-v_edge, v_edge - dv}) {
        const double mod = std::abs(cf.phi(std::complex<double>(v, 0.0) + shift));
        if (mod > 1e-12) {
            std::ostringstream os;
            os << "inversion grid too narrow: |phi| = " << mod << " at v = " << v
               << " (grid_size * freq_step must cover the cf decay)";
            throw ConfigError(os.str());
        }
    }

    std::vector<std::complex<double>> work(n_int);
    for (std::size_t j = 0; j < n_int; ++j) {
        const double v =
            (static_cast<double>(j) - static_cast<double>(n_int) / 2.0) * dv_int;
        const std::complex<double> psi =
            cf.phi(std::complex<double>(v, cfg.damping)) / std::complex<double>(cfg.damping, -v);
        double w = (3.0 + (j % 2 == 0 ? -1.0 : 1.0)) / 3.0; // composite Simpson
        if (j == 0) w = 1.0 / 3.0;
        const double sign = (j % 2 == 0) ? 1.0 : -1.0; // (-1)^j centers the y grid
        work[j] = w * dv_int * sign *
                  std::exp(std::complex<double>(0.0, -v * cfg.center)) * psi;
    }
    fft::transform(work);

    CdfCurve curve;
    curve.y.resize(n);
    curve.F.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        // central n outputs of the refined grid: same spacing, same span
        const std::size_t k_int = n_int / 2 - n / 2 + k;
        const double yk = cfg.center + (static_cast<double>(k) - static_cast<double>(n) / 2.0) * dy;
        const double sign = (k_int % 2 == 0) ? 1.0 : -1.0;
        curve.y[k] = yk;
        curve.F[k] = std::exp(cfg.damping * yk) / (2.0 * kPi) * sign * work[k_int].real();
    }

    // invariant checks, then the documented cleanup: clamp to [0,1] and pool
    // sub-tolerance dips so the curve is nondecreasing
    double runmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        if (curve.F[k] < -1e-6 || curve.F[k] > 1.0 + 1e-6) {
            std::ostringstream os;
            os << "cdf_fft: value " << curve.F[k] << " at y = " << curve.y[k]
               << " outside [0,1] beyond tolerance; adjust damping or grid";
            throw NumericError(os.str());
        }
        const double clamped = std::min(1.0, std::max(0.0, curve.F[k]));
        if (clamped < runmax - 1e-8) {
            std::ostringstream os;
            os << "cdf_fft: monotonicity violated by " << runmax - clamped << " at y = "
               << curve.y[k];
            throw NumericError(os.str());
        }
        runmax = std::max(runmax, clamped);
        curve.F[k] = runmax;
    }
    return curve;
}

// Single-point evaluation of the same transform by adaptive quadrature;
// serves as the refinement oracle for the FFT grid.
inline double cdf_point(const CharFn& cf, double y, double damping, double abs_tol = 1e-10) {
    detail::check_damping(cf, damping);
    auto integrand = [&](double v) {
        const std::complex<double> val =
            cf.phi(std::complex<double>(v, damping)) / std::complex<double>(damping, -v);
        return (std::exp(std::complex<double>(0.0, -v * y)) * val).real();
    };
    auto magnitude = [&](double v) {
        return std::abs(cf.phi(std::complex<double>(v, damping))) / std::hypot(damping, v);
    };
    const double outer = std::exp(damping * y) / kPi;
    // tolerance in integral space, floored near machine resolution
    const double tol_i = std::max(abs_tol / std::max(outer, 1e-300), 1e-15);
    const double value = detail::transform_integral(integrand, magnitude, y, tol_i, "cdf_point");
    return outer * value;
}

namespace detail {

// Bracketed root refinement against cdf_point: guarded secant falling back to
// bisection, certified to |F(y) - level| < tol.
inline double refine_quantile(const CharFn& cf, double level, double damping, double y_lo,
                              double y_hi, double f_lo, double f_hi, double tol = 1e-8) {
    double g_lo = f_lo - level;
    double g_hi = f_hi - level;
    if (g_lo > 0.0 || g_hi < 0.0) throw NumericError("quantile refinement: invalid bracket");
    for (int iter = 0; iter < 200; ++iter) {
        double y_mid;
        if (iter % 2 == 0 && g_hi - g_lo > 0.0) {
            y_mid = y_lo - g_lo * (y_hi - y_lo) / (g_hi - g_lo); // secant
            const double pad = 0.05 * (y_hi - y_lo);
            y_mid = std::min(std::max(y_mid, y_lo + pad), y_hi - pad);
        } else {
            y_mid = 0.5 * (y_lo + y_hi); // guaranteed geometric shrink
        }
        if (!(y_mid > y_lo && y_mid < y_hi)) y_mid = 0.5 * (y_lo + y_hi);
        const double g_mid = cdf_point(cf, y_mid, damping, tol * 0.01) - level;
        if (std::fabs(g_mid) < tol) return y_mid;
        if (g_mid > 0.0) {
            y_hi = y_mid;
            g_hi = g_mid;
        } else {
            y_lo = y_mid;
            g_lo = g_mid;
        }
    }
    throw NumericError("quantile refinement did not converge");
}

} // namespace detail

// Value-at-risk: the level-quantile of the return distribution, bracketed on
// the FFT grid and certified against cdf_point.
inline double value_at_risk(const CharFn& cf, double level, const InversionConfig& cfg) {
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("value_at_risk: level must be in (0,1)");
    const CdfCurve curve = cdf_fft(cf, cfg);
    const auto it = std::lower_bound(curve.F.begin(), curve.F.end(), level);
    if (it == curve.F.begin() || it == curve.F.end()) {
        std::ostringstream os;
        os << "level " << level << " outside the grid's F range [" << curve.F.front() << ", "
           << curve.F.back() << "]; widen the grid (larger grid_size or smaller freq_step)";
        throw ConfigError(os.str());
    }
    const std::size_t k = static_cast<std::size_t>(it - curve.F.begin());
    // certified bracket endpoints from the quadrature oracle
    double y_lo = curve.y[k - 1], y_hi = curve.y[k];
    double f_lo = cdf_point(cf, y_lo, cfg.damping);
    double f_hi = cdf_point(cf, y_hi, cfg.damping);
    // grid values are ~1e-7 accurate; walk outward if the oracle disagrees
    while (f_lo > level) {
        y_lo -= (y_hi - y_lo);
        f_lo = cdf_point(cf, y_lo, cfg.damping);
    }
    while (f_hi < level) {
        y_hi += (y_hi - y_lo);
        f_hi = cdf_point(cf, y_hi, cfg.damping);
    }
    return detail::refine_quantile(cf, level, cfg.damping, y_lo, y_hi, f_lo, f_hi);
}

enum class EsNormalization {
    lower_tail, // divide the tail integral by F(VaR) = level
    paper       // divide by 1 - level
};

// Truncated first moment E[X 1{X <= y}] via the integrated-by-parts damped
// transform.
inline double tail_expectation(const CharFn& cf, double y, double damping,
                               double abs_tol = 1e-10) {
    detail::check_damping(cf, damping);
    auto integrand = [&](double v) {
        const std::complex<double> d(damping, -v);
        const std::complex<double> val =
            (d * y - 1.0) / (d * d) * cf.phi(std::complex<double>(v, damping));
        return (std::exp(std::complex<double>(0.0, -v * y)) * val).real();
    };
    auto magnitude = [&](double v) {
        const double dm = std::hypot(damping, v);
        return std::abs(cf.phi(std::complex<double>(v, damping))) *
               (dm * std::fabs(y) + 1.0) / (dm * dm);
    };
    const double outer = std::exp(damping * y) / kPi;
    const double tol_i = std::max(abs_tol / std::max(outer, 1e-300), 1e-15);
    const double value =
        detail::transform_integral(integrand, magnitude, y, tol_i, "tail_expectation");
    return outer * value;
}

// Expected shortfall at the given VaR.  The lower-tail normalization divides
// by F(VaR) = level, consistent with ES = E[X | X <= VaR]; `paper` keeps the
// 1/(1-level) prefactor for reproducing that convention.
inline double expected_shortfall(const CharFn& cf, double level, double var,
                                 const InversionConfig& cfg,
                                 EsNormalization norm = EsNormalization::lower_tail) {
    if (!(level > 0.0 && level < 1.0)) {
        throw ArgumentError("expected_shortfall: level must be in (0,1)");
    }
    const double tail = tail_expectation(cf, var, cfg.damping);
    return norm == EsNormalization::lower_tail ? tail / level : tail / (1.0 - level);
}

// Half the upper strip edge of the asset's two-state mixture: strictly inside
// both states' strips, so every needed cf evaluation at v + i*damping exists.
inline double select_damping(const RegimeModel& model, std::size_t asset) {
    model.validate();
    if (asset >= model.assets.size()) throw ArgumentError("select_damping: bad asset index");
    const auto& a = model.assets[asset];
    return 0.5 * std::min(a.state1.beta + a.state1.alpha, a.state2.beta + a.state2.alpha);
}

// Precomputed per-state inversion for one (model, asset, horizon): the
// N-period cf is linear in the posterior, so the two conditional curves are
// built once and every forecast mixes them.
class RiskEngine {
public:
    RiskEngine(const RegimeModel& model, std::size_t asset, int horizon,
               InversionConfig cfg = InversionConfig{})
        : transitions_(model.transitions),
          d1_(model.assets.at(asset).state1),
          d2_(model.assets.at(asset).state2),
          horizon_(horizon),
          cfg_(cfg) {
        model.validate();
        if (horizon_ < 1) throw ArgumentError("risk engine: horizon must be >= 1");
        const auto& a = model.assets[asset];
        strip_ = a.state1.strip().intersect(a.state2.strip());
        if (cfg_.damping <= 0.0) cfg_.damping = select_damping(model, asset);

        // scale-aware grid defaults: E|X - mean| as the spread proxy
        const double spread = std::max(mean_abs_deviation(d1_, a.common_mean),
                                       mean_abs_deviation(d2_, a.common_mean));
        const double root_n = std::sqrt(static_cast<double>(horizon_));
        if (cfg_.center == 0.0) cfg_.center = a.common_mean * horizon_;
        if (cfg_.freq_step <= 0.0) {
            // covers quantile levels down to ~1e-3 while keeping the damped
            // transform's roundoff amplification e^{damping * y} small
            const double half_span = 16.0 * spread * root_n + 6.0 * spread;
            cfg_.freq_step = kPi / half_span;
        }

        cond_[0] = CharFn{[this](std::complex<double> u) { return conditional_cfs(u).first; },
                          strip_};
        cond_[1] = CharFn{[this](std::complex<double> u) { return conditional_cfs(u).second; },
                          strip_};
        curves_[0] = cdf_fft(cond_[0], cfg_);
        curves_[1] = cdf_fft(cond_[1], cfg_);
    }

    const InversionConfig& config() const { return cfg_; }

    CharFn mixture_cf(const Posterior& p) const {
        return CharFn{[this, p](std::complex<double> u) {
                          const auto [m1, m2] = conditional_cfs(u);
                          return p.p1 * m1 + p.p2 * m2;
                      },
                      strip_};
    }

    struct Forecast {
        double var = 0.0;
        double es = 0.0;
    };

    double var(const Posterior& p, double level) const {
        p.validate();
        if (!(level > 0.0 && level < 1.0)) throw ArgumentError("var: level must be in (0,1)");
        const auto& ys = curves_[0].y;
        const std::size_t n = ys.size();
        // bracket on the mixed grid curve
        std::size_t k = 0;
        while (k < n && p.p1 * curves_[0].F[k] + p.p2 * curves_[1].F[k] < level) ++k;
        if (k == 0 || k == n) {
            throw ConfigError("var: level outside the grid's F range; widen the grid");
        }
        const CharFn mix = mixture_cf(p);
        double y_lo = ys[k - 1], y_hi = ys[k];
        double f_lo = cdf_point(mix, y_lo, cfg_.damping);
        double f_hi = cdf_point(mix, y_hi, cfg_.damping);
        while (f_lo > level) {
            y_lo -= (y_hi - y_lo);
            f_lo = cdf_point(mix, y_lo, cfg_.damping);
        }
        while (f_hi < level) {
            y_hi += (y_hi - y_lo);
            f_hi = cdf_point(mix, y_hi, cfg_.damping);
        }
        return detail::refine_quantile(mix, level, cfg_.damping, y_lo, y_hi, f_lo, f_hi);
    }

    Forecast var_es(const Posterior& p, double level,
                    EsNormalization norm = EsNormalization::lower_tail) const {
        Forecast out;
        out.var = var(p, level);
        out.es = expected_shortfall(mixture_cf(p), level, out.var, cfg_, norm);
        return out;
    }

private:
    // characteristic functions of the N-period return conditional on each
    // current state: (P diag(phi1, phi2))^N 1
    std::pair<std::complex<double>, std::complex<double>> conditional_cfs(
        std::complex<double> u) const {
        const std::complex<double> phi1 = d1_.cf(u);
        const std::complex<double> phi2 = d2_.cf(u);
        const std::complex<double> m[2][2] = {
            {transitions_.p11 * phi1, transitions_.p12() * phi2},
            {transitions_.p21() * phi1, transitions_.p22 * phi2}};
        std::complex<double> v1(1.0, 0.0), v2(1.0, 0.0);
        for (int n = 0; n < horizon_; ++n) {
            const std::complex<double> n1 = m[0][0] * v1 + m[0][1] * v2;
            const std::complex<double> n2 = m[1][0] * v1 + m[1][1] * v2;
            v1 = n1;
            v2 = n2;
        }
        return {v1, v2};
    }

    TransitionMatrix transitions_;
    GhypDist d1_;
    GhypDist d2_;
    int horizon_;
    InversionConfig cfg_;
    Strip strip_;
    CharFn cond_[2];
    CdfCurve curves_[2];
};

} // namespace rsrisk
