#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <vector>

#include "rsrisk/bessel.hpp"
#include "rsrisk/errors.hpp"
#include "rsrisk/rng.hpp"

namespace rsrisk {

inline constexpr double kPi = 3.141592653589793238462643383279502884;

// Open band of admissible imaginary parts for an analytically continued
// characteristic function.
struct Strip {
    double lower = 0.0;
    double upper = 0.0;

    bool contains(double im) const { return im > lower && im < upper; }

    Strip intersect(const Strip& o) const {
        return Strip{std::max(lower, o.lower), std::min(upper, o.upper)};
    }
};

// Generalized hyperbolic parameters (lambda, alpha, beta, delta, mu).  The
// distribution's scale delta is named `scale` to keep it apart from the
// Fourier damping parameter used elsewhere.
struct GhypParams {
    double lambda = 1.0;
    double alpha = 1.0;
    double beta = 0.0;
    double scale = 1.0;    // delta
    double location = 0.0; // mu

    // |beta| < alpha is enforced with a fixed margin; the MGF blows up at the
    // boundary.
    static constexpr double kBoundaryMargin = 1e-10;

    void validate() const {
        if (!std::isfinite(lambda) || !std::isfinite(alpha) || !std::isfinite(beta) ||
            !std::isfinite(scale) || !std::isfinite(location)) {
            throw ParameterError("ghyp: parameters must be finite");
        }
        if (!(alpha > 0.0)) throw ParameterError("ghyp: alpha must be positive");
        if (!(scale > 0.0)) throw ParameterError("ghyp: scale must be positive");
        if (!(alpha - std::fabs(beta) > kBoundaryMargin * std::max(1.0, alpha))) {
            std::ostringstream os;
            os << "ghyp: |beta| < alpha required (alpha=" << alpha << ", beta=" << beta << ")";
            throw ParameterError(os.str());
        }
    }

    Strip strip() const { return Strip{beta - alpha, beta + alpha}; }
};

// Mean of the GHYP distribution minus its location parameter; depends only on
// the shape parameters (location equivariance).
inline double mean_shift(const GhypParams& p) {
    p.validate();
    if (p.beta == 0.0) return 0.0;
    const double gamma = std::sqrt(p.alpha * p.alpha - p.beta * p.beta);
    const double zeta = p.scale * gamma;
    const double log_ratio = bessel::log_k(p.lambda + 1.0, zeta) - bessel::log_k(p.lambda, zeta);
    return p.beta * (p.scale / gamma) * std::exp(log_ratio);
}

inline double ghyp_mean(const GhypParams& p) { return p.location + mean_shift(p); }

// Location that makes the distribution mean equal to target_mean for the
// given shape (the location field of `shape` is ignored).
inline double equal_mean_location(const GhypParams& shape, double target_mean) {
    return target_mean - mean_shift(shape);
}

// One draw from GIG(lambda, chi, psi) with density kernel
// w^{lambda-1} exp(-(psi w + chi / w) / 2), chi > 0, psi > 0.
// Ratio-of-uniforms with mode shift on the two-parameter form.
inline double sample_gig(Rng& rng, double lam, double chi, double psi) {
    if (!(chi > 0.0) || !(psi > 0.0)) throw ParameterError("gig: chi and psi must be positive");
    const double unit = std::sqrt(chi / psi);
    const double omega = std::sqrt(chi * psi);
    const bool flip = lam < 0.0; // 1/Y ~ GIG(-lambda, omega, omega)
    const double lm = std::fabs(lam);

    const double mode = ((lm - 1.0) + std::sqrt((lm - 1.0) * (lm - 1.0) + omega * omega)) / omega;
    const auto log_kernel = [&](double y) {
        return (lm - 1.0) * std::log(y) - 0.5 * omega * (y + 1.0 / y);
    };
    const double lg_mode = log_kernel(mode);

    // Stationary points of (y - mode) sqrt(kernel) solve a cubic with one
    // root below and one above the mode.
    const double a = -(2.0 * (lm + 1.0) / omega + mode);
    const double b = 2.0 * (lm - 1.0) * mode / omega - 1.0;
    const double c = mode;
    const double p = b - a * a / 3.0;
    const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    if (!(p < 0.0)) throw NumericError("gig: degenerate bounding cubic");
    double cosarg = -q / (2.0 * std::sqrt(-p * p * p / 27.0));
    cosarg = std::min(1.0, std::max(-1.0, cosarg));
    const double fi = std::acos(cosarg);
    const double fak = 2.0 * std::sqrt(-p / 3.0);
    const double y_hi = fak * std::cos(fi / 3.0) - a / 3.0;
    const double y_lo = fak * std::cos(fi / 3.0 + 4.0 * kPi / 3.0) - a / 3.0;
    if (!(y_lo > 0.0) || !(y_hi > mode)) throw NumericError("gig: invalid bounding roots");

    const double v_hi = (y_hi - mode) * std::exp(0.5 * (log_kernel(y_hi) - lg_mode));
    const double v_lo = (y_lo - mode) * std::exp(0.5 * (log_kernel(y_lo) - lg_mode));

    for (int iter = 0; iter < 1000000; ++iter) {
        const double u = rng.uniform();
        const double v = v_lo + (v_hi - v_lo) * rng.uniform();
        const double y = v / u + mode;
        if (y <= 0.0) continue;
        if (2.0 * std::log(u) <= log_kernel(y) - lg_mode) {
            const double draw = flip ? 1.0 / y : y;
            return unit * draw;
        }
    }
    throw NumericError("gig: rejection sampler failed to accept");
}

// Immutable evaluator; precomputes the pieces of the density and
// characteristic function that do not depend on the evaluation point.
class GhypDist {
public:
    explicit GhypDist(GhypParams params) : p_(params) {
        p_.validate();
        gamma_ = std::sqrt(p_.alpha * p_.alpha - p_.beta * p_.beta);
        zeta0_ = p_.scale * gamma_;
        log_gamma_sq_ = std::log(p_.alpha * p_.alpha - p_.beta * p_.beta);
        ks0_ = bessel::k_scaled(p_.lambda, zeta0_);
        log_k0_ = std::log(ks0_) - zeta0_;
        log_norm_ = 0.5 * p_.lambda * log_gamma_sq_ - 0.5 * std::log(2.0 * kPi) -
                    (p_.lambda - 0.5) * std::log(p_.alpha) - p_.lambda * std::log(p_.scale) -
                    log_k0_;
        if (p_.beta == 0.0) {
            mean_shift_ = 0.0;
        } else {
            const double lr = bessel::log_k(p_.lambda + 1.0, zeta0_) - log_k0_;
            mean_shift_ = p_.beta * (p_.scale / gamma_) * std::exp(lr);
        }
    }

    const GhypParams& params() const { return p_; }
    Strip strip() const { return p_.strip(); }
    double mean() const { return p_.location + mean_shift_; }
    double mean_shift() const { return mean_shift_; }

    double logpdf(double x) const {
        const double dx = x - p_.location;
        const double s2 = p_.scale * p_.scale + dx * dx;
        const double s = std::sqrt(s2);
        if (!std::isfinite(p_.alpha * s)) {
            // the exact value overflows double range; the density is zero there
            return -std::numeric_limits<double>::infinity();
        }
        return log_norm_ + bessel::log_k(p_.lambda - 0.5, p_.alpha * s) + p_.beta * dx +
               (0.5 * p_.lambda - 0.25) * std::log(s2);
    }

    double pdf(double x) const { return std::exp(logpdf(x)); }

    // MGF(t) for |beta + t| < alpha.
    double mgf(double t) const {
        if (!(std::fabs(p_.beta + t) < p_.alpha)) {
            std::ostringstream os;
            os << "ghyp: MGF argument " << t << " outside admissible interval ("
               << -p_.alpha - p_.beta << ", " << p_.alpha - p_.beta << ")";
            throw ArgumentError(os.str());
        }
        const double arg_sq = p_.alpha * p_.alpha - (p_.beta + t) * (p_.beta + t);
        const double z = p_.scale * std::sqrt(arg_sq);
        const double log_mgf = t * p_.location +
                               0.5 * p_.lambda * (log_gamma_sq_ - std::log(arg_sq)) +
                               (std::log(bessel::k_scaled(p_.lambda, z)) - z) - log_k0_;
        return std::exp(log_mgf);
    }

    // Characteristic function, analytically continued to Im(u) inside the
    // strip (beta - alpha, beta + alpha).
    std::complex<double> cf(std::complex<double> u) const {
        const Strip s = strip();
        if (!s.contains(u.imag())) {
            std::ostringstream os;
            os << "ghyp: cf argument with Im = " << u.imag()
               << " outside strip (" << s.lower << ", " << s.upper << ")";
            throw StripError(os.str());
        }
        const std::complex<double> iu(-u.imag(), u.real());
        const std::complex<double> w = p_.beta + iu;
        const std::complex<double> zeta = p_.alpha * p_.alpha - w * w; // Re > 0 inside strip
        const std::complex<double> z = p_.scale * std::sqrt(zeta);
        const std::complex<double> log_phi =
            iu * p_.location + 0.5 * p_.lambda * (log_gamma_sq_ - std::log(zeta)) +
            (zeta0_ - z) + std::log(bessel::k_scaled(p_.lambda, z)) - std::log(ks0_);
        return std::exp(log_phi);
    }

    double sample_one(Rng& rng) const {
        const double w = sample_gig(rng, p_.lambda, p_.scale * p_.scale, gamma_ * gamma_);
        return p_.location + p_.beta * w + std::sqrt(w) * rng.gauss();
    }

    std::vector<double> sample(std::size_t count, Rng& rng) const {
        if (count < 1) throw ArgumentError("ghyp: sample count must be >= 1");
        std::vector<double> out(count);
        for (auto& x : out) x = sample_one(rng);
        return out;
    }

    // [lo, hi] outside of which logpdf stays below logpdf(mode-ish) +
    // tail_log_drop; used to truncate integrals against the density.
    std::pair<double, double> integration_bounds(double tail_log_drop = -60.0) const {
        const double ref = logpdf(p_.location);
        double step = p_.scale + 1.0 / p_.alpha;
        double hi = p_.location + step;
        while (logpdf(hi) - ref > tail_log_drop && step < 1e12) {
            step *= 2.0;
            hi = p_.location + step;
        }
        step = p_.scale + 1.0 / p_.alpha;
        double lo = p_.location - step;
        while (logpdf(lo) - ref > tail_log_drop && step < 1e12) {
            step *= 2.0;
            lo = p_.location - step;
        }
        return {lo, hi};
    }

private:
    GhypParams p_;
    double gamma_ = 0.0;
    double zeta0_ = 0.0;
    double log_gamma_sq_ = 0.0;
    double ks0_ = 0.0;
    double log_k0_ = 0.0;
    double log_norm_ = 0.0;
    double mean_shift_ = 0.0;
};

inline double ghyp_logpdf(const GhypParams& p, double x) { return GhypDist(p).logpdf(x); }
inline double ghyp_pdf(const GhypParams& p, double x) { return GhypDist(p).pdf(x); }
inline double ghyp_mgf(const GhypParams& p, double t) { return GhypDist(p).mgf(t); }
inline std::complex<double> ghyp_cf(const GhypParams& p, std::complex<double> u) {
    return GhypDist(p).cf(u);
}

} // namespace rsrisk
