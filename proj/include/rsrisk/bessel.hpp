#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <sstream>
#include <tuple>
#include <utility>

#include "rsrisk/errors.hpp"

// Modified Bessel function of the second kind K_nu for real order and real or
// complex argument with Re(z) > 0.  Small arguments use Temme's series, large
// ones the Steed continued fraction, both followed by the (stable) upward
// order recurrence.  The exponentially scaled form e^z K_nu(z) is the
// primitive; unscaled and log variants derive from it.

namespace rsrisk::bessel {

namespace detail {

// Taylor coefficients of 1/Gamma(z) = sum_{k>=1} c_k z^k.
inline constexpr double kRecipGammaCoeff[] = {
    1.00000000000000000000,
    0.577215664901532860607,
    -0.655878071520253881077,
    -0.0420026350340952355290,
    0.166538611382291489502,
    -0.0421977345555443367482,
    -0.00962197152787697356211,
    0.00721894324666309954240,
    -0.00116516759185906511211,
    -0.000215241674114950972816,
    0.000128050282388116186153,
    -0.0000201348547807882386557,
    -0.00000125049348214267065735,
    0.00000113302723198169588237,
    -2.05633841697760710345e-7,
    6.11609510448141581786e-9,
    5.00200764446922293006e-9,
    -1.18127457048702014459e-9,
    1.04342671169110051049e-10,
    7.78226343990507125405e-12,
    -3.69680561864220570819e-12,
    5.10037028745447597902e-13,
    -2.05832605356650678322e-14,
    -5.34812253942301798237e-15,
    1.22677862823826079016e-15,
    -1.18125930169745876951e-16,
    1.18669225475160033258e-18,
};

// 1/Gamma(1+x) for |x| <= 0.5.
inline double recip_gamma_1p(double x) {
    double sum = 0.0;
    double pw = 1.0;
    for (double c : kRecipGammaCoeff) {
        sum += c * pw;
        pw *= x;
    }
    return sum;
}

struct GammaTerms {
    double gam1; // (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu), continuous at 0
    double gam2; // (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
    double g1p;  // 1/Gamma(1+mu)
    double g1m;  // 1/Gamma(1-mu)
};

// Cancellation-free evaluation for |mu| <= 0.5 via the odd/even parts of the
// reciprocal-gamma series.
inline GammaTerms gamma_terms(double mu) {
    const double mu2 = mu * mu;
    double odd = 0.0, even = 0.0; // sums over c_{k} mu^{k-1} split by parity of k-1
    double pw = 1.0;              // mu^{2j}
    for (std::size_t k = 1; k + 1 < sizeof(kRecipGammaCoeff) / sizeof(double); k += 2) {
        even += kRecipGammaCoeff[k - 1] * pw; // exponent k-1 even
        odd += kRecipGammaCoeff[k] * pw;      // exponent k odd -> divided by mu
        pw *= mu2;
    }
    GammaTerms t;
    t.gam1 = -odd;
    t.gam2 = even;
    t.g1p = t.gam2 - mu * t.gam1;
    t.g1m = t.gam2 + mu * t.gam1;
    return t;
}

inline double abs_of(double x) { return std::fabs(x); }
inline double abs_of(const std::complex<double>& z) { return std::abs(z); }

inline constexpr double kSeriesEps = 1e-17;
inline constexpr int kMaxSeriesIter = 400;
inline constexpr int kMaxCfIter = 4000;
// Series/continued-fraction crossover in |z|; the CF still converges well
// here and the series has not yet lost digits.
inline constexpr double kCrossover = 2.0;

// Temme's series for (K_mu(z), K_{mu+1}(z)), |mu| <= 1/2, |z| <= kCrossover.
// Returns the unscaled values.
template <typename T>
std::pair<T, T> k_temme(double mu, T z) {
    const GammaTerms gt = gamma_terms(mu);
    const double pimu = 3.141592653589793238462643383279502884 * mu;
    const double fact = (std::fabs(pimu) < 1e-8)
                            ? 1.0 + pimu * pimu / 6.0
                            : pimu / std::sin(pimu);
    const T logh = -std::log(z / 2.0); // Re z > 0, principal log
    const T e0 = mu * logh;
    const T fact2 = (abs_of(e0) < 1e-8) ? T(1.0) + e0 * e0 / 6.0 : std::sinh(e0) / e0;
    T ff = fact * (gt.gam1 * std::cosh(e0) + gt.gam2 * fact2 * logh);
    T sum = ff;
    const T emu = std::exp(e0); // (z/2)^{-mu}
    T p = 0.5 * emu / gt.g1p;
    T q = 0.5 / (emu * gt.g1m);
    T c(1.0);
    const T zz4 = z * z * 0.25;
    T sum1 = p;
    const double mu2 = mu * mu;
    for (int i = 1; i <= kMaxSeriesIter; ++i) {
        ff = (static_cast<double>(i) * ff + p + q) / (static_cast<double>(i) * i - mu2);
        c *= zz4 / static_cast<double>(i);
        p /= (static_cast<double>(i) - mu);
        q /= (static_cast<double>(i) + mu);
        const T del = c * ff;
        sum += del;
        const T del1 = c * (p - static_cast<double>(i) * ff);
        sum1 += del1;
        if (abs_of(del) < abs_of(sum) * kSeriesEps) {
            return {sum, sum1 * (2.0 / z)};
        }
    }
    throw NumericError("bessel_k: Temme series did not converge");
}

// Steed's continued fraction for the scaled pair (e^z K_mu, e^z K_{mu+1}),
// |mu| <= 1/2, |z| >= kCrossover, Re z > 0.
template <typename T>
std::pair<T, T> k_cf2_scaled(double mu, T z) {
    const double mu2 = mu * mu;
    const double a1 = 0.25 - mu2;
    T b = 2.0 * (1.0 + z);
    T d = 1.0 / b;
    T delh = d;
    T h = delh;
    T q1(0.0), q2(1.0);
    T q(a1);
    double a = -a1;
    double c = a1;
    T s = 1.0 + q * delh;
    for (int i = 2; i <= kMaxCfIter; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const T qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const T dels = q * delh;
        s += dels;
        if (abs_of(dels) <= abs_of(s) * kSeriesEps) {
            h = a1 * h;
            const T kmu = std::sqrt(3.141592653589793238462643383279502884 / (2.0 * z)) / s;
            const T kmu1 = kmu * (mu + z + 0.5 - h) / z;
            return {kmu, kmu1};
        }
    }
    throw NumericError("bessel_k: continued fraction did not converge");
}

template <typename T>
[[noreturn]] void throw_range(double order, const T& z) {
    std::ostringstream os;
    os << "bessel_k: overflow/underflow for order " << order << ", argument ";
    if constexpr (std::is_same_v<T, double>) {
        os << z;
    } else {
        os << "(" << z.real() << "," << z.imag() << ")";
    }
    throw RangeError(os.str());
}

// Scaled e^z K_nu(z) for any real order, Re z > 0.
template <typename T>
T k_scaled_impl(double order, T z) {
    const double nu = std::fabs(order); // K_{-nu} = K_nu
    const int n = static_cast<int>(nu + 0.5);
    const double mu = nu - n; // in [-1/2, 1/2]

    T kmu, kmu1;
    if (abs_of(z) <= kCrossover) {
        auto [a, b] = k_temme(mu, z);
        const T scale = std::exp(z); // |z| <= crossover, no overflow
        kmu = a * scale;
        kmu1 = b * scale;
    } else {
        std::tie(kmu, kmu1) = k_cf2_scaled(mu, z);
    }
    const T two_over_z = 2.0 / z;
    for (int l = 1; l <= n; ++l) {
        const T knext = (mu + l) * two_over_z * kmu1 + kmu;
        kmu = kmu1;
        kmu1 = knext;
        if (!std::isfinite(abs_of(kmu))) throw_range(order, z);
    }
    if (!std::isfinite(abs_of(kmu))) throw_range(order, z);
    return kmu;
}

} // namespace detail

inline std::complex<double> k_scaled(double order, std::complex<double> z) {
    if (!(z.real() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw ArgumentError("bessel_k: argument must be finite with positive real part");
    }
    return detail::k_scaled_impl(order, z);
}

inline double k_scaled(double order, double x) {
    if (!(x > 0.0) || !std::isfinite(x)) {
        throw ArgumentError("bessel_k: argument must be finite and positive");
    }
    return detail::k_scaled_impl(order, x);
}

// Unscaled K_nu; throws RangeError when the result over- or underflows.
template <typename T>
T k(double order, T z) {
    const T ks = k_scaled(order, z);
    const T result = ks * std::exp(-z);
    const double a = detail::abs_of(result);
    if (!std::isfinite(a) || a == 0.0) detail::throw_range(order, z);
    return result;
}

// log K_nu(x) for real x > 0; stays finite where K itself under/overflows.
inline double log_k(double order, double x) {
    return std::log(k_scaled(order, x)) - x;
}

} // namespace rsrisk::bessel
