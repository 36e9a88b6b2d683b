#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "rsrisk/ghyp.hpp"
#include "rsrisk/panel.hpp"
#include "rsrisk/quadrature.hpp"
#include "rsrisk/rng.hpp"

// Two-state hidden Markov return model: transition kernel, stationary law,
// model-implied autocovariance, posterior filtering, N-period characteristic
// function and path simulation.

namespace rsrisk {

struct TransitionMatrix {
    double p11 = 0.95;
    double p22 = 0.95;

    double p12() const { return 1.0 - p11; }
    double p21() const { return 1.0 - p22; }

    void validate() const {
        if (!(p11 > 0.0 && p11 < 1.0 && p22 > 0.0 && p22 < 1.0)) {
            throw ParameterError("transition matrix diagonals must lie strictly in (0,1)");
        }
    }
};

using Matrix2 = std::array<std::array<double, 2>, 2>;

struct Posterior {
    double p1 = 0.5;
    double p2 = 0.5;

    void validate() const {
        if (!(p1 >= 0.0 && p2 >= 0.0) || std::fabs(p1 + p2 - 1.0) > 1e-12) {
            throw ParameterError("posterior must be a probability pair summing to 1");
        }
    }
};

// State-conditional distributions of one market plus the shared conditional
// mean both states are pinned to.
struct AssetStates {
    std::string name;
    GhypParams state1;
    GhypParams state2;
    double common_mean = 0.0;
};

struct RegimeModel {
    TransitionMatrix transitions;
    std::vector<AssetStates> assets;

    // Free parameters: 9 shape coordinates per asset (the equal-mean
    // constraint removes one of the ten) plus two transition probabilities.
    static std::size_t parameter_count(std::size_t m) { return 10 * m - m + 2; }

    static constexpr double kMeanTol = 1e-10;

    void validate() const {
        transitions.validate();
        if (assets.empty()) throw ParameterError("model must have at least one asset");
        for (const auto& a : assets) {
            a.state1.validate();
            a.state2.validate();
            const double m1 = ghyp_mean(a.state1);
            const double m2 = ghyp_mean(a.state2);
            const double tol = kMeanTol * std::max(1.0, std::fabs(a.common_mean));
            if (std::fabs(m1 - a.common_mean) > tol || std::fabs(m2 - a.common_mean) > tol) {
                std::ostringstream os;
                os << "asset '" << a.name << "': state means (" << m1 << ", " << m2
                   << ") do not match the common mean " << a.common_mean;
                throw ParameterError(os.str());
            }
        }
    }

    std::size_t asset_index(const std::string& name) const {
        for (std::size_t i = 0; i < assets.size(); ++i) {
            if (assets[i].name == name) return i;
        }
        throw ArgumentError("model has no asset named '" + name + "'");
    }
};

inline Posterior stationary_distribution(const TransitionMatrix& t) {
    t.validate();
    const double denom = 2.0 - t.p11 - t.p22;
    return Posterior{(1.0 - t.p22) / denom, (1.0 - t.p11) / denom};
}

inline Matrix2 matmul(const Matrix2& a, const Matrix2& b) {
    Matrix2 c{};
    for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    return c;
}

inline Matrix2 as_matrix(const TransitionMatrix& t) {
    return Matrix2{{{t.p11, t.p12()}, {t.p21(), t.p22}}};
}

// k-step transition matrix P^k, k >= 1.
inline Matrix2 k_step(const TransitionMatrix& t, long k) {
    t.validate();
    if (k < 1) throw ArgumentError("k_step: k must be >= 1");
    Matrix2 result{{{1.0, 0.0}, {0.0, 1.0}}};
    Matrix2 base = as_matrix(t);
    long e = k;
    while (e > 0) {
        if (e & 1) result = matmul(result, base);
        base = matmul(base, base);
        e >>= 1;
    }
    return result;
}

enum class GFunc { abs, square, identity };

// E[g(X)] against a GHYP density by adaptive quadrature, split at the
// location parameter and at zero (|x| has a kink there).
inline double conditional_expectation(const GhypDist& dist, GFunc g, double abs_tol = 1e-10) {
    auto transform = [g](double x) {
        switch (g) {
            case GFunc::abs: return std::fabs(x);
            case GFunc::square: return x * x;
            case GFunc::identity: return x;
        }
        return 0.0;
    };
    const auto [lo, hi] = dist.integration_bounds(-90.0);
    std::vector<double> pts{lo};
    for (double p : {std::min(0.0, dist.params().location), std::max(0.0, dist.params().location)}) {
        if (p > pts.back() && p < hi) pts.push_back(p);
    }
    pts.push_back(hi);
    return quad::integrate_segments(
        [&](double x) { return transform(x) * dist.pdf(x); }, pts, abs_tol, 20000);
}

// Mean absolute deviation from a fixed center; used by the state-labeling
// convention.
inline double mean_abs_deviation(const GhypDist& dist, double center) {
    const auto [lo, hi] = dist.integration_bounds(-90.0);
    std::vector<double> pts{lo};
    if (center > lo && center < hi) pts.push_back(center);
    pts.push_back(hi);
    return quad::integrate_segments(
        [&](double x) { return std::fabs(x - center) * dist.pdf(x); }, pts, 1e-10, 20000);
}

namespace detail {

struct AutocovTerms {
    Posterior pi;
    double g1 = 0.0;
    double g2 = 0.0;
};

inline AutocovTerms autocov_terms(const RegimeModel& model, std::size_t asset, GFunc g) {
    model.validate();
    if (asset >= model.assets.size()) throw ArgumentError("autocov: asset index out of range");
    AutocovTerms t;
    t.pi = stationary_distribution(model.transitions);
    t.g1 = conditional_expectation(GhypDist(model.assets[asset].state1), g);
    t.g2 = conditional_expectation(GhypDist(model.assets[asset].state2), g);
    return t;
}

inline double autocov_from_terms(const AutocovTerms& t, const Matrix2& pk) {
    const double cross = t.pi.p1 * t.g1 * (pk[0][0] * t.g1 + pk[0][1] * t.g2) +
                         t.pi.p2 * t.g2 * (pk[1][0] * t.g1 + pk[1][1] * t.g2);
    const double mean = t.pi.p1 * t.g1 + t.pi.p2 * t.g2;
    return cross - mean * mean;
}

} // namespace detail

// COV[g(r_n), g(r_{n+k})] for the stationary chain.
inline double abs_return_autocov(const RegimeModel& model, std::size_t asset, long k,
                                 GFunc g = GFunc::abs) {
    if (k < 1) throw ArgumentError("autocov: lag must be >= 1");
    const auto terms = detail::autocov_terms(model, asset, g);
    return detail::autocov_from_terms(terms, k_step(model.transitions, k));
}

// Lags 1..max_lag sharing one pair of conditional-expectation quadratures.
inline std::vector<double> abs_return_autocov_lags(const RegimeModel& model, std::size_t asset,
                                                   long max_lag, GFunc g = GFunc::abs) {
    if (max_lag < 1) throw ArgumentError("autocov: lag must be >= 1");
    const auto terms = detail::autocov_terms(model, asset, g);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(max_lag));
    Matrix2 pk = as_matrix(model.transitions);
    const Matrix2 p1 = pk;
    for (long k = 1; k <= max_lag; ++k) {
        out.push_back(detail::autocov_from_terms(terms, pk));
        pk = matmul(pk, p1);
    }
    return out;
}

// Precomputed per-state joint log densities of one observation row; the
// filter and the likelihood share this.
class ModelDensities {
public:
    explicit ModelDensities(const RegimeModel& model) {
        model.validate();
        state1_.reserve(model.assets.size());
        state2_.reserve(model.assets.size());
        for (const auto& a : model.assets) {
            state1_.emplace_back(a.state1);
            state2_.emplace_back(a.state2);
        }
    }

    std::size_t assets() const { return state1_.size(); }

    // Joint log density of the row under each state (returns {L1, L2}).
    std::pair<double, double> joint_logpdf(const std::vector<double>& row) const {
        if (row.size() != state1_.size()) {
            throw ArgumentError("observation dimension does not match the model");
        }
        double l1 = 0.0, l2 = 0.0;
        for (std::size_t a = 0; a < row.size(); ++a) {
            l1 += state1_[a].logpdf(row[a]);
            l2 += state2_[a].logpdf(row[a]);
        }
        return {l1, l2};
    }

    const GhypDist& state1(std::size_t a) const { return state1_[a]; }
    const GhypDist& state2(std::size_t a) const { return state2_[a]; }

private:
    std::vector<GhypDist> state1_;
    std::vector<GhypDist> state2_;
};

namespace detail {

struct FilterStep {
    Posterior posterior;
    double log_norm = 0.0; // log one-step predictive density
};

// One application of the posterior recursion in log space.
inline FilterStep filter_step(const Posterior& prev, const TransitionMatrix& t,
                              const ModelDensities& densities, const std::vector<double>& row,
                              std::size_t date_index) {
    const double q1 = prev.p1 * t.p11 + prev.p2 * t.p21();
    const double q2 = prev.p1 * t.p12() + prev.p2 * t.p22;
    const auto [l1, l2] = densities.joint_logpdf(row);
    const double lmax = std::max(l1, l2);
    if (!std::isfinite(lmax)) {
        std::ostringstream os;
        os << "filter degeneracy at index " << date_index
           << ": joint state densities are not finite (log densities " << l1 << ", " << l2 << ")";
        throw DegeneracyError(os.str());
    }
    const double w1 = q1 * std::exp(l1 - lmax);
    const double w2 = q2 * std::exp(l2 - lmax);
    const double norm = w1 + w2;
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        std::ostringstream os;
        os << "filter degeneracy at index " << date_index << ": zero posterior mass";
        throw DegeneracyError(os.str());
    }
    FilterStep out;
    out.posterior = Posterior{w1 / norm, w2 / norm};
    out.log_norm = std::log(norm) + lmax;
    return out;
}

} // namespace detail

// Posterior state probabilities after observing one return row.
inline Posterior posterior_update(const Posterior& prev, const RegimeModel& model,
                                  const std::vector<double>& observation) {
    prev.validate();
    const ModelDensities densities(model);
    return detail::filter_step(prev, model.transitions, densities, observation, 0).posterior;
}

struct PosteriorSeries {
    std::vector<std::string> dates;
    std::vector<Posterior> posteriors;

    std::size_t size() const { return posteriors.size(); }
};

// Runs the posterior recursion over the panel; the first update starts from
// `initial` (defaulting at call sites to the stationary distribution).
inline PosteriorSeries filter_series(const RegimeModel& model, const ReturnPanel& panel,
                                     const Posterior& initial) {
    panel.validate();
    initial.validate();
    if (panel.assets() != model.assets.size()) {
        throw ArgumentError("panel asset count does not match the model");
    }
    const ModelDensities densities(model);
    PosteriorSeries out;
    out.dates = panel.dates;
    out.posteriors.reserve(panel.size());
    Posterior prev = initial;
    for (std::size_t t = 0; t < panel.size(); ++t) {
        try {
            prev = detail::filter_step(prev, model.transitions, densities, panel.row(t), t).posterior;
        } catch (const DegeneracyError& e) {
            throw DegeneracyError(std::string(e.what()) + " (date " + panel.dates[t] + ")");
        }
        out.posteriors.push_back(prev);
    }
    return out;
}

inline PosteriorSeries filter_series(const RegimeModel& model, const ReturnPanel& panel) {
    return filter_series(model, panel, stationary_distribution(model.transitions));
}

// Characteristic function of the N-period-ahead cumulative return of one
// asset given the current posterior.
inline std::complex<double> nperiod_cf(const Posterior& posterior, const RegimeModel& model,
                                       std::size_t asset, int horizon, std::complex<double> u) {
    posterior.validate();
    model.validate();
    if (asset >= model.assets.size()) throw ArgumentError("nperiod_cf: asset index out of range");
    if (horizon < 1) throw ArgumentError("nperiod_cf: horizon must be >= 1");
    const auto& a = model.assets[asset];
    const Strip strip = a.state1.strip().intersect(a.state2.strip());
    if (!strip.contains(u.imag())) {
        std::ostringstream os;
        os << "nperiod_cf: Im(u) = " << u.imag() << " outside admissible strip ("
           << strip.lower << ", " << strip.upper << ")";
        throw StripError(os.str());
    }
    const GhypDist d1(a.state1), d2(a.state2);
    const std::complex<double> phi1 = d1.cf(u);
    const std::complex<double> phi2 = d2.cf(u);
    const TransitionMatrix& t = model.transitions;
    // rows of P * diag(phi1, phi2)
    const std::complex<double> m[2][2] = {{t.p11 * phi1, t.p12() * phi2},
                                          {t.p21() * phi1, t.p22 * phi2}};
    std::complex<double> v1(1.0, 0.0), v2(1.0, 0.0); // M^n * 1
    for (int n = 0; n < horizon; ++n) {
        const std::complex<double> n1 = m[0][0] * v1 + m[0][1] * v2;
        const std::complex<double> n2 = m[1][0] * v1 + m[1][1] * v2;
        v1 = n1;
        v2 = n2;
    }
    return posterior.p1 * v1 + posterior.p2 * v2;
}

struct SimulationResult {
    std::vector<int> states; // 1-based state labels
    ReturnPanel panel;
};

// Generative direction of the model: hidden chain from the stationary law,
// returns conditionally independent across assets given the state.
inline SimulationResult simulate(const RegimeModel& model, std::size_t steps, std::uint64_t seed) {
    model.validate();
    if (steps < 1) throw ArgumentError("simulate: steps must be >= 1");
    Rng rng(seed);
    std::vector<GhypDist> d1, d2;
    for (const auto& a : model.assets) {
        d1.emplace_back(a.state1);
        d2.emplace_back(a.state2);
    }
    const Posterior pi = stationary_distribution(model.transitions);
    SimulationResult out;
    out.states.reserve(steps);
    out.panel.names.reserve(model.assets.size());
    for (const auto& a : model.assets) out.panel.names.push_back(a.name);
    out.panel.returns.assign(model.assets.size(), {});
    for (auto& col : out.panel.returns) col.reserve(steps);

    int state = rng.uniform() < pi.p1 ? 1 : 2;
    for (std::size_t t = 0; t < steps; ++t) {
        if (t > 0) {
            const double stay = state == 1 ? model.transitions.p11 : model.transitions.p22;
            if (rng.uniform() >= stay) state = 3 - state;
        }
        out.states.push_back(state);
        for (std::size_t a = 0; a < model.assets.size(); ++a) {
            const GhypDist& d = state == 1 ? d1[a] : d2[a];
            out.panel.returns[a].push_back(d.sample_one(rng));
        }
    }
    out.panel.dates = synthetic_dates(steps);
    out.panel.provenance = {"simulated"};
    return out;
}

} // namespace rsrisk
