#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsrisk/nelder_mead.hpp"
#include "rsrisk/regime.hpp"

// Penalized maximum-likelihood estimation of the regime model: scaled forward
// likelihood, absolute-return autocovariance penalty, the smooth bijection
// between models and unconstrained coordinates, and the multi-start simplex
// harness.

namespace rsrisk {

struct CalibrationConfig {
    // empty = auto-balanced so the penalty sits one order of magnitude below
    // |log likelihood| at the initial guess
    std::optional<double> penalty_weight;
    int penalty_lags = 50;
    int max_iterations = 4000;
    double convergence_tol = 1e-8;
    int restarts = 3;
    std::uint64_t seed = 20121127;

    void validate() const {
        if (penalty_weight && !(*penalty_weight >= 0.0)) {
            throw ConfigError("calibration: penalty_weight must be >= 0");
        }
        if (penalty_lags < 1) throw ConfigError("calibration: penalty_lags must be >= 1");
        if (max_iterations < 1) throw ConfigError("calibration: max_iterations must be >= 1");
        if (!(convergence_tol > 0.0)) throw ConfigError("calibration: convergence_tol must be > 0");
        if (restarts < 1) throw ConfigError("calibration: restarts must be >= 1");
    }
};

// Log of the HMM marginal likelihood via the scaled forward recursion,
// initialized at the stationary distribution.
inline double log_likelihood(const RegimeModel& model, const ReturnPanel& panel) {
    panel.validate();
    if (panel.size() == 0) throw ArgumentError("log_likelihood: empty panel");
    if (panel.assets() != model.assets.size()) {
        throw ArgumentError("log_likelihood: panel asset count does not match the model");
    }
    const ModelDensities densities(model);
    Posterior p = stationary_distribution(model.transitions);
    double ll = 0.0;
    for (std::size_t t = 0; t < panel.size(); ++t) {
        detail::FilterStep step;
        try {
            step = detail::filter_step(p, model.transitions, densities, panel.row(t), t);
        } catch (const DegeneracyError& e) {
            throw DegeneracyError(std::string(e.what()) + " (date " + panel.dates[t] + ")");
        }
        p = step.posterior;
        ll += step.log_norm;
    }
    if (!std::isfinite(ll)) throw DegeneracyError("log_likelihood: non-finite value");
    return ll;
}

enum class Transform { abs, identity };

// Biased (1/T) sample autocovariance of the transformed series.
inline double empirical_autocov(const std::vector<double>& series, std::size_t k,
                                Transform transform) {
    if (series.size() <= k) throw ArgumentError("empirical_autocov: lag exceeds series length");
    auto g = [transform](double x) { return transform == Transform::abs ? std::fabs(x) : x; };
    long double mean = 0.0L;
    for (double x : series) mean += g(x);
    mean /= static_cast<double>(series.size());
    long double acc = 0.0L;
    for (std::size_t t = 0; t + k < series.size(); ++t) {
        acc += (g(series[t]) - mean) * (g(series[t + k]) - mean);
    }
    return static_cast<double>(acc / static_cast<double>(series.size()));
}

// weight * sum over assets and lags of the squared gap between the
// model-implied and observed absolute-return autocovariances.
inline double penalty(const RegimeModel& model, const ReturnPanel& panel, int lags,
                      double weight) {
    if (lags < 1) throw ArgumentError("penalty: lags must be >= 1");
    if (!(weight >= 0.0)) throw ArgumentError("penalty: weight must be >= 0");
    if (weight == 0.0) return 0.0;
    double sum = 0.0;
    for (std::size_t a = 0; a < model.assets.size(); ++a) {
        const auto theo = abs_return_autocov_lags(model, a, lags, GFunc::abs);
        for (int k = 1; k <= lags; ++k) {
            const double gap =
                theo[k - 1] - empirical_autocov(panel.returns[a], static_cast<std::size_t>(k),
                                                Transform::abs);
            sum += gap * gap;
        }
    }
    return weight * sum;
}

inline double penalty(const RegimeModel& model, const ReturnPanel& panel,
                      const CalibrationConfig& cfg) {
    cfg.validate();
    if (!cfg.penalty_weight) {
        throw ArgumentError("penalty: config has no resolved penalty weight");
    }
    return penalty(model, panel, cfg.penalty_lags, *cfg.penalty_weight);
}

inline double objective(const RegimeModel& model, const ReturnPanel& panel,
                        const CalibrationConfig& cfg) {
    return log_likelihood(model, panel) - penalty(model, panel, cfg);
}

using UnconstrainedVector = std::vector<double>;

// Per asset: lambda1, log alpha1, atanh(beta1/alpha1), log scale1, then the
// same four for state 2, then the shared conditional mean.  Both locations
// are reconstructed from the shared mean, which removes one of the ten raw
// parameters per asset.  Transitions map through the logit.
inline UnconstrainedVector to_unconstrained(const RegimeModel& model) {
    model.validate();
    UnconstrainedVector v;
    v.reserve(RegimeModel::parameter_count(model.assets.size()));
    for (const auto& a : model.assets) {
        for (const GhypParams* s : {&a.state1, &a.state2}) {
            v.push_back(s->lambda);
            v.push_back(std::log(s->alpha));
            v.push_back(std::atanh(s->beta / s->alpha));
            v.push_back(std::log(s->scale));
        }
        v.push_back(a.common_mean);
    }
    v.push_back(std::log(model.transitions.p11 / (1.0 - model.transitions.p11)));
    v.push_back(std::log(model.transitions.p22 / (1.0 - model.transitions.p22)));
    return v;
}

inline RegimeModel from_unconstrained(const UnconstrainedVector& v,
                                      const std::vector<std::string>& asset_names) {
    const std::size_t m = asset_names.size();
    if (v.size() != RegimeModel::parameter_count(m)) {
        std::ostringstream os;
        os << "from_unconstrained: expected " << RegimeModel::parameter_count(m)
           << " coordinates for " << m << " assets, got " << v.size();
        throw ArgumentError(os.str());
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw ArgumentError("from_unconstrained: non-finite coordinate");
    }
    RegimeModel model;
    std::size_t i = 0;
    for (std::size_t a = 0; a < m; ++a) {
        AssetStates as;
        as.name = asset_names[a];
        GhypParams* states[2] = {&as.state1, &as.state2};
        for (GhypParams* s : states) {
            s->lambda = v[i++];
            s->alpha = std::exp(v[i++]);
            s->beta = s->alpha * std::tanh(v[i++]);
            s->scale = std::exp(v[i++]);
        }
        as.common_mean = v[i++];
        as.state1.location = equal_mean_location(as.state1, as.common_mean);
        as.state2.location = equal_mean_location(as.state2, as.common_mean);
        model.assets.push_back(std::move(as));
    }
    model.transitions.p11 = 1.0 / (1.0 + std::exp(-v[i++]));
    model.transitions.p22 = 1.0 / (1.0 + std::exp(-v[i++]));
    model.validate();
    return model;
}

// Swap the state labels so state 1 is the one with the smaller mean absolute
// deviation for the first asset ("less risky"); resolves label switching.
inline RegimeModel canonical_labeling(const RegimeModel& model) {
    model.validate();
    const auto& first = model.assets.front();
    const double dev1 = mean_abs_deviation(GhypDist(first.state1), first.common_mean);
    const double dev2 = mean_abs_deviation(GhypDist(first.state2), first.common_mean);
    if (dev1 <= dev2) return model;
    RegimeModel flipped = model;
    std::swap(flipped.transitions.p11, flipped.transitions.p22);
    for (auto& a : flipped.assets) std::swap(a.state1, a.state2);
    return flipped;
}

// Moment-based starting model: dates split by the first asset's |r| around
// its median, one symmetric NIG-like shape fitted to each split.
inline RegimeModel initial_guess(const ReturnPanel& panel, std::uint64_t /*seed*/) {
    panel.validate();
    if (panel.size() < 8) throw DataError("initial_guess: panel too short");
    std::vector<double> crit(panel.size());
    for (std::size_t t = 0; t < panel.size(); ++t) crit[t] = std::fabs(panel.returns[0][t]);
    std::vector<double> sorted = crit;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const double median = sorted[sorted.size() / 2];

    RegimeModel model;
    model.transitions = TransitionMatrix{0.95, 0.95};
    for (std::size_t a = 0; a < panel.assets(); ++a) {
        long double mean = 0.0L;
        for (double r : panel.returns[a]) mean += r;
        mean /= static_cast<double>(panel.size());
        double var[2] = {0.0, 0.0};
        std::size_t count[2] = {0, 0};
        for (std::size_t t = 0; t < panel.size(); ++t) {
            const int split = crit[t] <= median ? 0 : 1;
            const double d = panel.returns[a][t] - static_cast<double>(mean);
            var[split] += d * d;
            ++count[split];
        }
        AssetStates as;
        as.name = panel.names[a];
        as.common_mean = static_cast<double>(mean);
        GhypParams* states[2] = {&as.state1, &as.state2};
        for (int s : {0, 1}) {
            if (count[s] < 2) throw DataError("initial_guess: degenerate |r| split");
            const double v = var[s] / static_cast<double>(count[s]);
            if (!(v > 0.0)) throw DataError("initial_guess: constant return series");
            states[s]->lambda = -0.5;
            states[s]->alpha = 1.0 / std::sqrt(v);
            states[s]->beta = 0.0;
            states[s]->scale = std::sqrt(v);
            states[s]->location = as.common_mean;
        }
        model.assets.push_back(std::move(as));
    }
    model.validate();
    return model;
}

struct CalibrationDiagnostics {
    std::vector<double> objective_trace; // best objective after each improvement
    double objective = 0.0;
    double log_likelihood = 0.0;
    double penalty_value = 0.0;
    double penalty_weight = 0.0;
    bool converged = false;
    int iterations = 0;
    int evaluations = 0;
    std::vector<double> start_objectives;
    std::vector<std::string> warnings;
};

struct CalibrationResult {
    RegimeModel model;
    CalibrationDiagnostics diagnostics;
};

// Multi-start penalized maximum likelihood.  Returns the best local maximizer
// found, relabeled canonically; convergence false means the iteration budget
// ran out on the winning start.
inline CalibrationResult calibrate(const ReturnPanel& panel, const CalibrationConfig& cfg,
                                   const std::vector<RegimeModel>& initial_guesses = {}) {
    cfg.validate();
    panel.validate();
    if (panel.size() == 0 || panel.assets() == 0) throw DataError("calibrate: empty panel");
    const std::size_t dim = RegimeModel::parameter_count(panel.assets());
    if (panel.size() < dim + 10) {
        std::ostringstream os;
        os << "calibrate: panel length " << panel.size() << " too short for " << dim
           << " parameters";
        throw DataError(os.str());
    }
    for (std::size_t a = 0; a < panel.assets(); ++a) {
        const double v = empirical_autocov(panel.returns[a], 0, Transform::identity);
        if (!(v > 0.0)) {
            throw DataError("calibrate: constant return series for asset '" + panel.names[a] + "'");
        }
    }

    CalibrationDiagnostics diag;
    if (panel.size() < 20 * dim) {
        std::ostringstream os;
        os << "panel length " << panel.size() << " is below 20x the parameter count (" << dim
           << " parameters); estimates may be unstable";
        diag.warnings.push_back(os.str());
    }

    const RegimeModel first_guess =
        initial_guesses.empty() ? initial_guess(panel, cfg.seed) : initial_guesses.front();

    // empirical absolute-return autocovariances are model-independent
    const int lags = cfg.penalty_lags;
    std::vector<std::vector<double>> emp(panel.assets());
    for (std::size_t a = 0; a < panel.assets(); ++a) {
        emp[a].resize(static_cast<std::size_t>(lags));
        for (int k = 1; k <= lags; ++k) {
            emp[a][k - 1] =
                empirical_autocov(panel.returns[a], static_cast<std::size_t>(k), Transform::abs);
        }
    }

    auto raw_penalty = [&](const RegimeModel& model) {
        double sum = 0.0;
        for (std::size_t a = 0; a < model.assets.size(); ++a) {
            const auto theo = abs_return_autocov_lags(model, a, lags, GFunc::abs);
            for (int k = 1; k <= lags; ++k) {
                const double gap = theo[k - 1] - emp[a][k - 1];
                sum += gap * gap;
            }
        }
        return sum;
    };

    double weight = 0.0;
    if (cfg.penalty_weight) {
        weight = *cfg.penalty_weight;
    } else {
        const double ll0 = log_likelihood(first_guess, panel);
        const double raw0 = raw_penalty(first_guess);
        weight = raw0 > 1e-300 ? std::fabs(ll0) / (10.0 * raw0) : 1.0;
    }
    diag.penalty_weight = weight;

    auto negative_objective = [&](const UnconstrainedVector& v) {
        try {
            const RegimeModel model = from_unconstrained(v, panel.names);
            return -(log_likelihood(model, panel) - weight * raw_penalty(model));
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    Rng rng(cfg.seed);
    nm::Result best;
    best.fx = std::numeric_limits<double>::infinity();
    for (int s = 0; s < cfg.restarts; ++s) {
        UnconstrainedVector x0;
        if (static_cast<std::size_t>(s) < initial_guesses.size()) {
            x0 = to_unconstrained(initial_guesses[s]);
        } else {
            x0 = to_unconstrained(first_guess);
            if (s > 0) {
                for (double& c : x0) c += 0.3 * rng.gauss();
            }
        }
        nm::Result r = nm::minimize(negative_objective, x0, 0.2, cfg.max_iterations,
                                    cfg.convergence_tol);
        diag.start_objectives.push_back(-r.fx);
        if (r.fx < best.fx) best = std::move(r);
    }
    if (!std::isfinite(best.fx)) throw NumericError("calibrate: no start produced a finite objective");

    const RegimeModel fitted = canonical_labeling(from_unconstrained(best.x, panel.names));
    diag.objective = -best.fx;
    diag.objective_trace.reserve(best.trace.size());
    for (double f : best.trace) diag.objective_trace.push_back(-f);
    diag.converged = best.converged;
    diag.iterations = best.iterations;
    diag.evaluations = best.evaluations;
    diag.log_likelihood = log_likelihood(fitted, panel);
    diag.penalty_value = weight * raw_penalty(fitted);
    return CalibrationResult{fitted, std::move(diag)};
}

} // namespace rsrisk
