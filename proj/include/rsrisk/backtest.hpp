#pragma once

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsrisk/calibration.hpp"
#include "rsrisk/fourier_risk.hpp"
#include "rsrisk/regime.hpp"

// Backtesting machinery: breach extraction, the binomial (Kupiec-style) and
// runs tests, the rolling single-distribution baseline and report assembly.
// `level` here is the VaR confidence level (0.95 for 95% VaR); the lower-tail
// probability handed to the inversion engine is 1 - level.

namespace rsrisk {

struct BreachSeries {
    std::vector<std::string> dates;
    std::vector<bool> flags; // return below the prior forecast

    std::size_t breaches() const {
        std::size_t n = 0;
        for (bool f : flags) n += f;
        return n;
    }
};

// flag_n = (r_n < VaR_n); forecasts must be one-step-ahead.
inline BreachSeries breach_series(const std::vector<std::string>& dates,
                                  const std::vector<double>& returns,
                                  const std::vector<double>& var_forecasts) {
    if (returns.size() != var_forecasts.size() || dates.size() != returns.size()) {
        throw ArgumentError("breach_series: length mismatch");
    }
    BreachSeries out;
    out.dates = dates;
    out.flags.reserve(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        out.flags.push_back(returns[t] < var_forecasts[t]);
    }
    return out;
}

// One-sided excess-violation probability P(X >= x) for X ~ Binomial(n, 1-level),
// summed exactly in log space.
inline double binomial_test_pvalue(std::size_t x, std::size_t n, double level) {
    if (x > n) throw ArgumentError("binomial test: x > n");
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("binomial test: level in (0,1)");
    if (x == 0) return 1.0;
    const double p = 1.0 - level;
    const double logp = std::log(p);
    const double logq = std::log1p(-p);
    const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
    long double acc = 0.0L;
    for (std::size_t k = x; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        const double logterm = lgn - std::lgamma(kd + 1.0) -
                               std::lgamma(static_cast<double>(n - k) + 1.0) + kd * logp +
                               static_cast<double>(n - k) * logq;
        const double term = std::exp(logterm);
        acc += term;
        if (kd > n * p && term < 1e-19 * static_cast<double>(acc)) break;
    }
    return std::min(1.0, static_cast<double>(acc));
}

// Two-sided Kupiec likelihood-ratio variant (chi-squared with one degree of
// freedom), available behind a flag where the one-sided count test is not
// wanted.
inline double kupiec_lr_pvalue(std::size_t x, std::size_t n, double level) {
    if (x > n || n == 0) throw ArgumentError("kupiec test: invalid counts");
    const double p = 1.0 - level;
    const double xf = static_cast<double>(x), nf = static_cast<double>(n);
    const double phat = xf / nf;
    double ll_null = xf * std::log(p) + (nf - xf) * std::log1p(-p);
    double ll_alt = 0.0;
    if (x > 0) ll_alt += xf * std::log(phat);
    if (x < n) ll_alt += (nf - xf) * std::log1p(-phat);
    const double lr = std::max(0.0, -2.0 * (ll_null - ll_alt));
    return std::erfc(std::sqrt(lr / 2.0));
}

// Wald-Wolfowitz runs test, two-sided normal approximation.
inline double runs_test_pvalue(const std::vector<bool>& flags) {
    std::size_t n1 = 0, n2 = 0, runs = 0;
    for (std::size_t t = 0; t < flags.size(); ++t) {
        (flags[t] ? n1 : n2) += 1;
        if (t == 0 || flags[t] != flags[t - 1]) ++runs;
    }
    if (n1 == 0 || n2 == 0) {
        throw ArgumentError("runs test: both categories must be present");
    }
    const double a = static_cast<double>(n1), b = static_cast<double>(n2);
    const double n = a + b;
    const double expected = 1.0 + 2.0 * a * b / n;
    const double variance = 2.0 * a * b * (2.0 * a * b - n) / (n * n * (n - 1.0));
    if (!(variance > 0.0)) throw ArgumentError("runs test: degenerate variance");
    const double z = (static_cast<double>(runs) - expected) / std::sqrt(variance);
    return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

// Maximum-likelihood fit of a single (no-regime) GHYP distribution; the
// rolling baseline refits this every day.
struct GhypFit {
    GhypParams params;
    double log_likelihood = 0.0;
    bool converged = false;
};

inline GhypFit fit_ghyp(const std::vector<double>& xs, int max_iterations = 400,
                        const std::optional<GhypParams>& warm_start = std::nullopt) {
    if (xs.size() < 12) throw DataError("fit_ghyp: too few observations");
    auto pack = [](const GhypParams& p) {
        return std::vector<double>{p.lambda, std::log(p.alpha), std::atanh(p.beta / p.alpha),
                                   std::log(p.scale), p.location};
    };
    auto unpack = [](const std::vector<double>& v) {
        GhypParams p;
        p.lambda = v[0];
        p.alpha = std::exp(v[1]);
        p.beta = p.alpha * std::tanh(v[2]);
        p.scale = std::exp(v[3]);
        p.location = v[4];
        p.validate();
        return p;
    };
    auto neg_ll = [&](const std::vector<double>& v) {
        try {
            const GhypDist d(unpack(v));
            double ll = 0.0;
            for (double x : xs) ll += d.logpdf(x);
            return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
        } catch (const Error&) {
            return std::numeric_limits<double>::infinity();
        }
    };

    GhypParams start;
    if (warm_start) {
        start = *warm_start;
    } else {
        long double mean = 0.0L, sq = 0.0L;
        for (double x : xs) {
            mean += x;
            sq += static_cast<long double>(x) * x;
        }
        mean /= static_cast<double>(xs.size());
        const double var =
            static_cast<double>(sq) / static_cast<double>(xs.size()) -
            static_cast<double>(mean) * static_cast<double>(mean);
        if (!(var > 0.0)) throw DataError("fit_ghyp: constant series");
        start = GhypParams{-0.5, 1.0 / std::sqrt(var), 0.0, std::sqrt(var),
                           static_cast<double>(mean)};
    }
    const nm::Result r = nm::minimize(neg_ll, pack(start), 0.15, max_iterations, 1e-9);
    if (!std::isfinite(r.fx)) throw NumericError("fit_ghyp: no finite likelihood found");
    GhypFit fit;
    fit.params = unpack(r.x);
    fit.log_likelihood = -r.fx;
    fit.converged = r.converged;
    return fit;
}

struct RollingVarResult {
    std::vector<std::string> dates;  // forecast dates (window-th onward)
    std::vector<double> forecasts;   // VaR applying to each date
    std::vector<bool> carried;       // true where a failed fit reused the last forecast
};

namespace detail {

// Quantile of a fitted single distribution via the damped transform, bracket
// expanded around a hint when one is available.
inline double single_dist_var(const GhypDist& dist, double tail_prob,
                              std::optional<double> hint) {
    const CharFn cf = make_char_fn(dist);
    const double damping = 0.5 * (dist.params().beta + dist.params().alpha);
    const double spread = std::max(mean_abs_deviation(dist, dist.mean()), 1e-12);
    double lo, hi;
    if (hint) {
        lo = *hint - 0.25 * spread;
        hi = *hint + 0.25 * spread;
    } else {
        lo = dist.mean() - 4.0 * spread;
        hi = dist.mean();
    }
    double f_lo = cdf_point(cf, lo, damping);
    double f_hi = cdf_point(cf, hi, damping);
    for (int i = 0; i < 80 && f_lo > tail_prob; ++i) {
        hi = lo;
        f_hi = f_lo;
        lo -= spread * (1 << std::min(i, 20));
        f_lo = cdf_point(cf, lo, damping);
    }
    for (int i = 0; i < 80 && f_hi < tail_prob; ++i) {
        lo = hi;
        f_lo = f_hi;
        hi += spread * (1 << std::min(i, 20));
        f_hi = cdf_point(cf, hi, damping);
    }
    if (f_lo > tail_prob || f_hi < tail_prob) {
        throw NumericError("single_dist_var: failed to bracket the quantile");
    }
    return refine_quantile(cf, tail_prob, damping, lo, hi, f_lo, f_hi);
}

} // namespace detail

// Rolling 250-day single-GHYP baseline: for each date n >= window, fit to the
// window ending at n-1 and forecast the level-VaR for date n.  Failed fits
// carry the last successful forecast forward and are flagged.
inline RollingVarResult rolling_simple_var(const std::vector<std::string>& dates,
                                           const std::vector<double>& returns,
                                           std::size_t window, double level,
                                           int fit_iterations = 400) {
    if (returns.size() != dates.size()) throw ArgumentError("rolling var: length mismatch");
    if (returns.size() <= window) throw ArgumentError("rolling var: series shorter than window");
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("rolling var: level in (0,1)");
    const double tail_prob = 1.0 - level;

    RollingVarResult out;
    std::optional<GhypParams> warm;
    std::optional<double> last_var;
    for (std::size_t n = window; n < returns.size(); ++n) {
        const std::vector<double> slice(returns.begin() + (n - window), returns.begin() + n);
        bool ok = true;
        double var = 0.0;
        try {
            const GhypFit fit = fit_ghyp(slice, fit_iterations, warm);
            warm = fit.params;
            var = detail::single_dist_var(GhypDist(fit.params), tail_prob, last_var);
        } catch (const Error&) {
            ok = false;
        }
        if (!ok) {
            if (!last_var) throw NumericError("rolling var: first window failed to fit");
            var = *last_var;
        }
        last_var = var;
        out.dates.push_back(dates[n]);
        out.forecasts.push_back(var);
        out.carried.push_back(!ok);
    }
    return out;
}

struct BacktestReport {
    std::string model_tag;
    double level = 0.95;
    std::size_t n = 0;
    std::size_t breaches = 0;
    std::optional<double> binomial_pvalue;
    std::optional<double> runs_pvalue; // unset when only one category occurs
};

inline BacktestReport assemble_report(const std::string& tag, double level,
                                      const std::vector<bool>& flags) {
    BacktestReport rep;
    rep.model_tag = tag;
    rep.level = level;
    rep.n = flags.size();
    for (bool f : flags) rep.breaches += f;
    if (rep.n > 0) {
        rep.binomial_pvalue = binomial_test_pvalue(rep.breaches, rep.n, level);
        if (rep.breaches > 0 && rep.breaches < rep.n) {
            rep.runs_pvalue = runs_test_pvalue(flags);
        }
    }
    return rep;
}

// One-step-ahead forecast series for one asset: the forecast for date n uses
// the posterior through n-1 (initialized at the stationary distribution).
struct ForecastSeries {
    std::vector<std::string> dates;
    std::vector<double> returns;
    std::vector<double> var;
    std::vector<double> es;
    std::vector<double> posterior_state1; // filtered posterior at each date
};

inline ForecastSeries forecast_series(const RegimeModel& model, const ReturnPanel& panel,
                                      std::size_t asset, double level, int horizon = 1,
                                      InversionConfig cfg = InversionConfig{},
                                      EsNormalization norm = EsNormalization::lower_tail,
                                      const std::optional<Posterior>& forced = std::nullopt) {
    panel.validate();
    if (!(level > 0.0 && level < 1.0)) throw ArgumentError("forecast: level in (0,1)");
    const double tail_prob = 1.0 - level;
    const RiskEngine engine(model, asset, horizon, cfg);
    const PosteriorSeries filtered = filter_series(model, panel);

    ForecastSeries out;
    out.dates = panel.dates;
    out.returns = panel.returns[asset];
    out.var.reserve(panel.size());
    out.es.reserve(panel.size());
    out.posterior_state1.reserve(panel.size());

    Posterior prior = stationary_distribution(model.transitions);
    for (std::size_t t = 0; t < panel.size(); ++t) {
        const Posterior use = forced ? *forced : prior;
        const RiskEngine::Forecast f = engine.var_es(use, tail_prob, norm);
        out.var.push_back(f.var);
        out.es.push_back(f.es);
        out.posterior_state1.push_back(filtered.posteriors[t].p1);
        prior = filtered.posteriors[t];
    }
    return out;
}

struct BacktestResult {
    BacktestReport in_sample;
    BacktestReport out_of_sample;
    ForecastSeries series;
};

// Splits the panel at `split_date` (inclusive on the in-sample side), runs
// the one-step-ahead VaR forecasts and assembles one report per period.
// `burn_in` drops the leading forecasts from the in-sample report.
inline BacktestResult backtest(const RegimeModel& model, const ReturnPanel& panel,
                               std::size_t asset, double level, const std::string& split_date,
                               std::size_t burn_in = 0,
                               InversionConfig cfg = InversionConfig{}) {
    panel.validate();
    if (panel.size() == 0) throw ArgumentError("backtest: empty panel");
    if (split_date < panel.dates.front() || split_date > panel.dates.back()) {
        throw ArgumentError("backtest: split date " + split_date + " outside the panel range");
    }
    BacktestResult out;
    out.series = forecast_series(model, panel, asset, level, 1, cfg);

    std::vector<bool> in_flags, out_flags;
    for (std::size_t t = 0; t < panel.size(); ++t) {
        const bool breach = out.series.returns[t] < out.series.var[t];
        if (panel.dates[t] <= split_date) {
            if (t >= burn_in) in_flags.push_back(breach);
        } else {
            out_flags.push_back(breach);
        }
    }
    out.in_sample = assemble_report("regime-ghyp", level, in_flags);
    out.out_of_sample = assemble_report("regime-ghyp", level, out_flags);
    return out;
}

} // namespace rsrisk
