#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rsrisk/backtest.hpp"

using namespace rsrisk;
using Catch::Approx;

namespace {

// Exact central binomial acceptance band: largest lo and smallest hi with
// P(X < lo) <= tail and P(X > hi) <= tail.
std::pair<std::size_t, std::size_t> binomial_band(std::size_t n, double p, double tail) {
    std::vector<double> pmf(n + 1);
    const double lp = std::log(p), lq = std::log1p(-p);
    const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
    for (std::size_t k = 0; k <= n; ++k) {
        const double kd = static_cast<double>(k);
        pmf[k] = std::exp(lgn - std::lgamma(kd + 1.0) -
                          std::lgamma(static_cast<double>(n - k) + 1.0) + kd * lp +
                          (static_cast<double>(n - k)) * lq);
    }
    std::size_t lo = 0;
    double acc = 0.0;
    while (lo <= n && acc + pmf[lo] <= tail) acc += pmf[lo++];
    std::size_t hi = n;
    acc = 0.0;
    while (hi > 0 && acc + pmf[hi] <= tail) acc -= -pmf[hi--];
    return {lo, hi};
}

} // namespace

TEST_CASE("breach series", "[backtest]") {
    const std::vector<std::string> dates = synthetic_dates(5);
    SECTION("no breaches when returns stay above the forecasts") {
        const BreachSeries b = breach_series(dates, {0.01, 0.02, 0.0, 0.015, 0.03},
                                             std::vector<double>(5, -0.05));
        CHECK(b.breaches() == 0);
    }
    SECTION("all breaches under an extreme forecast") {
        const BreachSeries b = breach_series(dates, {0.01, 0.02, 0.0, 0.015, 0.03},
                                             std::vector<double>(5, 10.0));
        CHECK(b.breaches() == 5);
    }
    SECTION("hand-checked flags") {
        const BreachSeries b = breach_series(dates, {-0.03, 0.01, -0.011, 0.002, -0.05},
                                             {-0.02, -0.02, -0.012, -0.02, -0.049});
        const std::vector<bool> want{true, false, false, false, true};
        CHECK(b.flags == want);
        CHECK(b.breaches() == 2);
    }
    SECTION("length mismatch") {
        CHECK_THROWS_AS(breach_series(dates, {0.1, 0.2}, {0.0, 0.0, 0.0}), ArgumentError);
    }
}

TEST_CASE("binomial test p-values", "[backtest]") {
    SECTION("29 violations in 999 days at the 95% level") {
        const double p = binomial_test_pvalue(29, 999, 0.95);
        CHECK(p >= 0.9985);
        CHECK(p <= 1.0);
        CHECK(p == Approx(0.999).margin(1.5e-3));
    }
    SECTION("10 violations in 610 days at the 95% level") {
        CHECK(binomial_test_pvalue(10, 610, 0.95) >= 0.99);
    }
    SECTION("all days breached") {
        // P(X >= n) = (1-level)^n, checked against direct exponentiation
        CHECK(binomial_test_pvalue(20, 20, 0.95) ==
              Approx(std::exp(20.0 * std::log(0.05))).epsilon(1e-10));
        CHECK(binomial_test_pvalue(400, 400, 0.95) == 0.0); // underflows to zero
    }
    SECTION("nonincreasing in the breach count") {
        double prev = 2.0;
        for (std::size_t x : {std::size_t{0}, std::size_t{10}, std::size_t{30},
                              std::size_t{60}, std::size_t{200}}) {
            const double p = binomial_test_pvalue(x, 999, 0.95);
            CHECK(p <= prev);
            prev = p;
        }
        CHECK(binomial_test_pvalue(0, 999, 0.95) == 1.0);
    }
    SECTION("invalid inputs") {
        CHECK_THROWS_AS(binomial_test_pvalue(30, 20, 0.95), ArgumentError);
        CHECK_THROWS_AS(binomial_test_pvalue(1, 20, 1.5), ArgumentError);
    }
    SECTION("Kupiec likelihood-ratio variant") {
        // exactly the expected count gives LR = 0 and p = 1
        CHECK(kupiec_lr_pvalue(50, 1000, 0.95) == Approx(1.0));
        CHECK(kupiec_lr_pvalue(100, 1000, 0.95) < 1e-6);
        const double p = kupiec_lr_pvalue(29, 999, 0.95);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("runs test", "[backtest]") {
    SECTION("strictly alternating flags have too many runs") {
        std::vector<bool> flags(20);
        for (std::size_t i = 0; i < flags.size(); ++i) flags[i] = i % 2 == 0;
        const double p = runs_test_pvalue(flags);
        CHECK(p < 0.01);
        // closed form: R = 20, n1 = n2 = 10
        const double expected = 1.0 + 2.0 * 10.0 * 10.0 / 20.0;
        const double variance = 2.0 * 100.0 * (200.0 - 20.0) / (400.0 * 19.0);
        const double z = (20.0 - expected) / std::sqrt(variance);
        CHECK(p == Approx(std::erfc(std::fabs(z) / std::sqrt(2.0))).epsilon(1e-12));
    }
    SECTION("two blocks have too few runs") {
        std::vector<bool> flags(20, false);
        for (std::size_t i = 0; i < 10; ++i) flags[i] = true;
        CHECK(runs_test_pvalue(flags) < 0.01);
    }
    SECTION("matches an independent evaluation on a fixed sequence") {
        const std::vector<bool> flags{true, false, false, true, false, false, false, true,
                                      false, true, true, false, false, false, true, false,
                                      false, false, false, true, false, true, false, false,
                                      true, false, false, true, false, false};
        std::size_t n1 = 0, n2 = 0, runs = 0;
        for (std::size_t t = 0; t < flags.size(); ++t) {
            (flags[t] ? n1 : n2) += 1;
            if (t == 0 || flags[t] != flags[t - 1]) ++runs;
        }
        const double a = static_cast<double>(n1), b = static_cast<double>(n2), n = a + b;
        const double e = 1.0 + 2.0 * a * b / n;
        const double v = 2.0 * a * b * (2.0 * a * b - n) / (n * n * (n - 1.0));
        const double want = std::erfc(std::fabs((runs - e) / std::sqrt(v)) / std::sqrt(2.0));
        CHECK(runs_test_pvalue(flags) == Approx(want).epsilon(1e-13));
    }
    SECTION("invariant under negating every flag") {
        const std::vector<bool> flags{true, true, false, true, false, false, true, false,
                                      true, true, false, false, false, true, false, true};
        std::vector<bool> negated;
        for (bool f : flags) negated.push_back(!f);
        CHECK(runs_test_pvalue(flags) == Approx(runs_test_pvalue(negated)).epsilon(1e-14));
    }
    SECTION("single-category input is rejected") {
        CHECK_THROWS_AS(runs_test_pvalue(std::vector<bool>(10, false)), ArgumentError);
        CHECK_THROWS_AS(runs_test_pvalue(std::vector<bool>(10, true)), ArgumentError);
    }
}

TEST_CASE("single-distribution GHYP fit", "[backtest]") {
    const GhypParams truth{-0.5, 1.8, -0.4, 1.1, 0.2};
    const GhypDist d(truth);
    Rng rng(515151);
    const auto xs = d.sample(2500, rng);

    const GhypFit fit = fit_ghyp(xs, 2500);
    double ll_truth = 0.0;
    for (double x : xs) ll_truth += d.logpdf(x);
    CHECK(fit.log_likelihood >= ll_truth - 1.0); // ML should not lose to the generator
    // fitted density close to the truth in L1
    const GhypDist fitted(fit.params);
    const auto [lo, hi] = d.integration_bounds(-50.0);
    const double l1 = quad::integrate(
        [&](double x) { return std::fabs(fitted.pdf(x) - d.pdf(x)); }, lo, hi, 1e-7, 20000);
    CHECK(l1 < 0.1);
    CHECK_THROWS_AS(fit_ghyp(std::vector<double>(5, 0.1)), DataError);
    CHECK_THROWS_AS(fit_ghyp(std::vector<double>(100, 0.1)), DataError);
}

TEST_CASE("rolling single-GHYP baseline", "[backtest][slow]") {
    // i.i.d. synthetic data: long-run breach rate compatible with 1 - level
    const GhypParams truth{-0.5, 2.0, -0.3, 1.0, 0.05};
    const GhypDist d(truth);
    Rng rng(777001);
    const std::size_t total = 850, window = 250;
    const auto xs = d.sample(total, rng);
    const auto dates = synthetic_dates(total);

    const RollingVarResult rolled = rolling_simple_var(dates, xs, window, 0.95);
    REQUIRE(rolled.forecasts.size() == total - window);
    CHECK(rolled.dates.front() == dates[window]);
    CHECK(rolled.dates.back() == dates.back());

    std::size_t breaches = 0, carried = 0;
    for (std::size_t i = 0; i < rolled.forecasts.size(); ++i) {
        breaches += xs[window + i] < rolled.forecasts[i];
        carried += rolled.carried[i];
    }
    CHECK(carried == 0);
    const auto [lo, hi] = binomial_band(rolled.forecasts.size(), 0.05, 0.025);
    INFO("breaches " << breaches << " band [" << lo << ", " << hi << "]");
    CHECK(breaches >= lo);
    CHECK(breaches <= hi);

    SECTION("argument validation") {
        CHECK_THROWS_AS(rolling_simple_var(dates, xs, total, 0.95), ArgumentError);
        CHECK_THROWS_AS(rolling_simple_var(dates, xs, window, 1.2), ArgumentError);
    }
}

TEST_CASE("forecast series", "[backtest]") {
    const RegimeModel m = fixtures::single_asset_model();
    const ReturnPanel panel = simulate(m, 40, 2025).panel;

    SECTION("causality: future returns do not move earlier forecasts") {
        const ForecastSeries base = forecast_series(m, panel, 0, 0.95);
        ReturnPanel bent = panel;
        for (std::size_t t = 25; t < bent.size(); ++t) bent.returns[0][t] += 0.5;
        const ForecastSeries moved = forecast_series(m, bent, 0, 0.95);
        for (std::size_t t = 0; t <= 25; ++t) {
            CHECK(moved.var[t] == base.var[t]);
            CHECK(moved.es[t] == base.es[t]);
        }
        CHECK(moved.var[26] != base.var[26]);
    }
    SECTION("forced posterior produces a constant forecast") {
        const ForecastSeries fixed =
            forecast_series(m, panel, 0, 0.95, 1, InversionConfig{},
                            EsNormalization::lower_tail, Posterior{1.0, 0.0});
        for (double v : fixed.var) CHECK(v == fixed.var.front());
        const RiskEngine engine(m, 0, 1);
        CHECK(fixed.var.front() == Approx(engine.var(Posterior{1.0, 0.0}, 0.05)).margin(1e-12));
    }
    SECTION("es stays below var and the posterior column is the filtered one") {
        const ForecastSeries s = forecast_series(m, panel, 0, 0.95);
        const PosteriorSeries filtered = filter_series(m, panel);
        for (std::size_t t = 0; t < panel.size(); ++t) {
            CHECK(s.es[t] < s.var[t]);
            CHECK(s.posterior_state1[t] == filtered.posteriors[t].p1);
        }
    }
}

TEST_CASE("backtest reports", "[backtest][slow]") {
    const RegimeModel m = fixtures::single_asset_model();
    const ReturnPanel panel = simulate(m, 700, 31415).panel;
    const std::string split = panel.dates[399];

    const BacktestResult res = backtest(m, panel, 0, 0.95, split);
    CHECK(res.in_sample.n == 400);
    CHECK(res.out_of_sample.n == 300);
    CHECK(res.in_sample.breaches <= res.in_sample.n);
    REQUIRE(res.in_sample.binomial_pvalue.has_value());
    // data simulated from the model itself: the count test should not reject
    CHECK(*res.in_sample.binomial_pvalue > 0.05);
    CHECK(*res.out_of_sample.binomial_pvalue > 0.05);

    SECTION("burn-in shortens the in-sample report") {
        const BacktestResult burned = backtest(m, panel, 0, 0.95, split, 50);
        CHECK(burned.in_sample.n == 350);
        CHECK(burned.out_of_sample.n == 300);
    }
    SECTION("zero-length out-of-sample segment") {
        const BacktestResult all_in = backtest(m, panel, 0, 0.95, panel.dates.back());
        CHECK(all_in.out_of_sample.n == 0);
        CHECK(all_in.out_of_sample.breaches == 0);
        CHECK(!all_in.out_of_sample.binomial_pvalue.has_value());
    }
    SECTION("split outside the panel") {
        CHECK_THROWS_AS(backtest(m, panel, 0, 0.95, "1970-01-01"), ArgumentError);
    }
}
