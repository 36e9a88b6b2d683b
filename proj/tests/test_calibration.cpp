#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rsrisk/calibration.hpp"
#include "rsrisk/quadrature.hpp"

using namespace rsrisk;
using Catch::Approx;
using fixtures::single_asset_model;
using fixtures::two_asset_model;

namespace {

// Brute-force HMM likelihood: sum over all 2^T hidden state paths.
double enumeration_log_likelihood(const RegimeModel& m, const ReturnPanel& panel) {
    const std::size_t T = panel.size();
    std::vector<GhypDist> d1, d2;
    for (const auto& a : m.assets) {
        d1.emplace_back(a.state1);
        d2.emplace_back(a.state2);
    }
    const Posterior pi = stationary_distribution(m.transitions);
    const double start[2] = {pi.p1, pi.p2};
    const double trans[2][2] = {{m.transitions.p11, m.transitions.p12()},
                                {m.transitions.p21(), m.transitions.p22}};
    long double total = 0.0L;
    for (std::size_t path = 0; path < (std::size_t{1} << T); ++path) {
        long double prob = 1.0L;
        int prev = -1;
        for (std::size_t t = 0; t < T; ++t) {
            const int s = (path >> t) & 1;
            prob *= (t == 0) ? start[s] : trans[prev][s];
            for (std::size_t a = 0; a < panel.assets(); ++a) {
                prob *= (s == 0 ? d1[a] : d2[a]).pdf(panel.returns[a][t]);
            }
            prev = s;
        }
        total += prob;
    }
    return std::log(static_cast<double>(total));
}

ReturnPanel simulated_panel(const RegimeModel& m, std::size_t steps, std::uint64_t seed) {
    return simulate(m, steps, seed).panel;
}

// L1 distance between two densities by quadrature.
double density_l1(const GhypDist& a, const GhypDist& b) {
    const auto [lo1, hi1] = a.integration_bounds(-50.0);
    const auto [lo2, hi2] = b.integration_bounds(-50.0);
    return quad::integrate([&](double x) { return std::fabs(a.pdf(x) - b.pdf(x)); },
                           std::min(lo1, lo2), std::max(hi1, hi2), 1e-7, 20000);
}

} // namespace

TEST_CASE("log likelihood", "[calibration]") {
    SECTION("identical states collapse to a plain density product") {
        RegimeModel m = two_asset_model();
        m.assets[0].state2 = m.assets[0].state1;
        m.assets[1].state2 = m.assets[1].state1;
        const ReturnPanel panel = simulated_panel(m, 50, 11);
        double want = 0.0;
        for (std::size_t t = 0; t < panel.size(); ++t) {
            for (std::size_t a = 0; a < 2; ++a) {
                want += GhypDist(m.assets[a].state1).logpdf(panel.returns[a][t]);
            }
        }
        CHECK(log_likelihood(m, panel) == Approx(want).epsilon(1e-12));
    }
    SECTION("forward recursion equals path enumeration") {
        for (std::size_t T : {std::size_t{5}, std::size_t{8}}) {
            const RegimeModel m2 = two_asset_model();
            const ReturnPanel p2 = simulated_panel(m2, T, 23 + T);
            CHECK(log_likelihood(m2, p2) ==
                  Approx(enumeration_log_likelihood(m2, p2)).epsilon(1e-11));
            const RegimeModel m1 = single_asset_model();
            const ReturnPanel p1 = simulated_panel(m1, T, 31 + T);
            CHECK(log_likelihood(m1, p1) ==
                  Approx(enumeration_log_likelihood(m1, p1)).epsilon(1e-11));
        }
    }
    SECTION("appending a date adds the log one-step predictive density") {
        const RegimeModel m = two_asset_model();
        const ReturnPanel panel = simulated_panel(m, 30, 47);
        const ReturnPanel head = panel.head(29);
        const Posterior p_last =
            filter_series(m, head, stationary_distribution(m.transitions)).posteriors.back();
        const auto& t = m.transitions;
        const double q1 = p_last.p1 * t.p11 + p_last.p2 * t.p21();
        const double q2 = p_last.p1 * t.p12() + p_last.p2 * t.p22;
        double f1 = 1.0, f2 = 1.0;
        for (std::size_t a = 0; a < 2; ++a) {
            f1 *= GhypDist(m.assets[a].state1).pdf(panel.returns[a][29]);
            f2 *= GhypDist(m.assets[a].state2).pdf(panel.returns[a][29]);
        }
        const double predictive = std::log(q1 * f1 + q2 * f2);
        CHECK(log_likelihood(m, panel) - log_likelihood(m, head) ==
              Approx(predictive).margin(1e-10));
    }
    SECTION("empty panel") {
        ReturnPanel empty;
        empty.names = {"EQ", "VOL"};
        empty.returns = {{}, {}};
        CHECK_THROWS_AS(log_likelihood(two_asset_model(), empty), ArgumentError);
    }
}

TEST_CASE("empirical autocovariance", "[calibration]") {
    SECTION("constant series") {
        const std::vector<double> xs(20, 0.37);
        for (std::size_t k : {std::size_t{1}, std::size_t{5}}) {
            CHECK(empirical_autocov(xs, k, Transform::identity) == Approx(0.0).margin(1e-18));
            CHECK(empirical_autocov(xs, k, Transform::abs) == Approx(0.0).margin(1e-18));
        }
    }
    SECTION("lag zero is the sample variance") {
        const std::vector<double> xs{0.013, -0.021, 0.004, 0.035, -0.008,
                                     -0.015, 0.022, -0.030, 0.011, 0.002};
        CHECK(empirical_autocov(xs, 0, Transform::identity) ==
              Approx(0.00036321).epsilon(1e-12));
    }
    SECTION("fixed ten-point sequence at lag two") {
        const std::vector<double> xs{0.013, -0.021, 0.004, 0.035, -0.008,
                                     -0.015, 0.022, -0.030, 0.011, 0.002};
        CHECK(empirical_autocov(xs, 2, Transform::abs) ==
              Approx(-8.182000000000002e-06).epsilon(1e-12));
        CHECK(empirical_autocov(xs, 2, Transform::identity) ==
              Approx(-7.977800000000001e-05).epsilon(1e-12));
    }
    SECTION("lag must be below the length") {
        const std::vector<double> xs{1.0, 2.0};
        CHECK_THROWS_AS(empirical_autocov(xs, 2, Transform::abs), ArgumentError);
    }
}

TEST_CASE("penalty", "[calibration]") {
    const RegimeModel m = single_asset_model();
    const ReturnPanel panel = simulated_panel(m, 400, 5150);

    SECTION("zero weight") {
        CHECK(penalty(m, panel, 10, 0.0) == 0.0);
    }
    SECTION("recomposition from gaps, single asset, two lags") {
        const double w = 3.5;
        double want = 0.0;
        for (std::size_t k : {std::size_t{1}, std::size_t{2}}) {
            const double gap = abs_return_autocov(m, 0, static_cast<long>(k), GFunc::abs) -
                               empirical_autocov(panel.returns[0], k, Transform::abs);
            want += gap * gap;
        }
        CHECK(penalty(m, panel, 2, w) == Approx(w * want).epsilon(1e-12));
    }
    SECTION("matching autocovariances give zero penalty") {
        // equal chain rows make the model autocovariance vanish; a panel of
        // constant |r| has zero empirical autocovariance as well
        RegimeModel deg = single_asset_model();
        deg.transitions = TransitionMatrix{0.4, 0.6};
        ReturnPanel flat;
        flat.names = {"EQ"};
        flat.dates = synthetic_dates(40);
        flat.returns = {{}};
        Rng rng(8);
        for (int t = 0; t < 40; ++t) flat.returns[0].push_back(rng.uniform() < 0.5 ? 0.01 : -0.01);
        CHECK(penalty(deg, flat, 5, 2.0) == Approx(0.0).margin(1e-20));
    }
    SECTION("unresolved automatic weight is rejected") {
        CalibrationConfig cfg;
        cfg.penalty_weight.reset();
        CHECK_THROWS_AS(penalty(m, panel, cfg), ArgumentError);
    }
}

TEST_CASE("objective", "[calibration]") {
    const RegimeModel m = single_asset_model();
    const ReturnPanel panel = simulated_panel(m, 300, 1122);
    CalibrationConfig cfg;
    cfg.penalty_lags = 5;

    SECTION("zero weight equals the log likelihood") {
        cfg.penalty_weight = 0.0;
        CHECK(objective(m, panel, cfg) == Approx(log_likelihood(m, panel)).epsilon(1e-14));
    }
    SECTION("recomposition") {
        cfg.penalty_weight = 2.25;
        CHECK(objective(m, panel, cfg) ==
              Approx(log_likelihood(m, panel) - penalty(m, panel, 5, 2.25)).epsilon(1e-13));
    }
    SECTION("nonincreasing in the penalty weight") {
        double prev = std::numeric_limits<double>::infinity();
        for (double w : {0.0, 1.0, 10.0}) {
            cfg.penalty_weight = w;
            const double val = objective(m, panel, cfg);
            CHECK(val <= prev + 1e-12);
            prev = val;
        }
    }
    SECTION("invariant under relabeling the states") {
        cfg.penalty_weight = 1.5;
        RegimeModel swapped = m;
        std::swap(swapped.transitions.p11, swapped.transitions.p22);
        for (auto& a : swapped.assets) std::swap(a.state1, a.state2);
        CHECK(objective(swapped, panel, cfg) ==
              Approx(objective(m, panel, cfg)).epsilon(1e-10));
    }
}

TEST_CASE("unconstrained transform", "[calibration]") {
    SECTION("round trip") {
        for (const RegimeModel& m : {single_asset_model(), two_asset_model()}) {
            const UnconstrainedVector v = to_unconstrained(m);
            std::vector<std::string> names;
            for (const auto& a : m.assets) names.push_back(a.name);
            const RegimeModel back = from_unconstrained(v, names);
            CHECK(back.transitions.p11 == Approx(m.transitions.p11).margin(1e-12));
            CHECK(back.transitions.p22 == Approx(m.transitions.p22).margin(1e-12));
            for (std::size_t a = 0; a < m.assets.size(); ++a) {
                const std::pair<const GhypParams*, const GhypParams*> pairs[] = {
                    {&back.assets[a].state1, &m.assets[a].state1},
                    {&back.assets[a].state2, &m.assets[a].state2}};
                for (const auto& pair : pairs) {
                    CHECK(pair.first->lambda == Approx(pair.second->lambda).margin(1e-10));
                    CHECK(pair.first->alpha == Approx(pair.second->alpha).epsilon(1e-10));
                    CHECK(pair.first->beta == Approx(pair.second->beta).margin(1e-10));
                    CHECK(pair.first->scale == Approx(pair.second->scale).epsilon(1e-10));
                    CHECK(pair.first->location == Approx(pair.second->location).margin(1e-10));
                }
                CHECK(back.assets[a].common_mean == m.assets[a].common_mean);
            }
        }
    }
    SECTION("dimension matches the parameter count") {
        RegimeModel m4 = two_asset_model();
        AssetStates c = m4.assets[0];
        c.name = "C";
        AssetStates d = m4.assets[1];
        d.name = "D";
        m4.assets.push_back(c);
        m4.assets.push_back(d);
        CHECK(to_unconstrained(m4).size() == 38);
        CHECK(to_unconstrained(single_asset_model()).size() == 11);
    }
    SECTION("reconstruction enforces equal means by construction") {
        UnconstrainedVector v(RegimeModel::parameter_count(1));
        Rng rng(5);
        for (auto& x : v) x = rng.gauss();
        const RegimeModel m = from_unconstrained(v, {"A"});
        CHECK(std::fabs(ghyp_mean(m.assets[0].state1) - m.assets[0].common_mean) < 1e-12);
        CHECK(std::fabs(ghyp_mean(m.assets[0].state2) - m.assets[0].common_mean) < 1e-12);
    }
    SECTION("non-finite coordinates are rejected") {
        UnconstrainedVector v(RegimeModel::parameter_count(1), 0.1);
        v[3] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(from_unconstrained(v, {"A"}), ArgumentError);
        CHECK_THROWS_AS(from_unconstrained(UnconstrainedVector(5, 0.0), {"A"}), ArgumentError);
    }
}

TEST_CASE("canonical labeling", "[calibration]") {
    const RegimeModel m = single_asset_model(); // state 1 is the calmer one
    const RegimeModel same = canonical_labeling(m);
    CHECK(same.transitions.p11 == m.transitions.p11);

    RegimeModel swapped = m;
    std::swap(swapped.transitions.p11, swapped.transitions.p22);
    std::swap(swapped.assets[0].state1, swapped.assets[0].state2);
    const RegimeModel fixed = canonical_labeling(swapped);
    CHECK(fixed.transitions.p11 == Approx(m.transitions.p11));
    CHECK(fixed.assets[0].state1.alpha == Approx(m.assets[0].state1.alpha));
}

TEST_CASE("initial guess", "[calibration]") {
    const ReturnPanel panel = simulated_panel(two_asset_model(), 500, 321);
    const RegimeModel g1 = initial_guess(panel, 7);
    const RegimeModel g2 = initial_guess(panel, 7);
    g1.validate(); // valid model with the equal-means invariant
    CHECK(g1.transitions.p11 == 0.95);
    CHECK(g1.transitions.p22 == 0.95);
    CHECK(to_unconstrained(g1) == to_unconstrained(g2)); // deterministic
    // the high-|r| split should look riskier for the first asset
    CHECK(g1.assets[0].state2.scale > g1.assets[0].state1.scale);
}

TEST_CASE("calibrate", "[calibration][slow]") {
    const RegimeModel truth = single_asset_model();
    const ReturnPanel panel = simulated_panel(truth, 4000, 20240101);

    SECTION("recovers the generating model from simulated data") {
        CalibrationConfig cfg;
        cfg.restarts = 3;
        cfg.max_iterations = 3000;
        cfg.seed = 99;
        const CalibrationResult res = calibrate(panel, cfg);
        const RegimeModel want = canonical_labeling(truth);
        INFO("fitted p11 " << res.model.transitions.p11 << " p22 " << res.model.transitions.p22);
        CHECK(std::fabs(res.model.transitions.p11 - want.transitions.p11) < 0.05);
        CHECK(std::fabs(res.model.transitions.p22 - want.transitions.p22) < 0.05);
        CHECK(density_l1(GhypDist(res.model.assets[0].state1), GhypDist(want.assets[0].state1)) <
              0.05);
        CHECK(density_l1(GhypDist(res.model.assets[0].state2), GhypDist(want.assets[0].state2)) <
              0.05);
        // accepted objective trace is nondecreasing
        for (std::size_t i = 1; i < res.diagnostics.objective_trace.size(); ++i) {
            CHECK(res.diagnostics.objective_trace[i] >= res.diagnostics.objective_trace[i - 1]);
        }
        CHECK(res.diagnostics.objective ==
              Approx(res.diagnostics.log_likelihood - res.diagnostics.penalty_value).margin(1e-8));
    }
    SECTION("starting at an optimum cannot lose ground") {
        CalibrationConfig cfg;
        cfg.restarts = 1;
        cfg.max_iterations = 600;
        cfg.penalty_weight = 0.5;
        const double f0 = objective(truth, panel, cfg);
        const CalibrationResult res = calibrate(panel, cfg, {truth});
        CHECK(res.diagnostics.objective >= f0 - 1e-9);
        CHECK(std::fabs(res.model.transitions.p11 -
                        canonical_labeling(truth).transitions.p11) < 0.03);
    }
    SECTION("rejects degenerate panels") {
        CalibrationConfig cfg;
        ReturnPanel flat;
        flat.names = {"X"};
        flat.dates = synthetic_dates(300);
        flat.returns = {std::vector<double>(300, 0.01)};
        CHECK_THROWS_AS(calibrate(flat, cfg), DataError);
        CHECK_THROWS_AS(calibrate(flat.head(8), cfg), DataError);
    }
    SECTION("short panels produce a warning") {
        CalibrationConfig cfg;
        cfg.restarts = 1;
        cfg.max_iterations = 40;
        const ReturnPanel small = simulated_panel(truth, 100, 5);
        const CalibrationResult res = calibrate(small, cfg);
        CHECK(!res.diagnostics.warnings.empty());
    }
}

TEST_CASE("held-out likelihood of the fit tracks the truth", "[calibration][slow]") {
    const RegimeModel truth = single_asset_model();
    double total_gap = 0.0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        const ReturnPanel train = simulated_panel(truth, 3000, 1000 + s);
        const ReturnPanel held = simulated_panel(truth, 2000, 9000 + s);
        CalibrationConfig cfg;
        cfg.restarts = 2;
        cfg.max_iterations = 2500;
        cfg.seed = 17 + s;
        const CalibrationResult res = calibrate(train, cfg);
        const double gap = (log_likelihood(truth, held) - log_likelihood(res.model, held)) /
                           static_cast<double>(held.size());
        INFO("seed " << s << " per-observation held-out gap " << gap);
        total_gap += gap;
    }
    CHECK(total_gap / seeds <= 0.01);
}
