#pragma once

#include <complex>

#include "rsrisk/fourier_risk.hpp"
#include "rsrisk/regime.hpp"

namespace fixtures {

inline rsrisk::RegimeModel two_asset_model() {
    using namespace rsrisk;
    RegimeModel m;
    m.transitions = TransitionMatrix{0.95, 0.90};
    AssetStates a;
    a.name = "EQ";
    a.state1 = GhypParams{1.0, 4.0, 0.5, 0.8, 0.0};
    a.state2 = GhypParams{-0.5, 1.5, -0.3, 1.5, 0.0};
    a.common_mean = 0.05;
    a.state1.location = equal_mean_location(a.state1, a.common_mean);
    a.state2.location = equal_mean_location(a.state2, a.common_mean);
    AssetStates b;
    b.name = "VOL";
    b.state1 = GhypParams{0.5, 3.0, -0.8, 1.0, 0.0};
    b.state2 = GhypParams{1.2, 2.0, 0.4, 2.0, 0.0};
    b.common_mean = -0.02;
    b.state1.location = equal_mean_location(b.state1, b.common_mean);
    b.state2.location = equal_mean_location(b.state2, b.common_mean);
    m.assets = {a, b};
    m.validate();
    return m;
}

inline rsrisk::RegimeModel single_asset_model() {
    rsrisk::RegimeModel m = two_asset_model();
    m.assets.resize(1);
    return m;
}

// A daily-return-scale model of the kind the pipeline is meant for.
inline rsrisk::RegimeModel daily_scale_model() {
    using namespace rsrisk;
    RegimeModel m;
    m.transitions = TransitionMatrix{0.97, 0.94};
    AssetStates a;
    a.name = "IDX";
    a.state1 = GhypParams{-0.5, 160.0, -3.0, 0.009, 0.0}; // calm
    a.state2 = GhypParams{-0.5, 45.0, -6.0, 0.022, 0.0};  // volatile
    a.common_mean = 4e-4;
    a.state1.location = equal_mean_location(a.state1, a.common_mean);
    a.state2.location = equal_mean_location(a.state2, a.common_mean);
    m.assets = {a};
    m.validate();
    return m;
}

inline rsrisk::CharFn normal_char_fn(double mu = 0.0, double sigma = 1.0) {
    return rsrisk::CharFn{
        [mu, sigma](std::complex<double> u) {
            return std::exp(std::complex<double>(0.0, mu) * u - 0.5 * sigma * sigma * u * u);
        },
        rsrisk::Strip{-1e30, 1e30}};
}

} // namespace fixtures
