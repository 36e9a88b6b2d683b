// Command-line front end: calibrate, filter, risk, backtest, simulate.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "rsrisk/backtest.hpp"
#include "rsrisk/calibration.hpp"
#include "rsrisk/fourier_risk.hpp"
#include "rsrisk/model_io.hpp"
#include "rsrisk/panel.hpp"
#include "rsrisk/regime.hpp"

namespace {

using namespace rsrisk;

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

struct DataOptions {
    std::string config_path;
    std::vector<std::string> data_specs; // NAME=PATH
    std::string start;
    std::string end;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
    cmd->add_option("--config", opts.config_path, "run configuration (JSON)");
    cmd->add_option("--data", opts.data_specs,
                    "price file as NAME=PATH (repeatable; overrides the config's prices)");
    cmd->add_option("--start", opts.start, "first date to keep (inclusive)");
    cmd->add_option("--end", opts.end, "last date to keep (inclusive)");
}

ReturnPanel resolve_panel(const DataOptions& opts) {
    std::vector<std::string> names, paths;
    if (!opts.data_specs.empty()) {
        for (const auto& spec : opts.data_specs) {
            const auto eq = spec.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == spec.size()) {
                throw ConfigError("--data expects NAME=PATH, got '" + spec + "'");
            }
            names.push_back(spec.substr(0, eq));
            paths.push_back(spec.substr(eq + 1));
        }
    } else if (!opts.config_path.empty()) {
        const RunConfig cfg = load_run_config(opts.config_path);
        names = cfg.asset_names;
        paths = cfg.price_paths;
    } else {
        throw ConfigError("no input data: pass --data NAME=PATH or --config");
    }
    ReturnPanel panel = ingest(paths, names);
    if (!opts.start.empty() || !opts.end.empty()) {
        const std::size_t dropped = panel.dropped_dates;
        panel = panel.window(opts.start, opts.end);
        panel.dropped_dates = dropped;
    }
    return panel;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write output file: " + path);
    return out;
}

int cmd_calibrate(const std::string& config_path, const std::string& out_path) {
    const RunConfig cfg = load_run_config(config_path);
    ReturnPanel panel = ingest(cfg.price_paths, cfg.asset_names);
    const std::size_t dropped = panel.dropped_dates;
    if (!cfg.calibration_start.empty() || !cfg.calibration_end.empty()) {
        panel = panel.window(cfg.calibration_start, cfg.calibration_end);
    }
    std::printf("observations: %zu\n", panel.size());
    std::printf("dropped_dates: %zu\n", dropped);
    const CalibrationResult res = calibrate(panel, cfg.calibration);
    save_model(res.model, out_path, diagnostics_to_json(res.diagnostics));
    std::printf("objective: %s\n", fmt(res.diagnostics.objective).c_str());
    std::printf("log_likelihood: %s\n", fmt(res.diagnostics.log_likelihood).c_str());
    std::printf("penalty: %s\n", fmt(res.diagnostics.penalty_value).c_str());
    std::printf("penalty_weight: %s\n", fmt(res.diagnostics.penalty_weight).c_str());
    std::printf("converged: %s\n", res.diagnostics.converged ? "true" : "false");
    std::printf("evaluations: %d\n", res.diagnostics.evaluations);
    for (const auto& w : res.diagnostics.warnings) std::printf("warning: %s\n", w.c_str());
    std::printf("model_file: %s\n", out_path.c_str());
    return 0;
}

int cmd_filter(const std::string& model_path, const DataOptions& data,
               const std::string& out_path) {
    const RegimeModel model = load_model(model_path);
    const ReturnPanel panel = resolve_panel(data);
    const PosteriorSeries series = filter_series(model, panel);
    auto out = open_out(out_path);
    out << "date,posterior_state1,posterior_state2\n";
    for (std::size_t t = 0; t < series.size(); ++t) {
        out << series.dates[t] << ',' << fmt(series.posteriors[t].p1) << ','
            << fmt(series.posteriors[t].p2) << '\n';
    }
    std::printf("dates: %zu\n", series.size());
    std::printf("output: %s\n", out_path.c_str());
    return 0;
}

int cmd_risk(const std::string& model_path, const DataOptions& data, const std::string& asset,
             double level, int horizon, const std::string& out_path,
             const std::optional<double>& force_p1, const std::string& es_norm) {
    const RegimeModel model = load_model(model_path);
    const ReturnPanel panel = resolve_panel(data);
    const std::size_t a = model.asset_index(asset);
    if (panel.asset_index(asset) != a || panel.names != [&] {
            std::vector<std::string> names;
            for (const auto& x : model.assets) names.push_back(x.name);
            return names;
        }()) {
        throw DataError("risk: panel assets must match the model's assets in order");
    }
    InversionConfig cfg;
    if (!data.config_path.empty()) cfg = load_run_config(data.config_path).inversion;
    const EsNormalization norm =
        es_norm == "paper" ? EsNormalization::paper : EsNormalization::lower_tail;
    std::optional<Posterior> forced;
    if (force_p1) forced = Posterior{*force_p1, 1.0 - *force_p1};
    const ForecastSeries series =
        forecast_series(model, panel, a, level, horizon, cfg, norm, forced);
    auto out = open_out(out_path);
    out << "date,return,var,es,posterior_state1\n";
    for (std::size_t t = 0; t < series.dates.size(); ++t) {
        out << series.dates[t] << ',' << fmt(series.returns[t]) << ',' << fmt(series.var[t])
            << ',' << fmt(series.es[t]) << ',' << fmt(series.posterior_state1[t]) << '\n';
    }
    std::printf("dates: %zu\n", series.dates.size());
    std::printf("output: %s\n", out_path.c_str());
    return 0;
}

nlohmann::json report_to_json(const BacktestReport& rep) {
    nlohmann::json j{{"model", rep.model_tag},
                     {"level", rep.level},
                     {"n", rep.n},
                     {"breaches", rep.breaches}};
    if (rep.binomial_pvalue) j["binomial_pvalue"] = *rep.binomial_pvalue;
    if (rep.runs_pvalue) j["runs_pvalue"] = *rep.runs_pvalue;
    return j;
}

void print_report(const char* tag, const BacktestReport& rep) {
    std::printf("%s.n: %zu\n", tag, rep.n);
    std::printf("%s.breaches: %zu\n", tag, rep.breaches);
    if (rep.binomial_pvalue) {
        std::printf("%s.binomial_pvalue: %s\n", tag, fmt(*rep.binomial_pvalue).c_str());
    }
    if (rep.runs_pvalue) {
        std::printf("%s.runs_pvalue: %s\n", tag, fmt(*rep.runs_pvalue).c_str());
    }
}

int cmd_backtest(const std::string& model_path, const DataOptions& data, const std::string& asset,
                 double level, const std::string& split, std::size_t burn_in,
                 const std::string& baseline, std::size_t window, const std::string& out_path) {
    const RegimeModel model = load_model(model_path);
    const ReturnPanel panel = resolve_panel(data);
    const std::size_t a = model.asset_index(asset);
    InversionConfig cfg;
    if (!data.config_path.empty()) cfg = load_run_config(data.config_path).inversion;
    const BacktestResult res = backtest(model, panel, a, level, split, burn_in, cfg);

    nlohmann::json j{{"asset", asset},
                     {"split", split},
                     {"in_sample", report_to_json(res.in_sample)},
                     {"out_of_sample", report_to_json(res.out_of_sample)}};
    print_report("in_sample", res.in_sample);
    print_report("out_of_sample", res.out_of_sample);

    if (baseline == "simple") {
        if (panel.size() <= window) throw DataError("backtest: panel shorter than baseline window");
        const RollingVarResult rolled =
            rolling_simple_var(panel.dates, panel.returns[a], window, level);
        // compare over out-of-sample dates covered by both forecast sets
        std::vector<bool> base_flags, regime_flags;
        for (std::size_t i = 0; i < rolled.dates.size(); ++i) {
            if (rolled.dates[i] <= split) continue;
            const std::size_t t = window + i;
            base_flags.push_back(panel.returns[a][t] < rolled.forecasts[i]);
            regime_flags.push_back(panel.returns[a][t] < res.series.var[t]);
        }
        BacktestReport base = assemble_report("simple-ghyp", level, base_flags);
        BacktestReport regime_same = assemble_report("regime-ghyp", level, regime_flags);
        std::size_t carried = 0;
        for (bool c : rolled.carried) carried += c;
        j["baseline"] = report_to_json(base);
        j["baseline"]["window"] = window;
        j["baseline"]["carried_fits"] = carried;
        j["regime_on_baseline_span"] = report_to_json(regime_same);
        print_report("baseline", base);
        print_report("regime_on_baseline_span", regime_same);
    }

    auto out = open_out(out_path);
    out << j.dump(2) << "\n";
    std::printf("output: %s\n", out_path.c_str());
    return 0;
}

int cmd_simulate(const std::string& model_path, std::size_t steps, std::uint64_t seed,
                 const std::string& out_dir) {
    const RegimeModel model = load_model(model_path);
    const SimulationResult sim = simulate(model, steps, seed);
    std::filesystem::create_directories(out_dir);

    const std::string panel_path = out_dir + "/panel.csv";
    auto out = open_out(panel_path);
    out << "date";
    for (const auto& name : sim.panel.names) out << ',' << name;
    out << ",state\n";
    for (std::size_t t = 0; t < sim.panel.size(); ++t) {
        out << sim.panel.dates[t];
        for (std::size_t a = 0; a < sim.panel.assets(); ++a) {
            out << ',' << fmt(sim.panel.returns[a][t]);
        }
        out << ',' << sim.states[t] << '\n';
    }

    // price files reconstructed from the returns so the panel can be ingested
    for (std::size_t a = 0; a < sim.panel.assets(); ++a) {
        const std::string path = out_dir + "/" + sim.panel.names[a] + ".csv";
        auto price_out = open_out(path);
        price_out << "date,close\n";
        double price = 100.0;
        price_out << date_offset(sim.panel.dates.front(), -1) << ',' << fmt(price) << '\n';
        for (std::size_t t = 0; t < sim.panel.size(); ++t) {
            price *= std::exp(sim.panel.returns[a][t]);
            price_out << sim.panel.dates[t] << ',' << fmt(price) << '\n';
        }
    }
    std::printf("steps: %zu\n", sim.panel.size());
    std::printf("output_dir: %s\n", out_dir.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regime-switching GHYP risk model: calibration, filtering, Fourier VaR/ES "
                 "and backtesting"};
    app.require_subcommand(1);

    // calibrate
    auto* cal = app.add_subcommand("calibrate", "fit the model to price data");
    std::string cal_config, cal_out;
    cal->add_option("--config", cal_config, "run configuration (JSON)")->required();
    cal->add_option("--out", cal_out, "output model file (JSON)")->required();

    // filter
    auto* fil = app.add_subcommand("filter", "posterior state probabilities");
    std::string fil_model, fil_out;
    DataOptions fil_data;
    fil->add_option("--model", fil_model, "model file")->required();
    add_data_options(fil, fil_data);
    fil->add_option("--out", fil_out, "output CSV")->required();

    // risk
    auto* rsk = app.add_subcommand("risk", "per-date VaR and ES forecasts");
    std::string rsk_model, rsk_asset, rsk_out, rsk_norm = "lower";
    double rsk_level = 0.95;
    int rsk_horizon = 1;
    DataOptions rsk_data;
    std::optional<double> rsk_force;
    rsk->add_option("--model", rsk_model, "model file")->required();
    rsk->add_option("--asset", rsk_asset, "asset name")->required();
    rsk->add_option("--level", rsk_level, "VaR confidence level (default 0.95)");
    rsk->add_option("--horizon", rsk_horizon, "holding period in days (default 1)");
    add_data_options(rsk, rsk_data);
    rsk->add_option("--force-posterior", rsk_force,
                    "hold the forecast posterior fixed at (P1, 1-P1)");
    rsk->add_option("--es-normalization", rsk_norm,
                    "'lower' (tail mass) or 'paper' (1-level prefactor)")
        ->check(CLI::IsMember({"lower", "paper"}));
    rsk->add_option("--out", rsk_out, "output CSV")->required();

    // backtest
    auto* bt = app.add_subcommand("backtest", "breach counts and coverage tests");
    std::string bt_model, bt_asset, bt_split, bt_baseline, bt_out;
    double bt_level = 0.95;
    std::size_t bt_burn = 0, bt_window = 250;
    DataOptions bt_data;
    bt->add_option("--model", bt_model, "model file")->required();
    bt->add_option("--asset", bt_asset, "asset name")->required();
    bt->add_option("--split", bt_split, "last in-sample date")->required();
    bt->add_option("--level", bt_level, "VaR confidence level (default 0.95)");
    bt->add_option("--burn-in", bt_burn, "forecasts dropped from the in-sample report");
    bt->add_option("--baseline", bt_baseline, "'simple' adds the rolling single-GHYP comparison")
        ->check(CLI::IsMember({"simple"}));
    bt->add_option("--window", bt_window, "baseline lookback window (default 250)");
    add_data_options(bt, bt_data);
    bt->add_option("--out", bt_out, "output report (JSON)")->required();

    // simulate
    auto* sim = app.add_subcommand("simulate", "synthetic panel and hidden states");
    std::string sim_model, sim_out;
    std::size_t sim_steps = 0;
    std::uint64_t sim_seed = 1;
    sim->add_option("--model", sim_model, "model file")->required();
    sim->add_option("--steps", sim_steps, "number of steps")->required();
    sim->add_option("--seed", sim_seed, "RNG seed");
    sim->add_option("--out", sim_out, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (cal->parsed()) return cmd_calibrate(cal_config, cal_out);
        if (fil->parsed()) return cmd_filter(fil_model, fil_data, fil_out);
        if (rsk->parsed()) {
            return cmd_risk(rsk_model, rsk_data, rsk_asset, rsk_level, rsk_horizon, rsk_out,
                            rsk_force, rsk_norm);
        }
        if (bt->parsed()) {
            return cmd_backtest(bt_model, bt_data, bt_asset, bt_level, bt_split, bt_burn,
                                bt_baseline, bt_window, bt_out);
        }
        if (sim->parsed()) return cmd_simulate(sim_model, sim_steps, sim_seed, sim_out);
    } catch (const rsrisk::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
